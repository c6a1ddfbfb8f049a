#include <doctest.h>

#include <fstream>
#include <sstream>

#include "smoothout/cli.hpp"
#include "support/oracles.hpp"

using namespace smoothout;
using cli::Json;

namespace {

const std::filesystem::path kTmp = SMOOTHOUT_TEST_TMP;
const std::string kMnist = std::string(SMOOTHOUT_DATA_DIR) + "/mnist";

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "smoothout");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

Json read_json(const std::filesystem::path& p) { return Json::parse(slurp(p)); }

std::filesystem::path write_json(const std::filesystem::path& p, const Json& j) {
  std::ofstream(p) << j.dump();
  return p;
}

std::vector<std::string> blobs_train(const std::filesystem::path& out) {
  return {"train", "--preset", "mlp-small", "--data", "blobs", "--epochs", "3", "--batch", "32",
          "--out", out.string()};
}

}  // namespace

TEST_CASE("train writes metrics, checkpoint and summary") {
  const auto dir = oracle::fresh_dir(kTmp / "train");
  SUBCASE("mnist preset with the documented flags") {
    const Result r = run({"train", "--preset", "mnist-mlp", "--batch", "64", "--seed", "1",
                          "--epochs", "2", "--data-dir", kMnist, "--train-limit", "300",
                          "--test-limit", "100", "--out", (dir / "mnist").string()});
    REQUIRE(r.code == 0);
    const std::string csv = slurp(dir / "mnist" / "metrics.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(std::filesystem::exists(dir / "mnist" / "checkpoint.smo"));
    const Json s = read_json(dir / "mnist" / "summary.json");
    CHECK(s["seed"] == 1);
    CHECK(s["config"]["data"]["train_limit"] == 300);
    CHECK(s.contains("final_test_acc"));
    CHECK(s.contains("final_train_loss"));
    CHECK(s["wall_time"].is_number());
  }
  SUBCASE("noise strength and ablation are echoed") {
    auto args = blobs_train(dir / "noisy");
    for (const char* a : {"--noise", "uniform", "--a", "0.0375", "--ablation-no-denoise"}) args.push_back(a);
    REQUIRE(run(args).code == 0);
    const Json s = read_json(dir / "noisy" / "summary.json");
    CHECK(s["a"] == 0.0375);
    CHECK(s["ablation_no_denoise"] == true);
    CHECK(s["config"]["train"]["noise"]["family"] == "uniform");
    REQUIRE(run(blobs_train(dir / "plain")).code == 0);
    const Json p = read_json(dir / "plain" / "summary.json");
    CHECK(p["a"] == 0.0);
    CHECK(p["config"]["train"]["noise"].is_null());
  }
  SUBCASE("flags override the config file") {
    const auto cfg = write_json(dir / "cfg.json", Json{{"train", {{"batch", 32}, {"epochs", 1}}}});
    REQUIRE(run({"train", "--config", cfg.string(), "--preset", "mlp-small", "--data", "blobs",
                 "--batch", "16", "--out", (dir / "over").string()})
                .code == 0);
    const Json s = read_json(dir / "over" / "summary.json");
    CHECK(s["config"]["train"]["batch"] == 16);
    CHECK(s["config"]["train"]["epochs"] == 1);
  }
}

TEST_CASE("identical config twice gives identical outputs apart from wall_time") {
  const auto dir = oracle::fresh_dir(kTmp / "determinism");
  auto args = blobs_train(dir / "run");
  for (const char* a : {"--noise", "gaussian", "--a", "0.05", "--seed", "9"}) args.push_back(a);
  REQUIRE(run(args).code == 0);
  const std::string metrics = slurp(dir / "run" / "metrics.csv");
  const std::string ckpt = slurp(dir / "run" / "checkpoint.smo");
  Json summary = read_json(dir / "run" / "summary.json");
  REQUIRE(run(args).code == 0);
  CHECK(slurp(dir / "run" / "metrics.csv") == metrics);
  CHECK(slurp(dir / "run" / "checkpoint.smo") == ckpt);
  Json again = read_json(dir / "run" / "summary.json");
  summary.erase("wall_time");
  again.erase("wall_time");
  CHECK(summary == again);

  SUBCASE("the echoed config reproduces the run") {
    const auto cfg = write_json(dir / "echo.json", summary["config"]);
    REQUIRE(run({"train", "--config", cfg.string()}).code == 0);
    CHECK(slurp(dir / "run" / "checkpoint.smo") == ckpt);
  }
}

TEST_CASE("exit codes") {
  const auto dir = oracle::fresh_dir(kTmp / "exit");
  const auto empty = write_json(dir / "empty.json", Json::object());
  for (const char* cmd : {"train", "landscape", "sharpness", "compare-noise"}) {
    CAPTURE(cmd);
    const Result r = run({cmd, "--config", empty.string(), "--out", (dir / "x").string()});
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());
  }
  CHECK(run({"train"}).code == 2);
  CHECK(run({"train", "--no-such-flag"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"train", "--config", (dir / "missing.json").string()}).code == 2);
  const auto typo = write_json(dir / "typo.json", Json{{"model", {{"preset", "mlp-small"}}},
                                                       {"data", {{"source", "blobs"}}},
                                                       {"train", {{"bacth", 8}}}});
  CHECK(run({"train", "--config", typo.string()}).code == 2);
  CHECK(run({"train", "--preset", "mnist-mlp", "--data-dir", (dir / "nowhere").string()}).code == 3);

  std::filesystem::create_directories(dir / "badmnist");
  for (const char* f : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                        "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"}) {
    std::ofstream(dir / "badmnist" / f, std::ios::binary) << "not an idx file";
  }
  CHECK(run({"train", "--preset", "mnist-mlp", "--data-dir", (dir / "badmnist").string()}).code == 3);

  auto diverge = blobs_train(dir / "nan");
  for (const char* a : {"--lr", "1e300", "--momentum", "0"}) diverge.push_back(a);
  CHECK(run(diverge).code == 4);
  CHECK(run({"train", "--preset", "mlp-small", "--data", "blobs", "--noise", "dropout", "--a", "2",
             "--out", (dir / "y").string()})
            .code == 2);
}

TEST_CASE("compare-noise echoes the comparison-table noise strengths") {
  const auto dir = oracle::fresh_dir(kTmp / "compare");
  REQUIRE(run({"compare-noise", "--preset", "mlp-small", "--data", "blobs", "--epochs", "1",
               "--out", dir.string()})
              .code == 0);
  const std::string csv = slurp(dir / "comparison.csv");
  CHECK(csv.rfind("arm,family,a,adaptive,denoise,", 0) == 0);
  const Json s = read_json(dir / "summary.json");
  REQUIRE(s["arms"].size() == 7);
  const std::vector<std::pair<std::string, double>> expected{
      {"baseline", 0.0},        {"uniform", 0.0375},  {"gaussian", 0.025},
      {"ada-uniform", 0.15},    {"ada-gaussian", 0.2}, {"noise-only-uniform", 0.0001},
      {"noise-only-gaussian", 0.00015}};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(s["arms"][i]["arm"] == expected[i].first);
    CHECK(s["arms"][i]["a"] == expected[i].second);
  }
  CHECK(s["arms"][5]["denoise"] == false);
  CHECK(s["arms"][3]["adaptive"] == true);
  CHECK(std::filesystem::exists(dir / "arms" / "gaussian" / "metrics.csv"));
}

TEST_CASE("landscape command") {
  const auto dir = oracle::fresh_dir(kTmp / "landscape");
  const auto cfg = write_json(dir / "cfg.json",
                              Json{{"landscape", {{"quadrature_nodes", {800, 60, 20}}}}});
  const Result r = run({"landscape", "--config", cfg.string(), "--dims", "1,2", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const Json j = read_json(dir / "landscape.json");
  REQUIRE(j["results"].size() == 2);
  CHECK(j["results"][0]["flat"][0]["pass"] == true);
  CHECK(j["results"][0]["lower_bound"]["pass"] == true);
  CHECK(j["results"][0]["sensitivity_sharp"].get<double>() >
        j["results"][0]["sensitivity_flat"].get<double>());
  CHECK(j["config"]["landscape"]["sharp"]["eps"] == doctest::Approx(0.27));
  CHECK(slurp(dir / "sweep_m2_sharp.csv").rfind("a,value,stderr,method\n", 0) == 0);
}

TEST_CASE("sharpness command") {
  const auto dir = oracle::fresh_dir(kTmp / "sharpness");
  for (const char* seed : {"1", "2"}) {
    auto args = blobs_train(dir / seed);
    args.push_back("--seed");
    args.push_back(seed);
    REQUIRE(run(args).code == 0);
  }
  const std::string a = (dir / "1" / "checkpoint.smo").string();
  const std::string b = (dir / "2" / "checkpoint.smo").string();
  const Result r = run({"sharpness", "--preset", "mlp-small", "--data", "blobs", "--checkpoint", a,
                        "--checkpoint", b, "--runs", "2", "--subset", "200", "--out",
                        (dir / "report").string()});
  REQUIRE(r.code == 0);
  const Json j = read_json(dir / "report" / "sharpness.json");
  REQUIRE(j["reports"].size() == 2);
  for (const Json& rep : j["reports"]) {
    CHECK(rep["keskar_sharpness"].get<double>() >= 0.0);
    CHECK(rep["per_run"].size() == 2);
    CHECK(rep["sensitivity_slope"].is_number());
    CHECK(rep["metadata"]["epsilon"] == 5e-4);
  }
  CHECK(j["interpolation"].size() == 21);
  CHECK(std::filesystem::exists(dir / "report" / "interpolation.csv"));
  CHECK(std::filesystem::exists(dir / "report" / "slice_1.csv"));
  CHECK(run({"sharpness", "--preset", "small-conv", "--data", "mnist", "--data-dir", kMnist,
             "--checkpoint", a, "--out", (dir / "bad").string()})
            .code == 3);
}
