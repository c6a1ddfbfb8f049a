#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "smoothout/checkpoint.hpp"
#include "smoothout/cli.hpp"
#include "smoothout/landscape.hpp"
#include "smoothout/sharpness.hpp"

namespace smoothout::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::filesystem::path prepare_out(const Json& resolved) {
  const std::filesystem::path out = resolved.at("out").get<std::string>();
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  require(!ec, ErrorKind::io, "cannot create output directory '" + out.string() + "'");
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  require(static_cast<bool>(f), ErrorKind::io, "cannot write '" + path.string() + "'");
}

template <typename Writer>
void write_with(const std::filesystem::path& path, Writer&& writer) {
  std::ostringstream s;
  writer(s);
  write_text(path, s.str());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Json null_if_nan(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }

struct TrainOutcome {
  Model model;
  TrainLog log;
  EvalMetrics test;
};

TrainOutcome train_resolved(const Json& r, const DataSplits& data, std::ostream& log,
                            const std::string& tag = "") {
  TrainOutcome out{build_model(r, data), {}, {}};
  const TrainConfig cfg = train_config(r);
  out.log = train(out.model, data.train, &data.test, cfg, [&](const EpochRecord& e) {
    log << tag << "epoch " << e.epoch << " train_loss " << fmt(e.train_loss) << " test_acc "
        << fmt(e.test_acc) << '\n';
  });
  out.test = evaluate(out.model, data.test.chunks(1000));
  return out;
}

double final_train_loss(const TrainLog& log) {
  return log.epochs.empty() ? std::numeric_limits<double>::quiet_NaN()
                            : log.epochs.back().train_loss;
}

Json noise_json(NoiseFamily family, double a, bool adaptive) {
  return Json{{"family", to_string(family)}, {"a", a}, {"adaptive", adaptive}};
}

// Noise strengths of the uniform/Gaussian comparison table.
struct Arm {
  const char* name;
  Json noise;
  bool denoise;
};

std::vector<Arm> arm_table() {
  return {
      {"baseline", nullptr, true},
      {"uniform", noise_json(NoiseFamily::uniform, 0.0375, false), true},
      {"gaussian", noise_json(NoiseFamily::gaussian, 0.025, false), true},
      {"ada-uniform", noise_json(NoiseFamily::uniform, 0.15, true), true},
      {"ada-gaussian", noise_json(NoiseFamily::gaussian, 0.20, true), true},
      {"noise-only-uniform", noise_json(NoiseFamily::uniform, 0.0001, false), false},
      {"noise-only-gaussian", noise_json(NoiseFamily::gaussian, 0.00015, false), false},
  };
}

Json curve_json(const Curve& c) {
  Json out = Json::array();
  for (const CurvePoint& p : c) {
    out.push_back({{"abscissa", p.abscissa}, {"loss", p.loss}, {"accuracy", p.accuracy}});
  }
  return out;
}

}  // namespace

int cmd_train(const Json& doc, std::ostream& log) {
  const auto start = Clock::now();
  const Json r = resolve_train(doc);
  const DataSplits data = load_data(r);
  const std::filesystem::path out = prepare_out(r);
  const TrainOutcome t = train_resolved(r, data, log);

  write_with(out / "metrics.csv", [&](std::ostream& s) { write_metrics_csv(s, t.log); });
  save_checkpoint(out / "checkpoint.smo", t.model.params());
  const Json& noise = r["train"]["noise"];
  Json summary{{"command", "train"},
               {"final_test_acc", t.test.accuracy},
               {"final_test_loss", t.test.loss},
               {"final_train_loss", null_if_nan(final_train_loss(t.log))},
               {"seed", r["seed"]},
               {"a", noise.is_null() ? Json(0.0) : noise["a"]},
               {"ablation_no_denoise", r["train"]["ablation_no_denoise"]},
               {"epochs_run", t.log.epochs.size()},
               {"config", r},
               {"wall_time", seconds_since(start)}};
  write_text(out / "summary.json", summary.dump(2) + "\n");
  return ok;
}

int cmd_compare_noise(const Json& doc, std::ostream& log) {
  const auto start = Clock::now();
  const Json r = resolve_compare_noise(doc);
  const DataSplits data = load_data(r);
  const std::filesystem::path out = prepare_out(r);

  std::string table = "arm,family,a,adaptive,denoise,final_test_acc,final_test_loss,final_train_loss\n";
  Json rows = Json::array();
  for (const Arm& arm : arm_table()) {
    const auto& wanted = r["compare"]["arms"];
    if (std::find(wanted.begin(), wanted.end(), arm.name) == wanted.end()) continue;
    Json arm_doc = r;
    arm_doc.erase("compare");
    arm_doc["command"] = "train";
    arm_doc["train"]["noise"] = arm.noise;
    arm_doc["train"]["ablation_no_denoise"] = !arm.denoise;
    const Json arm_resolved = resolve_train(arm_doc);
    const TrainOutcome t = train_resolved(arm_resolved, data, log, std::string(arm.name) + " ");
    const std::filesystem::path dir = out / "arms" / arm.name;
    std::filesystem::create_directories(dir);
    write_with(dir / "metrics.csv", [&](std::ostream& s) { write_metrics_csv(s, t.log); });

    const std::string family = arm.noise.is_null() ? "none" : arm.noise["family"].get<std::string>();
    const double a = arm.noise.is_null() ? 0.0 : arm.noise["a"].get<double>();
    const bool adaptive = !arm.noise.is_null() && arm.noise["adaptive"].get<bool>();
    table += std::string(arm.name) + "," + family + "," + fmt(a) + "," +
             (adaptive ? "true" : "false") + "," + (arm.denoise ? "true" : "false") + "," +
             fmt(t.test.accuracy) + "," + fmt(t.test.loss) + "," +
             fmt(final_train_loss(t.log)) + "\n";
    rows.push_back({{"arm", arm.name},
                    {"family", family},
                    {"a", a},
                    {"adaptive", adaptive},
                    {"denoise", arm.denoise},
                    {"final_test_acc", t.test.accuracy},
                    {"final_test_loss", t.test.loss},
                    {"final_train_loss", null_if_nan(final_train_loss(t.log))}});
  }
  write_text(out / "comparison.csv", table);
  Json summary{{"command", "compare-noise"},
               {"arms", rows},
               {"seed", r["seed"]},
               {"config", r},
               {"wall_time", seconds_since(start)}};
  write_text(out / "summary.json", summary.dump(2) + "\n");
  return ok;
}

int cmd_landscape(const Json& doc, std::ostream& log) {
  const auto start = Clock::now();
  const Json r = resolve_landscape(doc);
  const std::filesystem::path out = prepare_out(r);
  const Json& l = r["landscape"];
  const double sigma_s = l["sigma_s"].get<double>(), sigma_f = l["sigma_f"].get<double>();
  const auto threads = r["threads"].get<unsigned>();
  const Rng root(derived_seed(r["seed"].get<std::uint64_t>(), "landscape"));
  const std::vector<double> sweep_a = l["sweep_a"].get<std::vector<double>>();

  Json results = Json::array();
  bool all_pass = true;
  for (const Json& dim : l["dims"]) {
    const Index m = dim.get<Index>();
    const LandscapeFn f = two_well_preset(m, sigma_s, sigma_f);
    const Vector w_f = f.minimum(MinimumKind::flat).location;
    const Vector w_s = f.minimum(MinimumKind::sharp).location;
    SmoothingOptions opts;
    opts.threads = threads;
    if (m <= 3) {
      opts.method = SmoothingMethod::quadrature;
      opts.budget = static_cast<Index>(l["quadrature_nodes"][static_cast<std::size_t>(m - 1)].get<double>());
    } else {
      opts.method = SmoothingMethod::monte_carlo;
      opts.budget = l["mc_samples"].get<Index>();
    }
    const Rng rng = root.substream(static_cast<std::uint64_t>(m));
    Json res{{"m", m}, {"method", to_string(opts.method)}, {"budget", opts.budget}};
    bool pass = true;

    Json flats = Json::array();
    const double tau = l["flat"]["tau"].get<double>();
    const Index grid = l["flat"]["grid"].get<Index>();
    for (const Json& a : l["flat"]["a"]) {
      Json entry{{"a", a}, {"tau", tau}, {"grid", grid}};
      try {
        const FlatCheck c = check_flat_constraint(f, w_f, a.get<double>(), tau, grid, opts,
                                                  rng.substream("flat"));
        entry["phi"] = c.phi;
        entry["spacing"] = c.spacing;
        entry["argmin"] = std::vector<double>(c.argmin.begin(), c.argmin.end());
        entry["pass"] = c.pass;
        pass = pass && c.pass;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::dimension_too_high) throw;
        entry["skipped"] = e.what();
      }
      flats.push_back(entry);
    }
    res["flat"] = flats;

    const Json& sc = l["sharp"];
    const SharpCheck s = check_sharp_constraint(f, w_s, w_f, sc["a"].get<double>(),
                                                sc["eps"].get<double>(), sc["tau"].get<double>(),
                                                opts, rng.substream("sharp"));
    res["sharp"] = {{"a", sc["a"]},       {"eps", sc["eps"]},          {"tau", sc["tau"]},
                    {"lhs", s.lhs},       {"lhs_stderr", s.lhs_error}, {"mid", s.mid},
                    {"rhs", s.rhs},       {"rhs_stderr", s.rhs_error}, {"margin", s.margin()},
                    {"pass", s.pass}};
    pass = pass && s.pass;

    const Json& lc = l["lower_bound"];
    const LowerBoundCheck b = check_lower_bound(f, w_s, lc["a"].get<double>(),
                                                lc["eps_prime"].get<double>(), opts,
                                                rng.substream("lower-bound"));
    res["lower_bound"] = {{"a", lc["a"]},
                          {"eps_prime", lc["eps_prime"]},
                          {"lhs", b.lhs},
                          {"lhs_error", b.lhs_error},
                          {"box_max", b.box_max},
                          {"center_value", b.center_value},
                          {"ratio_power", b.ratio_power},
                          {"bound", b.bound},
                          {"pass", b.pass}};
    pass = pass && b.pass;

    for (const auto& [name, w] : {std::pair{"flat", w_f}, std::pair{"sharp", w_s}}) {
      const auto points = sweep_smoothed(f, w, sweep_a, opts, rng.substream(name));
      write_with(out / ("sweep_m" + std::to_string(m) + "_" + name + ".csv"),
                 [&](std::ostream& o) { write_sweep_csv(o, points); });
      std::vector<double> values;
      for (const SweepPoint& p : points) values.push_back(p.estimate.value);
      res["sensitivity_" + std::string(name)] =
          sweep_a.front() == 0.0 ? Json(fit_slope(sweep_a, values)) : Json(nullptr);
    }
    res["pass"] = pass;
    all_pass = all_pass && pass;
    log << "m=" << m << (pass ? " pass" : " FAIL") << '\n';
    results.push_back(res);
  }
  Json report{{"command", "landscape"},
              {"pass", all_pass},
              {"results", results},
              {"seed", r["seed"]},
              {"config", r},
              {"wall_time", seconds_since(start)}};
  write_text(out / "landscape.json", report.dump(2) + "\n");
  return ok;
}

int cmd_sharpness(const Json& doc, std::ostream& log) {
  const auto start = Clock::now();
  const Json r = resolve_sharpness(doc);
  const Json& s = r["sharpness"];
  const DataSplits splits = load_data(r);
  const Dataset& full = s["split"] == "train" ? splits.train : splits.test;
  const Index subset = s["subset"].get<Index>();
  const Dataset data = [&] {
    if (subset <= 0 || subset >= full.count()) return full;
    Dataset d = full;
    const Batch b = full.slice(0, subset);
    d.inputs = b.inputs;
    d.labels = b.labels;
    return d;
  }();
  const std::vector<Batch> chunks = data.chunks(s["eval_batch"].get<Index>());
  const std::vector<Batch> small = data.chunks(s["sensitivity_batch"].get<Index>());
  const std::filesystem::path out = prepare_out(r);
  const Model shape = build_model(r, splits);
  const std::uint64_t seed = derived_seed(r["seed"].get<std::uint64_t>(), "sharpness");

  std::vector<Model> models;
  for (const Json& path : s["checkpoints"]) {
    Model m = shape;
    m.set_params(load_checkpoint(path.get<std::string>()));
    models.push_back(std::move(m));
  }

  AscentOptions ascent;
  ascent.iterations = s["iterations"].get<Index>();
  ascent.threads = r["threads"].get<unsigned>();
  const std::vector<double> a_grid = s["a_grid"].get<std::vector<double>>();
  Json reports = Json::array();
  for (std::size_t i = 0; i < models.size(); ++i) {
    const Rng rng = Rng(seed).substream(i);
    SharpnessReport rep = keskar_sharpness(models[i], std::span<const Batch>(chunks),
                                           s["epsilon"].get<double>(), s["runs"].get<Index>(),
                                           rng.substream("keskar"), ascent);
    rep.split = s["split"].get<std::string>();
    rep.sensitivity_slope =
        model_sensitivity(models[i], small, a_grid, NoiseFamily::uniform, rng.substream("sensitivity"));
    const Vector d = filter_normalized_direction(models[i].params(), rng.substream("slice"));
    rep.curves["slice"] = loss_slice(models[i], d, s["slice"]["lo"].get<double>(),
                                     s["slice"]["hi"].get<double>(),
                                     s["slice"]["points"].get<Index>(), chunks);
    write_with(out / ("slice_" + std::to_string(i) + ".csv"),
               [&](std::ostream& o) { write_curve_csv(o, rep.curves["slice"]); });
    log << "checkpoint " << i << " sharpness " << fmt(rep.keskar_sharpness) << " s "
        << fmt(rep.sensitivity_slope) << '\n';
    Json j = Json::parse(report_to_json(rep));
    j["checkpoint"] = s["checkpoints"][i];
    reports.push_back(std::move(j));
  }

  Json result{{"command", "sharpness"}, {"reports", reports}};
  if (models.size() == 2) {
    const std::vector<double> alphas = s["alphas"].get<std::vector<double>>();
    const Curve c = interpolate_losses(shape, models[0].params(), models[1].params(), alphas, chunks);
    write_with(out / "interpolation.csv", [&](std::ostream& o) { write_curve_csv(o, c); });
    result["interpolation"] = curve_json(c);
  }
  result["seed"] = r["seed"];
  result["config"] = r;
  result["wall_time"] = seconds_since(start);
  write_text(out / "sharpness.json", result.dump(2) + "\n");
  return ok;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"SmoothOut experiments: training, landscape checks and sharpness reports"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "top-level seed");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  };

  // train / compare-noise
  std::optional<std::string> preset, data_source, data_dir, optimizer, noise, lrs;
  std::optional<Index> batch, epochs, lrs_base_batch, train_limit, test_limit;
  std::optional<double> lr, momentum, a;
  bool adaptive = false, no_denoise = false;
  const auto training = [&](CLI::App* sub, bool with_noise) {
    sub->add_option("--preset", preset, "model preset (mnist-mlp, mlp-small, small-conv)");
    sub->add_option("--data", data_source, "data source (mnist, blobs)");
    sub->add_option("--data-dir", data_dir, "directory holding the MNIST IDX files");
    sub->add_option("--train-limit", train_limit, "use only the first N training samples");
    sub->add_option("--test-limit", test_limit, "use only the first N test samples");
    sub->add_option("--batch", batch, "batch size");
    sub->add_option("--epochs", epochs, "epochs");
    sub->add_option("--optimizer", optimizer, "sgd or adam");
    sub->add_option("--lr", lr, "base learning rate");
    sub->add_option("--momentum", momentum, "SGD momentum");
    sub->add_option("--lrs", lrs, "learning-rate scaling: none, linear, sqrt");
    sub->add_option("--lrs-base-batch", lrs_base_batch, "reference batch for --lrs");
    if (!with_noise) return;
    sub->add_option("--noise", noise, "noise family: none, uniform, gaussian, dropout");
    sub->add_option("--a", a, "noise strength");
    sub->add_flag("--adaptive", adaptive, "per-filter adaptive noise");
    sub->add_flag("--ablation-no-denoise", no_denoise, "skip the de-noising step");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train one model");
  common(train_cmd);
  training(train_cmd, true);
  CLI::App* compare_cmd = app.add_subcommand("compare-noise", "matched-seed noise comparison");
  common(compare_cmd);
  training(compare_cmd, false);

  std::vector<Index> dims;
  CLI::App* landscape_cmd = app.add_subcommand("landscape", "flat/sharp constraint checks");
  common(landscape_cmd);
  landscape_cmd->add_option("--dims", dims, "dimensions to check")->delimiter(',');

  std::vector<std::string> checkpoints;
  std::optional<double> epsilon;
  std::optional<Index> runs, subset;
  CLI::App* sharp_cmd = app.add_subcommand("sharpness", "sharpness report for checkpoints");
  common(sharp_cmd);
  sharp_cmd->add_option("--preset", preset, "model preset");
  sharp_cmd->add_option("--data", data_source, "data source (mnist, blobs)");
  sharp_cmd->add_option("--data-dir", data_dir, "directory holding the MNIST IDX files");
  sharp_cmd->add_option("--checkpoint", checkpoints, "checkpoint path (once or twice)");
  sharp_cmd->add_option("--epsilon", epsilon, "box size");
  sharp_cmd->add_option("--runs", runs, "ascent restarts");
  sharp_cmd->add_option("--subset", subset, "samples used (0 = all)");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return config_error;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  try {
    Json doc = config_path.empty() ? Json::object() : load_json(config_path);
    Json flags = Json::object();
    if (!out_dir.empty()) flags["out"] = out_dir;
    if (seed) flags["seed"] = *seed;
    if (threads) flags["threads"] = *threads;
    if (preset) flags["model"]["preset"] = *preset;
    if (data_source) flags["data"]["source"] = *data_source;
    if (data_dir) flags["data"]["dir"] = *data_dir;
    if (train_limit) flags["data"]["train_limit"] = *train_limit;
    if (test_limit) flags["data"]["test_limit"] = *test_limit;
    if (batch) flags["train"]["batch"] = *batch;
    if (epochs) flags["train"]["epochs"] = *epochs;
    if (optimizer) flags["train"]["optimizer"] = *optimizer;
    if (lr) flags["train"]["lr"] = *lr;
    if (momentum) flags["train"]["momentum"] = *momentum;
    if (lrs) flags["train"]["lrs"] = *lrs;
    if (lrs_base_batch) flags["train"]["lrs_base_batch"] = *lrs_base_batch;
    if (noise) {
      if (*noise == "none") {
        flags["train"]["noise"] = nullptr;  // a null in a merge patch removes the key
      } else {
        flags["train"]["noise"]["family"] = *noise;
      }
    }
    if (a) flags["train"]["noise"]["a"] = *a;
    if (adaptive) flags["train"]["noise"]["adaptive"] = true;
    if (no_denoise) flags["train"]["ablation_no_denoise"] = true;
    if (!dims.empty()) flags["landscape"]["dims"] = dims;
    if (!checkpoints.empty()) flags["sharpness"]["checkpoints"] = checkpoints;
    if (epsilon) flags["sharpness"]["epsilon"] = *epsilon;
    if (runs) flags["sharpness"]["runs"] = *runs;
    if (subset) flags["sharpness"]["subset"] = *subset;
    doc = merge(std::move(doc), flags);

    if (command == "train") return cmd_train(doc, out);
    if (command == "compare-noise") return cmd_compare_noise(doc, out);
    if (command == "landscape") return cmd_landscape(doc, out);
    return cmd_sharpness(doc, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const Json::exception& e) {
    err << "error: malformed config: " << e.what() << '\n';
    return config_error;
  }
}

}  // namespace smoothout::cli
