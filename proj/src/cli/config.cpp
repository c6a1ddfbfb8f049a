#include <cmath>
#include <fstream>
#include <set>

#include "smoothout/cli.hpp"

namespace smoothout::cli {

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorKind::config, msg); }

void check_keys(const Json& node, const std::set<std::string>& allowed, const std::string& where) {
  if (!node.is_object()) bad("'" + where + "' must be an object");
  for (const auto& [key, value] : node.items()) {
    if (!allowed.contains(key)) bad("unknown key '" + key + "' in '" + where + "'");
  }
}

Json& section(Json& doc, const char* key) {
  if (!doc.contains(key) || doc[key].is_null()) doc[key] = Json::object();
  if (!doc[key].is_object()) bad(std::string("'") + key + "' must be an object");
  return doc[key];
}

// Reads node[key] as T and writes the fallback back when it is absent, so
// the resolved document always carries every setting.
template <typename T>
T take(Json& node, const char* key, T fallback) {
  if (!node.contains(key) || node[key].is_null()) {
    node[key] = fallback;
    return fallback;
  }
  const Json& v = node[key];
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) bad(std::string("'") + key + "' must be a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) bad(std::string("'") + key + "' must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
        bad(std::string("'") + key + "' must be non-negative");
      }
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) bad(std::string("'") + key + "' must be a number");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) bad(std::string("'") + key + "' must be a string");
  }
  return v.get<T>();
}

std::string need_string(const Json& node, const char* key, const std::string& where) {
  if (!node.contains(key) || node[key].is_null()) bad("missing required '" + where + "." + key + "'");
  if (!node[key].is_string()) bad("'" + where + "." + key + "' must be a string");
  return node[key].get<std::string>();
}

std::vector<double> take_grid(Json& node, const char* key, std::vector<double> fallback) {
  if (!node.contains(key) || node[key].is_null()) {
    node[key] = fallback;
    return fallback;
  }
  if (!node[key].is_array()) bad(std::string("'") + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const Json& v : node[key]) {
    if (!v.is_number()) bad(std::string("'") + key + "' must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

void positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) bad(std::string(what) + " must be positive");
}

void resolve_common(Json& doc, const std::string& command,
                    const std::set<std::string>& sections) {
  if (!doc.is_object()) bad("config must be a JSON object");
  if (doc.empty()) bad("empty config");
  std::set<std::string> allowed{"command", "seed", "threads", "out"};
  allowed.insert(sections.begin(), sections.end());
  check_keys(doc, allowed, "config");
  if (doc.contains("command") && doc["command"] != command) {
    bad("config is for command '" + doc["command"].dump() + "', not '" + command + "'");
  }
  doc["command"] = command;
  take<std::uint64_t>(doc, "seed", 0);
  if (take<unsigned>(doc, "threads", 1) < 1) bad("threads must be >= 1");
  take<std::string>(doc, "out", "out");
}

void resolve_model(Json& doc) {
  Json& m = section(doc, "model");
  check_keys(m, {"preset"}, "model");
  const std::string preset = need_string(m, "preset", "model");
  if (preset != "mnist-mlp" && preset != "mlp-small" && preset != "small-conv") {
    bad("unknown model preset '" + preset + "'");
  }
}

void resolve_data(Json& doc) {
  const bool mnist_default = doc["model"]["preset"] == "mnist-mlp";
  Json& d = section(doc, "data");
  if (!d.contains("source") && mnist_default) d["source"] = "mnist";
  const std::string source = need_string(d, "source", "data");
  if (source == "mnist") {
    check_keys(d, {"source", "dir", "train_limit", "test_limit"}, "data");
    take<std::string>(d, "dir", "data/mnist");
    take<Index>(d, "train_limit", 0);
    take<Index>(d, "test_limit", 0);
  } else if (source == "blobs") {
    check_keys(d, {"source", "n", "test_n", "classes", "dim", "separation"}, "data");
    const Index n = take<Index>(d, "n", 2000);
    const Index test_n = take<Index>(d, "test_n", 1000);
    const int classes = take<int>(d, "classes", 4);
    if (classes < 2 || n < classes || test_n < classes) bad("blobs need classes >= 2 and n >= classes");
    if (take<Index>(d, "dim", 8) < 1) bad("blobs dim must be positive");
    if (take<double>(d, "separation", 3.0) < 0.0) bad("blobs separation must be >= 0");
  } else {
    bad("unknown data source '" + source + "'");
  }
}

void resolve_noise(Json& node) {
  if (!node.contains("noise") || node["noise"].is_null()) {
    node["noise"] = nullptr;
    return;
  }
  Json& n = node["noise"];
  check_keys(n, {"family", "a", "adaptive"}, "noise");
  const std::string family = take<std::string>(n, "family", "uniform");
  parse_noise_family(family);
  take<double>(n, "a", 0.0375);
  take<bool>(n, "adaptive", false);
  noise_spec(n).value().validate();
}

void resolve_train_section(Json& doc) {
  Json& t = section(doc, "train");
  check_keys(t,
             {"batch", "epochs", "optimizer", "lr", "momentum", "beta1", "beta2", "adam_epsilon",
              "lrs", "lrs_base_batch", "noise", "ablation_no_denoise", "decay_at",
              "decay_factor"},
             "train");
  take<Index>(t, "batch", 64);
  take<Index>(t, "epochs", 10);
  const std::string opt = take<std::string>(t, "optimizer", "sgd");
  if (opt == "sgd") {
    take<double>(t, "lr", 0.05);
    take<double>(t, "momentum", 0.9);
  } else if (opt == "adam") {
    take<double>(t, "lr", 1e-3);
    take<double>(t, "beta1", 0.9);
    take<double>(t, "beta2", 0.999);
    take<double>(t, "adam_epsilon", 1e-8);
  } else {
    bad("unknown optimizer '" + opt + "'");
  }
  parse_lr_scaling(take<std::string>(t, "lrs", "none"));
  take<Index>(t, "lrs_base_batch", 64);
  resolve_noise(t);
  take<bool>(t, "ablation_no_denoise", false);
  take<double>(t, "decay_at", 0.8);
  take<double>(t, "decay_factor", 0.1);
  train_config(doc).validate();
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io:
    case ErrorKind::bad_magic:
    case ErrorKind::truncated_file:
    case ErrorKind::count_mismatch:
    case ErrorKind::shape_mismatch:
    case ErrorKind::length_mismatch:
      return data_error;
    case ErrorKind::numeric:
      return numeric_failure;
    default:
      return config_error;
  }
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) bad("cannot read config '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    bad("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

Json merge(Json base, const Json& overrides) {
  if (base.is_null()) base = Json::object();
  base.merge_patch(overrides);
  return base;
}

std::uint64_t derived_seed(std::uint64_t seed, std::string_view purpose) {
  return Rng(seed).substream(purpose).next_u64();
}

std::optional<NoiseSpec> noise_spec(const Json& node) {
  if (node.is_null()) return std::nullopt;
  NoiseSpec spec;
  spec.family = parse_noise_family(node.at("family").get<std::string>());
  spec.strength = node.at("a").get<double>();
  spec.adaptive = node.at("adaptive").get<bool>();
  spec.grouping = spec.adaptive ? NoiseGrouping::per_filter_neuron : NoiseGrouping::global;
  return spec;
}

TrainConfig train_config(const Json& resolved) {
  const Json& t = resolved.at("train");
  TrainConfig cfg;
  cfg.batch_size = t.at("batch").get<Index>();
  cfg.epochs = t.at("epochs").get<Index>();
  if (t.at("optimizer") == "adam") {
    cfg.optimizer = Adam{t.at("lr").get<double>(), t.at("beta1").get<double>(),
                         t.at("beta2").get<double>(), t.at("adam_epsilon").get<double>()};
  } else {
    cfg.optimizer = SgdMomentum{t.at("lr").get<double>(), t.at("momentum").get<double>()};
  }
  cfg.lrs = parse_lr_scaling(t.at("lrs").get<std::string>());
  cfg.lrs_base_batch = t.at("lrs_base_batch").get<Index>();
  cfg.noise = noise_spec(t.at("noise"));
  cfg.seed = derived_seed(resolved.at("seed").get<std::uint64_t>(), "train");
  cfg.ablation_no_denoise = t.at("ablation_no_denoise").get<bool>();
  cfg.decay_at = t.at("decay_at").get<double>();
  cfg.decay_factor = t.at("decay_factor").get<double>();
  return cfg;
}

DataSplits load_data(const Json& resolved) {
  const Json& d = resolved.at("data");
  DataSplits out;
  if (d.at("source") == "mnist") {
    const std::filesystem::path dir = d.at("dir").get<std::string>();
    out.train = load_mnist_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte",
                               Split::train);
    out.test = load_mnist_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte",
                              Split::test);
    const Index train_limit = d.at("train_limit").get<Index>();
    const Index test_limit = d.at("test_limit").get<Index>();
    const auto truncate = [](Dataset& ds, Index limit) {
      if (limit <= 0 || limit >= ds.count()) return;
      std::vector<Index> shape = ds.inputs.shape();
      const Index per = ds.inputs.size() / shape[0];
      shape[0] = limit;
      ds.inputs = Tensor(shape, ds.inputs.data().head(limit * per));
      ds.labels.resize(static_cast<std::size_t>(limit));
    };
    truncate(out.train, train_limit);
    truncate(out.test, test_limit);
  } else {
    const std::uint64_t seed = derived_seed(resolved.at("seed").get<std::uint64_t>(), "data");
    const Index dim = d.at("dim").get<Index>();
    const int classes = d.at("classes").get<int>();
    const double sep = d.at("separation").get<double>();
    out.train = synth_blobs(d.at("n").get<Index>(), classes, dim, sep, seed, Split::train);
    out.test = synth_blobs(d.at("test_n").get<Index>(), classes, dim, sep,
                           Rng(seed).substream("test").next_u64(), Split::test);
  }
  return out;
}

Model build_model(const Json& resolved, const DataSplits& data) {
  return presets::by_name(resolved.at("model").at("preset").get<std::string>(),
                          data.train.sample_shape(), data.train.classes,
                          derived_seed(resolved.at("seed").get<std::uint64_t>(), "model"));
}

Json resolve_train(const Json& doc) {
  Json r = doc;
  resolve_common(r, "train", {"model", "data", "train"});
  resolve_model(r);
  resolve_data(r);
  resolve_train_section(r);
  return r;
}

Json resolve_compare_noise(const Json& doc) {
  Json r = doc;
  resolve_common(r, "compare-noise", {"model", "data", "train", "compare"});
  resolve_model(r);
  resolve_data(r);
  resolve_train_section(r);
  if (!r["train"]["noise"].is_null()) bad("compare-noise sets the noise per arm; remove train.noise");
  Json& c = section(r, "compare");
  check_keys(c, {"arms"}, "compare");
  static const std::vector<std::string> all{"baseline",     "uniform",
                                            "gaussian",     "ada-uniform",
                                            "ada-gaussian", "noise-only-uniform",
                                            "noise-only-gaussian"};
  if (!c.contains("arms") || c["arms"].is_null()) c["arms"] = all;
  if (!c["arms"].is_array() || c["arms"].empty()) bad("compare.arms must be a non-empty array");
  for (const Json& arm : c["arms"]) {
    if (!arm.is_string() || std::find(all.begin(), all.end(), arm.get<std::string>()) == all.end()) {
      bad("unknown compare arm " + arm.dump());
    }
  }
  return r;
}

Json resolve_landscape(const Json& doc) {
  Json r = doc;
  resolve_common(r, "landscape", {"landscape"});
  Json& l = section(r, "landscape");
  check_keys(l,
             {"dims", "sigma_s", "sigma_f", "flat", "sharp", "lower_bound", "quadrature_nodes",
              "mc_samples", "sweep_a"},
             "landscape");
  if (!l.contains("dims") || !l["dims"].is_array() || l["dims"].empty()) {
    bad("missing required 'landscape.dims' (non-empty array of dimensions)");
  }
  for (const Json& m : l["dims"]) {
    if (!m.is_number_integer() || m.get<Index>() < 1) bad("landscape.dims must hold positive integers");
  }
  const double sigma_s = take<double>(l, "sigma_s", 0.05);
  const double sigma_f = take<double>(l, "sigma_f", 1.0);
  positive(sigma_s, "sigma_s");
  positive(sigma_f, "sigma_f");

  Json& flat = section(l, "flat");
  check_keys(flat, {"a", "tau", "grid"}, "landscape.flat");
  take_grid(flat, "a", {sigma_f / 4.0, sigma_f / 2.0});
  take<double>(flat, "tau", sigma_f);
  if (take<Index>(flat, "grid", 21) < 2) bad("landscape.flat.grid must be >= 2");

  Json& sharp = section(l, "sharp");
  check_keys(sharp, {"a", "eps", "tau"}, "landscape.sharp");
  const double a = take<double>(sharp, "a", 0.3);
  positive(a, "landscape.sharp.a");
  take<double>(sharp, "eps", 0.9 * a);
  take<double>(sharp, "tau", sigma_f / 2.0);

  Json& lb = section(l, "lower_bound");
  check_keys(lb, {"a", "eps_prime"}, "landscape.lower_bound");
  const double lb_a = take<double>(lb, "a", 0.3);
  positive(lb_a, "landscape.lower_bound.a");
  take<double>(lb, "eps_prime", lb_a / 2.0);

  const std::vector<double> nodes = take_grid(l, "quadrature_nodes", {2000, 200, 40});
  if (nodes.size() != 3) bad("landscape.quadrature_nodes needs one entry per dimension 1..3");
  if (take<Index>(l, "mc_samples", 10000) < 2) bad("landscape.mc_samples must be >= 2");
  take_grid(l, "sweep_a", {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3});
  return r;
}

Json resolve_sharpness(const Json& doc) {
  Json r = doc;
  resolve_common(r, "sharpness", {"model", "data", "sharpness"});
  resolve_model(r);
  resolve_data(r);
  Json& s = section(r, "sharpness");
  check_keys(s,
             {"checkpoints", "epsilon", "runs", "iterations", "subset", "split", "eval_batch",
              "alphas", "slice", "a_grid", "sensitivity_batch"},
             "sharpness");
  if (!s.contains("checkpoints") || !s["checkpoints"].is_array() || s["checkpoints"].empty() ||
      s["checkpoints"].size() > 2) {
    bad("missing required 'sharpness.checkpoints' (one or two paths)");
  }
  for (const Json& c : s["checkpoints"]) {
    if (!c.is_string()) bad("sharpness.checkpoints must hold paths");
  }
  if (take<double>(s, "epsilon", 5e-4) < 0.0) bad("sharpness.epsilon must be >= 0");
  if (take<Index>(s, "runs", 5) < 1) bad("sharpness.runs must be >= 1");
  if (take<Index>(s, "iterations", 50) < 1) bad("sharpness.iterations must be >= 1");
  take<Index>(s, "subset", 1000);
  const std::string split = take<std::string>(s, "split", "train");
  if (split != "train" && split != "test") bad("sharpness.split must be 'train' or 'test'");
  if (take<Index>(s, "eval_batch", 1000) < 1) bad("sharpness.eval_batch must be >= 1");
  std::vector<double> alphas;
  for (int k = 0; k <= 20; ++k) alphas.push_back(-0.5 + 0.1 * k);
  take_grid(s, "alphas", alphas);
  Json& sl = section(s, "slice");
  check_keys(sl, {"lo", "hi", "points"}, "sharpness.slice");
  take<double>(sl, "lo", -1.0);
  take<double>(sl, "hi", 1.0);
  if (take<Index>(sl, "points", 21) < 2) bad("sharpness.slice.points must be >= 2");
  take_grid(s, "a_grid", {0.0, 0.01, 0.02, 0.03, 0.04, 0.05});
  if (take<Index>(s, "sensitivity_batch", 128) < 1) bad("sharpness.sensitivity_batch must be >= 1");
  return r;
}

}  // namespace smoothout::cli
