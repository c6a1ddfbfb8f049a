#include "smoothout/optim.hpp"

#include <cstdio>
#include <ostream>

namespace smoothout {

double learning_rate(const BaseOptimizer& opt) {
  return std::visit([](const auto& o) { return o.lr; }, opt);
}

std::string to_string(LrScaling rule) {
  switch (rule) {
    case LrScaling::none: return "none";
    case LrScaling::linear: return "linear";
    case LrScaling::sqrt: return "sqrt";
  }
  return "none";
}

LrScaling parse_lr_scaling(const std::string& name) {
  if (name == "none") return LrScaling::none;
  if (name == "linear") return LrScaling::linear;
  if (name == "sqrt") return LrScaling::sqrt;
  throw Error(ErrorKind::config, "unknown lr scaling rule '" + name + "'");
}

double scale_lr(double base_lr, Index base_batch, Index batch, LrScaling rule) {
  require(base_lr > 0.0 && base_batch > 0 && batch > 0, ErrorKind::invalid_argument,
          "scale_lr needs positive inputs");
  const double ratio = static_cast<double>(batch) / static_cast<double>(base_batch);
  switch (rule) {
    case LrScaling::none: return base_lr;
    case LrScaling::linear: return base_lr * ratio;
    case LrScaling::sqrt: return base_lr * std::sqrt(ratio);
  }
  return base_lr;
}

void apply_update(const BaseOptimizer& opt, double lr, OptimizerState& state, Vector& w,
                  const Vector& g) {
  require(g.size() == w.size(), ErrorKind::length_mismatch, "gradient length mismatch");
  if (state.first.size() != w.size()) state.first = Vector::Zero(w.size());
  ++state.step;
  if (const auto* sgd = std::get_if<SgdMomentum>(&opt)) {
    state.first = sgd->momentum * state.first + g;
    w -= lr * state.first;
    return;
  }
  const auto& adam = std::get<Adam>(opt);
  if (state.second.size() != w.size()) state.second = Vector::Zero(w.size());
  state.first = adam.beta1 * state.first + (1.0 - adam.beta1) * g;
  state.second = adam.beta2 * state.second + (1.0 - adam.beta2) * g.cwiseAbs2();
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(adam.beta1, t);
  const double c2 = 1.0 - std::pow(adam.beta2, t);
  w.array() -= lr * (state.first.array() / c1) /
               ((state.second.array() / c2).sqrt() + adam.epsilon);
}

void TrainConfig::validate() const {
  require(batch_size >= 1, ErrorKind::config, "batch_size must be positive");
  require(epochs >= 0, ErrorKind::config, "epochs must be non-negative");
  require(learning_rate(optimizer) > 0.0, ErrorKind::config, "learning rate must be positive");
  if (const auto* sgd = std::get_if<SgdMomentum>(&optimizer)) {
    require(sgd->momentum >= 0.0 && sgd->momentum < 1.0, ErrorKind::config,
            "momentum must lie in [0, 1)");
  }
  require(lrs_base_batch >= 0, ErrorKind::config, "lrs base batch must be non-negative");
  require(decay_at > 0.0 && decay_factor > 0.0, ErrorKind::config, "invalid lr decay");
  if (noise) noise->validate();
}

double TrainConfig::scaled_lr() const {
  const Index base = lrs_base_batch > 0 ? lrs_base_batch : batch_size;
  return scale_lr(learning_rate(optimizer), base, batch_size, lrs);
}

double TrainConfig::lr_at_epoch(Index epoch) const {
  const double lr = scaled_lr();
  if (epochs < 2) return lr;
  const auto decay_epoch = static_cast<Index>(std::floor(decay_at * static_cast<double>(epochs)));
  return epoch >= decay_epoch ? lr * decay_factor : lr;
}

TrainLog train(Model& model, const Dataset& train_data, const Dataset* test_data,
               const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  TrainLog log;
  const Rng root(cfg.seed);
  const Rng noise_root = root.substream("noise");
  const Rng epoch_root = root.substream("epoch");
  std::vector<Batch> test_chunks;
  if (test_data) test_chunks = test_data->chunks(1000);

  OptimizerState state;
  Vector grad;
  StepOptions step;
  step.optimizer = cfg.optimizer;
  step.noise = cfg.noise;
  step.denoise = !cfg.ablation_no_denoise;

  Index global_step = 0;
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    step.lr = cfg.lr_at_epoch(epoch);
    const std::uint64_t epoch_seed =
        epoch_root.substream(static_cast<std::uint64_t>(epoch)).next_u64();
    const BatchStream stream(train_data, cfg.batch_size, epoch_seed);
    double loss_sum = 0.0;
    Index seen = 0;
    for (std::size_t k = 0; k < stream.size(); ++k) {
      const Batch batch = stream[k];
      Rng rng = noise_root.substream(static_cast<std::uint64_t>(global_step));
      const double loss = smoothout_step(model, batch, step, state, rng, grad);
      require(std::isfinite(loss), ErrorKind::numeric,
              "non-finite loss at step " + std::to_string(global_step));
      loss_sum += loss * static_cast<double>(batch.count());
      seen += batch.count();
      ++global_step;
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.step = global_step;
    rec.train_loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
    if (test_data) {
      const EvalMetrics m = evaluate(model, test_chunks);
      rec.test_loss = m.loss;
      rec.test_acc = m.accuracy;
    }
    rec.lr = step.lr;
    rec.a = cfg.noise ? cfg.noise->strength : 0.0;
    log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return log;
}

void write_metrics_csv(std::ostream& out, const TrainLog& log) {
  out << "epoch,step,train_loss,test_loss,test_acc,lr,a\n";
  char buf[256];
  for (const EpochRecord& r : log.epochs) {
    std::snprintf(buf, sizeof(buf), "%lld,%lld,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(r.epoch), static_cast<long long>(r.step), r.train_loss,
                  r.test_loss, r.test_acc, r.lr, r.a);
    out << buf;
  }
}

Estimate mean_and_error(std::span<const double> values) {
  Estimate e;
  e.samples = static_cast<Index>(values.size());
  if (values.empty()) return e;
  double sum = 0.0;
  for (double v : values) sum += v;
  e.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    const double var = ss / static_cast<double>(values.size() - 1);
    e.std_error = std::sqrt(var / static_cast<double>(values.size()));
  }
  return e;
}

}  // namespace smoothout
