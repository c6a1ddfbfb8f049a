#pragma once

// Base optimizers, learning-rate scaling and the SmoothOut step:
//   theta ~ noise; w += theta; g = grad at w + theta; w -= theta (exact restore);
//   base-optimizer update of w with g.

#include <cmath>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "smoothout/data.hpp"
#include "smoothout/objective.hpp"
#include "smoothout/perturb.hpp"

namespace smoothout {

struct SgdMomentum {
  double lr = 0.1;
  double momentum = 0.0;
};

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

using BaseOptimizer = std::variant<SgdMomentum, Adam>;

double learning_rate(const BaseOptimizer& opt);

enum class LrScaling { none, linear, sqrt };

std::string to_string(LrScaling rule);
LrScaling parse_lr_scaling(const std::string& name);

/// linear: base_lr * batch / base_batch; sqrt: base_lr * sqrt(batch / base_batch).
double scale_lr(double base_lr, Index base_batch, Index batch, LrScaling rule);

struct OptimizerState {
  Vector first;   // momentum buffer, or Adam first moment
  Vector second;  // Adam second moment
  std::uint64_t step = 0;
};

/// One base-optimizer update of `w` with gradient `g` at learning rate `lr`.
/// SGD: v = mu*v + g; w -= lr*v. Adam: bias-corrected moments.
void apply_update(const BaseOptimizer& opt, double lr, OptimizerState& state, Vector& w,
                  const Vector& g);

struct StepOptions {
  BaseOptimizer optimizer = SgdMomentum{};
  double lr = 0.1;
  std::optional<NoiseSpec> noise;
  bool denoise = true;
};

/// Perturb -> backprop -> denoise -> update with a caller-supplied theta.
/// Returns the loss at w + theta; `grad` holds the gradient used for the update.
template <Objective Obj>
double smoothout_step_with(Obj& obj, const Batch& batch, const StepOptions& opt,
                           OptimizerState& state, const Vector& theta, Vector& grad) {
  ParamVector& params = obj.params();
  PerturbationRecord record = perturb(params, theta);
  const double loss = obj.loss_and_grad(batch, grad);
  if (opt.denoise) denoise(params, record);
  apply_update(opt.optimizer, opt.lr, state, params.values, grad);
  return loss;
}

/// One SmoothOut iteration with theta drawn from `rng` per `opt.noise`.
/// Without noise this is exactly a base-optimizer step.
template <Objective Obj>
double smoothout_step(Obj& obj, const Batch& batch, const StepOptions& opt,
                      OptimizerState& state, Rng& rng, Vector& grad) {
  ParamVector& params = obj.params();
  if (!opt.noise) {
    const double loss = obj.loss_and_grad(batch, grad);
    apply_update(opt.optimizer, opt.lr, state, params.values, grad);
    return loss;
  }
  const Vector theta = draw_noise(*opt.noise, params, rng);
  return smoothout_step_with(obj, batch, opt, state, theta, grad);
}

struct TrainConfig {
  Index batch_size = 64;
  Index epochs = 1;
  BaseOptimizer optimizer = SgdMomentum{};
  LrScaling lrs = LrScaling::none;
  Index lrs_base_batch = 0;  // reference batch for lrs; 0 means batch_size
  std::optional<NoiseSpec> noise;
  std::uint64_t seed = 0;
  bool ablation_no_denoise = false;
  double decay_at = 0.8;      // fraction of epochs after which lr is multiplied by decay_factor
  double decay_factor = 0.1;

  void validate() const;
  /// Scaled learning rate before any decay.
  double scaled_lr() const;
  double lr_at_epoch(Index epoch) const;
};

struct EpochRecord {
  Index epoch = 0;
  Index step = 0;
  double train_loss = 0.0;  // mean loss at the perturbed points seen this epoch
  double test_loss = 0.0;
  double test_acc = 0.0;
  double lr = 0.0;
  double a = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Shuffled mini-batch SmoothOut training, deterministic given cfg.seed.
/// Metrics are evaluated at the clean parameters on `test` when given.
TrainLog train(Model& model, const Dataset& train_data, const Dataset* test_data,
               const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// CSV header `epoch,step,train_loss,test_loss,test_acc,lr,a`, 17 significant digits.
void write_metrics_csv(std::ostream& out, const TrainLog& log);

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  Index samples = 0;
};

Estimate mean_and_error(std::span<const double> values);

/// Streaming estimate of E[C(w + Theta)]: perturbation k is paired with data
/// batch k mod |data| and uses noise substream k; params are restored after
/// each perturbation.
template <Objective Obj>
Estimate estimate_smoothed_loss_stochastic(Obj& obj, std::span<const Batch> data,
                                           const NoiseSpec& noise, Index perturbations,
                                           const Rng& rng) {
  require(!data.empty(), ErrorKind::invalid_argument, "no data batches");
  std::vector<double> values(static_cast<std::size_t>(perturbations));
  ParamVector& params = obj.params();
  for (Index k = 0; k < perturbations; ++k) {
    Rng sub = rng.substream(static_cast<std::uint64_t>(k));
    const Vector theta = draw_noise(noise, params, sub);
    PerturbationRecord rec = perturb(params, theta);
    values[static_cast<std::size_t>(k)] =
        obj.loss(data[static_cast<std::size_t>(k) % data.size()]);
    denoise(params, rec);
  }
  return mean_and_error(values);
}

/// The N-copy average: each copy draws one theta and evaluates the full-data loss.
template <Objective Obj>
Estimate estimate_smoothed_loss_copies(Obj& obj, std::span<const Batch> data,
                                       const NoiseSpec& noise, Index copies, const Rng& rng) {
  std::vector<double> values(static_cast<std::size_t>(copies));
  ParamVector& params = obj.params();
  for (Index k = 0; k < copies; ++k) {
    Rng sub = rng.substream(static_cast<std::uint64_t>(k));
    const Vector theta = draw_noise(noise, params, sub);
    PerturbationRecord rec = perturb(params, theta);
    values[static_cast<std::size_t>(k)] = dataset_loss(obj, data);
    denoise(params, rec);
  }
  return mean_and_error(values);
}

}  // namespace smoothout
