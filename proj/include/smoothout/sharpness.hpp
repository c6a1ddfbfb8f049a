#pragma once

// Sharpness instruments: SB<->LB interpolation curves, (C_eps, A)-sharpness
// with A = I, filter-normalized directions and 1-D loss slices. None of them
// mutate the model they are given.

#include <cmath>
#include <iosfwd>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "smoothout/objective.hpp"
#include "smoothout/optim.hpp"
#include "smoothout/parallel.hpp"

namespace smoothout {

struct CurvePoint {
  double abscissa = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;
};

using Curve = std::vector<CurvePoint>;

struct SharpnessReport {
  double keskar_sharpness = 0.0;  // max of per_run
  std::vector<double> per_run;
  std::vector<double> per_run_max_loss;
  double base_loss = 0.0;
  double sensitivity_slope = std::numeric_limits<double>::quiet_NaN();
  std::map<std::string, Curve> curves;

  double epsilon = 0.0;
  Index runs = 0;
  std::uint64_t seed = 0;
  std::string split = "train";
};

struct AscentOptions {
  Index iterations = 50;
  double step_fraction = 0.1;  // step per coordinate = step_fraction * eps * (|w_i| + 1)
  unsigned threads = 1;
};

/// 100 * (max_{w' in C_eps} C(w + w') - C(w)) / (1 + C(w)) with
/// C_eps = {|w'_i| <= eps (|w_i| + 1)}. The inner max is approximated by
/// projected sign-gradient ascent from a uniform random start in the box,
/// repeated `runs` times (restart r uses rng.substream(r)); the reported
/// sharpness is the maximum over restarts.
template <Objective Obj>
SharpnessReport keskar_sharpness(const Obj& obj, std::span<const Batch> data, double eps,
                                 Index runs, const Rng& rng, const AscentOptions& opts = {}) {
  require(eps >= 0.0, ErrorKind::invalid_argument, "epsilon must be >= 0");
  require(runs >= 1, ErrorKind::invalid_argument, "need at least one run");
  SharpnessReport report;
  report.epsilon = eps;
  report.runs = runs;
  report.seed = rng.seed();
  report.base_loss = dataset_loss(obj, data);
  report.per_run.assign(static_cast<std::size_t>(runs), 0.0);
  report.per_run_max_loss.assign(static_cast<std::size_t>(runs), report.base_loss);
  if (eps == 0.0) return report;

  const Vector base = obj.params().values;
  const Vector radius = eps * (base.cwiseAbs().array() + 1.0).matrix();
  const Vector step = opts.step_fraction * radius;
  parallel_for(runs, opts.threads, [&](Index r) {
    Obj local = obj;
    ParamVector& p = local.params();
    Rng sub = rng.substream(static_cast<std::uint64_t>(r));
    Vector offset(base.size());
    for (Index i = 0; i < offset.size(); ++i) {
      offset[i] = radius[i] * (2.0 * sub.uniform() - 1.0);
    }
    Vector grad;
    double best = -std::numeric_limits<double>::infinity();
    for (Index it = 0; it < opts.iterations; ++it) {
      p.values = base + offset;
      best = std::max(best, dataset_loss_and_grad(local, data, grad));
      offset += step.cwiseProduct(grad.cwiseSign());
      offset = offset.cwiseMin(radius).cwiseMax(-radius);
    }
    p.values = base + offset;
    best = std::max(best, dataset_loss(local, data));
    const auto slot = static_cast<std::size_t>(r);
    report.per_run_max_loss[slot] = best;
    report.per_run[slot] = std::max(0.0, 100.0 * (best - report.base_loss) / (1.0 + report.base_loss));
  });
  for (double v : report.per_run) report.keskar_sharpness = std::max(report.keskar_sharpness, v);
  return report;
}

/// Loss and accuracy along w+ = alpha w_s + (1 - alpha) w_f.
Curve interpolate_losses(const Model& shape, const ParamVector& w_f, const ParamVector& w_s,
                         std::span<const double> alphas, std::span<const Batch> data);

/// Gaussian direction with every filter / neuron group, and every bias
/// segment, rescaled to the norm of the matching weights. Zero-norm groups get
/// a zero direction.
Vector filter_normalized_direction(const ParamVector& params, const Rng& rng);

/// Loss and accuracy at w + t d for `points` evenly spaced t in [lo, hi].
Curve loss_slice(const Model& model, const Vector& direction, double lo, double hi, Index points,
                 std::span<const Batch> data);

/// Slope of the one-pass stochastic C_bar(w*; a) over a_grid: for every a the
/// data batches are visited once, each under a fresh perturbation.
double model_sensitivity(const Model& model, std::span<const Batch> data,
                         std::span<const double> a_grid, NoiseFamily family, const Rng& rng);

void write_curve_csv(std::ostream& out, const Curve& curve);
std::string report_to_json(const SharpnessReport& report, int indent = 2);

}  // namespace smoothout
