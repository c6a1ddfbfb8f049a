#pragma once

// Closed-form loss landscapes with declared flat/sharp minima, estimators of
// the box-smoothed loss  C_bar(w; a) = E[C(w + Theta)], Theta_i ~ U(-a, a),
// and numeric checks of the flat / sharp constraints.

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "smoothout/tensor.hpp"

namespace smoothout {

enum class MinimumKind { flat, sharp };

struct Minimum {
  Vector location;
  MinimumKind kind = MinimumKind::flat;
  double half_width = 0.0;      // characteristic width of the well
  double symmetry_half_width = 0.0;  // C is reflection-symmetric about location inside this box
};

class LandscapeFn {
 public:
  using Evaluator = std::function<double(const Eigen::Ref<const Vector>&)>;

  LandscapeFn(Index dim, Evaluator eval, std::vector<Minimum> minima = {});

  Index dim() const noexcept { return dim_; }
  const std::vector<Minimum>& minima() const noexcept { return minima_; }
  const Minimum& minimum(MinimumKind kind) const;
  double operator()(const Eigen::Ref<const Vector>& w) const { return eval_(w); }

 private:
  Index dim_;
  Evaluator eval_;
  std::vector<Minimum> minima_;
};

struct WellSpec {
  Vector center;
  double depth = 1.0;
  double width = 1.0;
};

/// C(w) = 1 - A_f exp(-|w-w_f|^2 / 2 s_f^2) - A_s exp(-|w-w_s|^2 / 2 s_s^2).
/// Requires s_s < s_f and every coordinate of the centers more than
/// 3 (s_f + s_s) apart.
LandscapeFn make_two_well(Index m, const WellSpec& flat, const WellSpec& sharp);

/// Two-well with centers at -3 (flat) and +3 (sharp) in every coordinate,
/// unit depths, s_f = sigma_f, s_s = sigma_s.
LandscapeFn two_well_preset(Index m, double sigma_s = 0.05, double sigma_f = 1.0);

/// f(w) = scale * |w - center|^2.
LandscapeFn make_quadratic(Index m, double scale = 1.0);
LandscapeFn make_constant(Index m, double value);
/// 1 - exp(-x^2 / 2 s^2) per coordinate with s = left_width for x < 0 and
/// right_width for x > 0: a minimum at 0 that is not reflection-symmetric.
LandscapeFn make_skewed_well(Index m, double left_width, double right_width);
/// alpha f + beta g.
LandscapeFn combine(double alpha, const LandscapeFn& f, double beta, const LandscapeFn& g);

enum class SmoothingMethod { quadrature, monte_carlo };

std::string to_string(SmoothingMethod method);

struct SmoothingOptions {
  SmoothingMethod method = SmoothingMethod::monte_carlo;
  Index budget = 10000;  // nodes per axis (quadrature) or samples (Monte Carlo)
  unsigned threads = 1;
};

struct SmoothedEstimate {
  double value = 0.0;
  double std_error = 0.0;  // sample stderr (MC) or discretization estimate (quadrature)
  SmoothingMethod method = SmoothingMethod::monte_carlo;
  Index samples = 0;
};

/// Quadrature: tensor-product midpoint rule over D(w, a) with `budget` nodes
/// per axis (m <= 3); its error estimate is |Q_n - Q_{n/2}| / 3.
/// Monte Carlo: mean of `budget` draws, sample i from rng.substream(i).
SmoothedEstimate eval_smoothed(const LandscapeFn& f, const Eigen::Ref<const Vector>& w, double a,
                               const SmoothingOptions& opts, const Rng& rng);

/// Largest C over D(center, half_width) among the center, the face centers,
/// all corners (m <= 12) and `probes` uniform points.
double box_max(const LandscapeFn& f, const Eigen::Ref<const Vector>& center, double half_width,
               const Rng& rng, Index probes = 256);

struct BoxMinimum {
  Vector argmin;
  SmoothedEstimate estimate;
};

/// Smallest C_bar over D(center, half_width) among the center, the face
/// centers and `probes` uniform points; every candidate shares the same
/// noise draws so their comparison is not blurred by sampling error.
BoxMinimum box_min_smoothed(const LandscapeFn& f, const Eigen::Ref<const Vector>& center,
                            double half_width, double a, const SmoothingOptions& opts,
                            const Rng& rng, Index probes = 64);

struct FlatCheck {
  Vector argmin;
  double phi = 0.0;      // |argmin - w_f|_inf
  double spacing = 0.0;  // grid cell size
  bool pass = false;
};

/// Minimizes C_bar over a `grid`^m lattice covering D(w_f, tau) and compares
/// the argmin with w_f. Passes when they are within one grid cell.
FlatCheck check_flat_constraint(const LandscapeFn& f, const Eigen::Ref<const Vector>& w_f,
                                double a, double tau, Index grid, const SmoothingOptions& opts,
                                const Rng& rng);

struct SharpCheck {
  double lhs = 0.0;  // min C_bar over D(w_s, eps)
  double lhs_error = 0.0;
  double mid = 0.0;  // max C over D(w_s, eps)
  double rhs = 0.0;  // min C_bar over D(w_f, tau)
  double rhs_error = 0.0;
  bool pass = false;

  double margin() const noexcept { return lhs - mid; }
};

/// lhs >= mid > rhs, each comparison allowing three estimator standard errors.
SharpCheck check_sharp_constraint(const LandscapeFn& f, const Eigen::Ref<const Vector>& w_s,
                                  const Eigen::Ref<const Vector>& w_f, double a, double eps,
                                  double tau, const SmoothingOptions& opts, const Rng& rng);

struct LowerBoundCheck {
  double lhs = 0.0;  // C_bar(w_s; a)
  double lhs_error = 0.0;
  double box_max = 0.0;      // max C over D(w_s, eps')
  double center_value = 0.0; // C(w_s)
  double ratio_power = 0.0;  // (eps'/a)^m
  double bound = 0.0;
  bool pass = false;
};

/// C_bar(w_s; a) >= (1 - r) max_{D(w_s,eps')} C + r C(w_s), r = (eps'/a)^m.
/// Tolerance is the quadrature error estimate, or three standard errors for
/// Monte Carlo.
LowerBoundCheck check_lower_bound(const LandscapeFn& f, const Eigen::Ref<const Vector>& w_s,
                                  double a, double eps_prime, const SmoothingOptions& opts,
                                  const Rng& rng);

/// Ordinary least-squares slope of values against a_grid.
double fit_slope(std::span<const double> a_grid, std::span<const double> values);

/// s = d C_bar(w*; a) / d a as the least-squares slope over an increasing
/// grid that starts at 0. `smoothed_at(a)` returns C_bar(w*; a).
template <typename SmoothedAt>
double sensitivity_metric(SmoothedAt&& smoothed_at, std::span<const double> a_grid) {
  require(!a_grid.empty() && a_grid.front() == 0.0, ErrorKind::invalid_argument,
          "a_grid must start at 0");
  for (std::size_t i = 1; i < a_grid.size(); ++i) {
    require(a_grid[i] > a_grid[i - 1], ErrorKind::invalid_argument, "a_grid must increase");
  }
  std::vector<double> values;
  values.reserve(a_grid.size());
  for (double a : a_grid) values.push_back(smoothed_at(a));
  return fit_slope(a_grid, values);
}

double sensitivity_metric(const LandscapeFn& f, const Eigen::Ref<const Vector>& w_star,
                          std::span<const double> a_grid, const SmoothingOptions& opts,
                          const Rng& rng);

struct SweepPoint {
  double a = 0.0;
  SmoothedEstimate estimate;
};

std::vector<SweepPoint> sweep_smoothed(const LandscapeFn& f, const Eigen::Ref<const Vector>& w,
                                       std::span<const double> a_grid,
                                       const SmoothingOptions& opts, const Rng& rng);

/// CSV `a,value,stderr,method`.
void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points);

}  // namespace smoothout
