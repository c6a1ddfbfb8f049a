#include "smoothout/landscape.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "smoothout/parallel.hpp"

namespace smoothout {

LandscapeFn::LandscapeFn(Index dim, Evaluator eval, std::vector<Minimum> minima)
    : dim_(dim), eval_(std::move(eval)), minima_(std::move(minima)) {
  require(dim_ >= 1, ErrorKind::invalid_argument, "landscape dimension must be positive");
}

const Minimum& LandscapeFn::minimum(MinimumKind kind) const {
  for (const Minimum& m : minima_) {
    if (m.kind == kind) return m;
  }
  throw Error(ErrorKind::invalid_argument, "landscape declares no minimum of that kind");
}

LandscapeFn make_two_well(Index m, const WellSpec& flat, const WellSpec& sharp) {
  require(flat.center.size() == m && sharp.center.size() == m, ErrorKind::invalid_geometry,
          "well centers must have dimension m");
  require(flat.width > 0.0 && sharp.width > 0.0, ErrorKind::invalid_geometry,
          "well widths must be positive");
  require(sharp.width < flat.width, ErrorKind::invalid_geometry,
          "sharp well must be narrower than the flat one");
  const double min_gap = 3.0 * (flat.width + sharp.width);
  const double gap = (flat.center - sharp.center).cwiseAbs().minCoeff();
  require(gap > min_gap, ErrorKind::invalid_geometry,
          "wells overlap: centers must differ by more than 3(s_f + s_s) in every coordinate");

  const double ff = 1.0 / (2.0 * flat.width * flat.width);
  const double fs = 1.0 / (2.0 * sharp.width * sharp.width);
  auto eval = [wf = flat.center, ws = sharp.center, af = flat.depth, as = sharp.depth, ff,
               fs](const Eigen::Ref<const Vector>& w) {
    return 1.0 - af * std::exp(-(w - wf).squaredNorm() * ff) -
           as * std::exp(-(w - ws).squaredNorm() * fs);
  };
  std::vector<Minimum> minima{
      {flat.center, MinimumKind::flat, flat.width, gap / 2.0},
      {sharp.center, MinimumKind::sharp, sharp.width, gap / 2.0},
  };
  return LandscapeFn(m, std::move(eval), std::move(minima));
}

LandscapeFn two_well_preset(Index m, double sigma_s, double sigma_f) {
  return make_two_well(m, {Vector::Constant(m, -3.0), 1.0, sigma_f},
                       {Vector::Constant(m, 3.0), 1.0, sigma_s});
}

LandscapeFn make_quadratic(Index m, double scale) {
  return LandscapeFn(
      m, [scale](const Eigen::Ref<const Vector>& w) { return scale * w.squaredNorm(); },
      {{Vector::Zero(m), MinimumKind::flat, 1.0, std::numeric_limits<double>::infinity()}});
}

LandscapeFn make_constant(Index m, double value) {
  return LandscapeFn(m, [value](const Eigen::Ref<const Vector>&) { return value; });
}

LandscapeFn make_skewed_well(Index m, double left_width, double right_width) {
  require(left_width > 0.0 && right_width > 0.0, ErrorKind::invalid_geometry,
          "widths must be positive");
  auto eval = [left_width, right_width](const Eigen::Ref<const Vector>& w) {
    double e = 0.0;
    for (Index i = 0; i < w.size(); ++i) {
      const double s = w[i] < 0.0 ? left_width : right_width;
      e += w[i] * w[i] / (2.0 * s * s);
    }
    return 1.0 - std::exp(-e);
  };
  return LandscapeFn(m, std::move(eval),
                     {{Vector::Zero(m), MinimumKind::flat, std::min(left_width, right_width), 0.0}});
}

LandscapeFn combine(double alpha, const LandscapeFn& f, double beta, const LandscapeFn& g) {
  require(f.dim() == g.dim(), ErrorKind::invalid_argument, "dimension mismatch");
  return LandscapeFn(f.dim(), [alpha, beta, f, g](const Eigen::Ref<const Vector>& w) {
    return alpha * f(w) + beta * g(w);
  });
}

std::string to_string(SmoothingMethod method) {
  return method == SmoothingMethod::quadrature ? "quadrature" : "monte-carlo";
}

namespace {

Index int_pow(Index base, Index exp) {
  Index r = 1;
  for (Index i = 0; i < exp; ++i) {
    require(r <= std::numeric_limits<Index>::max() / std::max<Index>(base, 1),
            ErrorKind::invalid_argument, "node count overflows");
    r *= base;
  }
  return r;
}

// Midpoint-rule mean of f over D(w, a) with n nodes per axis.
double midpoint_mean(const LandscapeFn& f, const Eigen::Ref<const Vector>& w, double a, Index n,
                     unsigned threads) {
  const Index m = f.dim();
  const double h = 2.0 * a / static_cast<double>(n);
  const Index inner = int_pow(n, m - 1);
  std::vector<double> partial(static_cast<std::size_t>(n), 0.0);
  parallel_for(n, threads, [&](Index first) {
    Vector p = w;
    p[0] = w[0] - a + (static_cast<double>(first) + 0.5) * h;
    double sum = 0.0;
    for (Index k = 0; k < inner; ++k) {
      Index rest = k;
      for (Index d = 1; d < m; ++d) {
        const Index j = rest % n;
        rest /= n;
        p[d] = w[d] - a + (static_cast<double>(j) + 0.5) * h;
      }
      sum += f(p);
    }
    partial[static_cast<std::size_t>(first)] = sum;
  });
  double total = 0.0;
  for (double s : partial) total += s;
  return total / static_cast<double>(int_pow(n, m));
}

std::vector<double> monte_carlo_values(const LandscapeFn& f, const Eigen::Ref<const Vector>& w,
                                       double a, Index samples, unsigned threads, const Rng& rng) {
  std::vector<double> values(static_cast<std::size_t>(samples));
  const Vector center = w;
  parallel_for(samples, threads, [&](Index i) {
    Rng sub = rng.substream(static_cast<std::uint64_t>(i));
    Vector p(center.size());
    for (Index d = 0; d < p.size(); ++d) p[d] = center[d] - a + 2.0 * a * sub.uniform();
    values[static_cast<std::size_t>(i)] = f(p);
  });
  return values;
}

}  // namespace

SmoothedEstimate eval_smoothed(const LandscapeFn& f, const Eigen::Ref<const Vector>& w, double a,
                               const SmoothingOptions& opts, const Rng& rng) {
  require(a >= 0.0, ErrorKind::invalid_argument, "noise strength must be >= 0");
  require(w.size() == f.dim(), ErrorKind::length_mismatch, "point dimension mismatch");
  require(opts.budget >= 1, ErrorKind::invalid_argument, "budget must be positive");
  SmoothedEstimate est;
  est.method = opts.method;
  if (opts.method == SmoothingMethod::quadrature) {
    require(f.dim() <= 3, ErrorKind::dimension_too_high, "quadrature supports m <= 3");
  }
  if (a == 0.0) {
    est.value = f(w);
    est.samples = 1;
    return est;
  }
  if (opts.method == SmoothingMethod::quadrature) {
    const Index n = opts.budget;
    est.value = midpoint_mean(f, w, a, n, opts.threads);
    const Index coarse = std::max<Index>(1, n / 2);
    if (coarse < n) {
      est.std_error = std::abs(est.value - midpoint_mean(f, w, a, coarse, opts.threads)) / 3.0;
    }
    est.samples = int_pow(n, f.dim());
    return est;
  }
  const auto values = monte_carlo_values(f, w, a, opts.budget, opts.threads, rng);
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  est.value = mean;
  if (values.size() > 1) {
    est.std_error = std::sqrt(ss / static_cast<double>(values.size() - 1) /
                              static_cast<double>(values.size()));
  }
  est.samples = opts.budget;
  return est;
}

namespace {

// Center, the 2m face centers and `probes` uniform points of D(center, r).
std::vector<Vector> box_candidates(const Eigen::Ref<const Vector>& center, double r,
                                   const Rng& rng, Index probes) {
  const Index m = center.size();
  std::vector<Vector> out;
  out.emplace_back(center);
  for (Index d = 0; d < m; ++d) {
    for (double s : {-1.0, 1.0}) {
      Vector p = center;
      p[d] += s * r;
      out.push_back(std::move(p));
    }
  }
  Rng sub = rng.substream("box-probes");
  for (Index k = 0; k < probes; ++k) {
    Vector p(m);
    for (Index d = 0; d < m; ++d) p[d] = center[d] - r + 2.0 * r * sub.uniform();
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

double box_max(const LandscapeFn& f, const Eigen::Ref<const Vector>& center, double half_width,
               const Rng& rng, Index probes) {
  const Index m = center.size();
  double best = -std::numeric_limits<double>::infinity();
  for (const Vector& p : box_candidates(center, half_width, rng, probes)) best = std::max(best, f(p));
  if (m <= 12) {
    const Index corners = Index{1} << m;
    Vector p(m);
    for (Index c = 0; c < corners; ++c) {
      for (Index d = 0; d < m; ++d) p[d] = center[d] + ((c >> d) & 1 ? half_width : -half_width);
      best = std::max(best, f(p));
    }
  }
  return best;
}

BoxMinimum box_min_smoothed(const LandscapeFn& f, const Eigen::Ref<const Vector>& center,
                            double half_width, double a, const SmoothingOptions& opts,
                            const Rng& rng, Index probes) {
  const Rng noise = rng.substream("box-min-noise");
  BoxMinimum best;
  best.estimate.value = std::numeric_limits<double>::infinity();
  for (const Vector& p : box_candidates(center, half_width, rng, probes)) {
    const SmoothedEstimate e = eval_smoothed(f, p, a, opts, noise);
    if (e.value < best.estimate.value) {
      best.estimate = e;
      best.argmin = p;
    }
  }
  return best;
}

FlatCheck check_flat_constraint(const LandscapeFn& f, const Eigen::Ref<const Vector>& w_f,
                                double a, double tau, Index grid, const SmoothingOptions& opts,
                                const Rng& rng) {
  require(grid >= 2, ErrorKind::invalid_argument, "grid needs at least two points per axis");
  require(tau > 0.0, ErrorKind::invalid_argument, "tau must be positive");
  const Index m = f.dim();
  const double spacing = 2.0 * tau / static_cast<double>(grid - 1);
  const Index total = int_pow(grid, m);
  require(total <= (Index{1} << 24), ErrorKind::dimension_too_high,
          "flat-constraint lattice has more than 2^24 points");
  const Rng noise = rng.substream("flat-noise");

  std::vector<double> values(static_cast<std::size_t>(total));
  SmoothingOptions inner = opts;
  inner.threads = 1;
  parallel_for(total, opts.threads, [&](Index k) {
    Vector p(m);
    Index rest = k;
    for (Index d = 0; d < m; ++d) {
      p[d] = w_f[d] - tau + static_cast<double>(rest % grid) * spacing;
      rest /= grid;
    }
    values[static_cast<std::size_t>(k)] = eval_smoothed(f, p, a, inner, noise).value;
  });

  Index best = 0;
  for (Index k = 1; k < total; ++k) {
    if (values[static_cast<std::size_t>(k)] < values[static_cast<std::size_t>(best)]) best = k;
  }
  FlatCheck out;
  out.argmin.resize(m);
  Index rest = best;
  for (Index d = 0; d < m; ++d) {
    out.argmin[d] = w_f[d] - tau + static_cast<double>(rest % grid) * spacing;
    rest /= grid;
  }
  out.phi = (out.argmin - w_f).cwiseAbs().maxCoeff();
  out.spacing = spacing;
  out.pass = out.phi <= spacing * (1.0 + 1e-12);
  return out;
}

SharpCheck check_sharp_constraint(const LandscapeFn& f, const Eigen::Ref<const Vector>& w_s,
                                  const Eigen::Ref<const Vector>& w_f, double a, double eps,
                                  double tau, const SmoothingOptions& opts, const Rng& rng) {
  SharpCheck out;
  const BoxMinimum sharp_min = box_min_smoothed(f, w_s, eps, a, opts, rng.substream("lhs"));
  out.lhs = sharp_min.estimate.value;
  out.lhs_error = sharp_min.estimate.std_error;
  out.mid = box_max(f, w_s, eps, rng.substream("mid"));
  const BoxMinimum flat_min = box_min_smoothed(f, w_f, tau, a, opts, rng.substream("rhs"));
  out.rhs = flat_min.estimate.value;
  out.rhs_error = flat_min.estimate.std_error;
  out.pass = out.lhs + 3.0 * out.lhs_error >= out.mid && out.mid > out.rhs + 3.0 * out.rhs_error;
  return out;
}

LowerBoundCheck check_lower_bound(const LandscapeFn& f, const Eigen::Ref<const Vector>& w_s,
                                  double a, double eps_prime, const SmoothingOptions& opts,
                                  const Rng& rng) {
  require(eps_prime >= 0.0 && eps_prime < a, ErrorKind::invalid_argument,
          "lower bound needs 0 <= eps' < a");
  LowerBoundCheck out;
  const SmoothedEstimate e = eval_smoothed(f, w_s, a, opts, rng.substream("lhs"));
  out.lhs = e.value;
  out.lhs_error = e.std_error;
  out.box_max = box_max(f, w_s, eps_prime, rng.substream("box-max"));
  out.center_value = f(w_s);
  out.ratio_power = std::pow(eps_prime / a, static_cast<double>(f.dim()));
  out.bound = (1.0 - out.ratio_power) * out.box_max + out.ratio_power * out.center_value;
  const double k = opts.method == SmoothingMethod::quadrature ? 1.0 : 3.0;
  out.pass = out.lhs + k * out.lhs_error >= out.bound;
  return out;
}

double fit_slope(std::span<const double> a_grid, std::span<const double> values) {
  require(a_grid.size() == values.size() && a_grid.size() >= 2, ErrorKind::invalid_argument,
          "slope fit needs at least two matching points");
  const auto n = static_cast<double>(a_grid.size());
  double ma = 0.0;
  double mv = 0.0;
  for (std::size_t i = 0; i < a_grid.size(); ++i) {
    ma += a_grid[i];
    mv += values[i];
  }
  ma /= n;
  mv /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < a_grid.size(); ++i) {
    sxy += (a_grid[i] - ma) * (values[i] - mv);
    sxx += (a_grid[i] - ma) * (a_grid[i] - ma);
  }
  require(sxx > 0.0, ErrorKind::invalid_argument, "a_grid has no spread");
  return sxy / sxx;
}

double sensitivity_metric(const LandscapeFn& f, const Eigen::Ref<const Vector>& w_star,
                          std::span<const double> a_grid, const SmoothingOptions& opts,
                          const Rng& rng) {
  return sensitivity_metric(
      [&](double a) { return eval_smoothed(f, w_star, a, opts, rng).value; }, a_grid);
}

std::vector<SweepPoint> sweep_smoothed(const LandscapeFn& f, const Eigen::Ref<const Vector>& w,
                                       std::span<const double> a_grid,
                                       const SmoothingOptions& opts, const Rng& rng) {
  std::vector<SweepPoint> out;
  for (double a : a_grid) out.push_back({a, eval_smoothed(f, w, a, opts, rng)});
  return out;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points) {
  out << "a,value,stderr,method\n";
  char buf[160];
  for (const SweepPoint& p : points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,", p.a, p.estimate.value,
                  p.estimate.std_error);
    out << buf << to_string(p.estimate.method) << '\n';
  }
}

}  // namespace smoothout
