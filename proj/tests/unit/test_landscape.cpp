#include <doctest.h>

#include <cmath>
#include <sstream>

#include "smoothout/landscape.hpp"
#include "support/oracles.hpp"

using namespace smoothout;

namespace {

SmoothingOptions quadrature(Index nodes) {
  return {SmoothingMethod::quadrature, nodes, 1};
}

SmoothingOptions monte_carlo(Index samples, unsigned threads = 1) {
  return {SmoothingMethod::monte_carlo, samples, threads};
}

double preset_oracle(const Vector& w, double a, double sigma_s = 0.05) {
  const Index m = w.size();
  return oracle::two_well_smoothed(w, a, Vector::Constant(m, -3.0), 1.0, 1.0,
                                   Vector::Constant(m, 3.0), 1.0, sigma_s);
}

}  // namespace

TEST_CASE("two-well construction") {
  const LandscapeFn f = two_well_preset(1);
  CHECK(std::abs(f(Vector{{-3.0}})) < 5e-3);
  CHECK(std::abs(f(Vector{{3.0}})) < 5e-3);
  CHECK(std::abs(f(Vector{{0.0}}) - 1.0) < 0.015);
  // Each center is a critical point of its own bump; what remains is the
  // tail of the other well, 6 exp(-18) at w_s and far smaller at w_f.
  for (const Minimum& mn : f.minima()) {
    const Vector g = oracle::central_differences(
        [&](const Vector& w) { return f(w); }, mn.location, 1e-6);
    const double tail = mn.kind == MinimumKind::sharp ? 6.0 * std::exp(-18.0) : 0.0;
    CHECK(std::abs(g[0] - tail) < 1e-10);
  }
  SUBCASE("reflection symmetry about each center") {
    const LandscapeFn f3 = two_well_preset(3);
    Rng rng(1);
    for (const Minimum& mn : f3.minima()) {
      for (int k = 0; k < 20; ++k) {
        const Vector d = uniform_sample(rng, -mn.half_width, mn.half_width, 3).data();
        CHECK(std::abs(f3(mn.location + d) - f3(mn.location - d)) < 1e-12);
      }
    }
  }
  SUBCASE("declared minima are local minima (sampled)") {
    const LandscapeFn f2 = two_well_preset(2);
    Rng rng(2);
    for (const Minimum& mn : f2.minima()) {
      const double c = f2(mn.location);
      for (int k = 0; k < 100; ++k) {
        const Vector d = uniform_sample(rng, -0.5, 0.5, 2).data() * mn.half_width;
        CHECK(f2(mn.location + d) >= c);
      }
    }
  }
  CHECK(f.minimum(MinimumKind::sharp).location[0] == 3.0);
  CHECK_THROWS_AS(make_two_well(1, {Vector{{0.0}}, 1, 1}, {Vector{{1.0}}, 1, 0.05}), Error);
  CHECK_THROWS_AS(make_two_well(1, {Vector{{-3.0}}, 1, 0.05}, {Vector{{3.0}}, 1, 1.0}), Error);
  CHECK_THROWS_AS(make_two_well(2, {Vector{{-3.0, 0.0}}, 1, 1}, {Vector{{3.0, 0.5}}, 1, 0.05}),
                  Error);
}

TEST_CASE("eval_smoothed") {
  const Rng rng(11);
  const LandscapeFn sq = make_quadratic(1);
  SUBCASE("w^2 at a = 0.3") {
    const SmoothedEstimate q = eval_smoothed(sq, Vector{{0.0}}, 0.3, quadrature(10000), rng);
    CHECK(std::abs(q.value - 0.03) < 1e-6);
    CHECK(q.method == SmoothingMethod::quadrature);
    CHECK(q.std_error >= 0.0);
    const SmoothedEstimate mc = eval_smoothed(sq, Vector{{0.0}}, 0.3, monte_carlo(10000), rng);
    CHECK(std::abs(mc.value - 0.03) <= 3 * mc.std_error);
    CHECK(mc.samples == 10000);
  }
  SUBCASE("a = 0 is the pointwise value") {
    const LandscapeFn f = two_well_preset(2);
    const Vector w{{0.3, -2.9}};
    CHECK(eval_smoothed(f, w, 0.0, monte_carlo(100), rng).value == f(w));
    CHECK(eval_smoothed(f, w, 0.0, quadrature(100), rng).value == f(w));
  }
  SUBCASE("the sharp well is erased at a = 4 sigma_s") {
    const LandscapeFn f = two_well_preset(1);
    const Vector ws{{3.0}};
    const SmoothedEstimate q = eval_smoothed(f, ws, 0.2, quadrature(4000), rng);
    CHECK(q.value - f(ws) >= 0.5);
    CHECK(std::abs(q.value - preset_oracle(ws, 0.2)) < 1e-6);
  }
  SUBCASE("quadrature matches the erf closed form for m = 1, 2, 3") {
    for (Index m = 1; m <= 3; ++m) {
      const LandscapeFn f = two_well_preset(m, 0.2);
      const Vector w = Vector::Constant(m, 2.9);
      const SmoothedEstimate q = eval_smoothed(f, w, 0.3, quadrature(m == 3 ? 60 : 400), rng);
      CAPTURE(m);
      CHECK(std::abs(q.value - preset_oracle(w, 0.3, 0.2)) < 1e-3);
      CHECK(std::abs(q.value - preset_oracle(w, 0.3, 0.2)) <= 10 * q.std_error + 1e-12);
    }
  }
  SUBCASE("quadrature and Monte Carlo agree within 3 combined sigma (m <= 3)") {
    for (Index m = 1; m <= 3; ++m) {
      const LandscapeFn f = two_well_preset(m, 0.2);
      for (const Minimum& mn : f.minima()) {
        const SmoothedEstimate q = eval_smoothed(f, mn.location, 0.3, quadrature(m == 3 ? 80 : 300), rng);
        const SmoothedEstimate mc = eval_smoothed(f, mn.location, 0.3, monte_carlo(20000), rng);
        CHECK(std::abs(q.value - mc.value) <= 3 * std::hypot(q.std_error, mc.std_error));
      }
    }
  }
  SUBCASE("linearity") {
    const LandscapeFn f = two_well_preset(2), g = make_quadratic(2, 0.5);
    const LandscapeFn h = combine(2.0, f, -3.0, g);
    const Vector w{{2.8, 3.1}};
    for (const SmoothingOptions& o : {quadrature(200), monte_carlo(5000)}) {
      const double lhs = eval_smoothed(h, w, 0.25, o, rng).value;
      const double rhs = 2.0 * eval_smoothed(f, w, 0.25, o, rng).value -
                         3.0 * eval_smoothed(g, w, 0.25, o, rng).value;
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }
  SUBCASE("worker count does not change Monte Carlo results") {
    const LandscapeFn f = two_well_preset(10);
    const Vector w = Vector::Constant(10, 3.0);
    const double one = eval_smoothed(f, w, 0.1, monte_carlo(3000, 1), rng).value;
    const double four = eval_smoothed(f, w, 0.1, monte_carlo(3000, 4), rng).value;
    CHECK(one == four);
  }
  SUBCASE("non-decreasing in a at the minima") {
    for (Index m = 1; m <= 2; ++m) {
      const LandscapeFn f = two_well_preset(m);
      for (const Minimum& mn : f.minima()) {
        double prev = -1.0, prev_err = 0.0;
        for (double a : {0.0, 0.05, 0.1, 0.2, 0.3, 0.5}) {
          const SmoothedEstimate e = eval_smoothed(f, mn.location, a, quadrature(400), rng);
          CHECK(e.value >= prev - 3 * (e.std_error + prev_err));
          prev = e.value;
          prev_err = e.std_error;
        }
      }
    }
  }
  CHECK_THROWS_AS(eval_smoothed(two_well_preset(4), Vector::Zero(4), 0.1, quadrature(10), rng),
                  Error);
  CHECK_THROWS_AS(eval_smoothed(sq, Vector{{0.0}}, -0.1, monte_carlo(10), rng), Error);
}

TEST_CASE("box_max finds corners") {
  const LandscapeFn sq = make_quadratic(3);
  CHECK(box_max(sq, Vector::Zero(3), 0.1, Rng(1)) == doctest::Approx(0.03));
}

TEST_CASE("flat constraint") {
  const Rng rng(3);
  SUBCASE("symmetric preset, a = sigma_f / 2") {
    const LandscapeFn f = two_well_preset(1);
    const FlatCheck c = check_flat_constraint(f, Vector{{-3.0}}, 0.5, 1.0, 41, quadrature(400), rng);
    CHECK(c.pass);
    CHECK(c.phi <= c.spacing);
  }
  SUBCASE("m = 2 by quadrature") {
    const LandscapeFn f = two_well_preset(2);
    const FlatCheck c =
        check_flat_constraint(f, Vector{{-3.0, -3.0}}, 0.25, 0.6, 13, quadrature(60), rng);
    CHECK(c.pass);
  }
  SUBCASE("a = 0 gives w_f") {
    const LandscapeFn f = two_well_preset(1);
    const FlatCheck c = check_flat_constraint(f, Vector{{-3.0}}, 0.0, 0.5, 21, quadrature(10), rng);
    CHECK(c.phi == 0.0);
  }
  SUBCASE("skewed well is reported, not asserted") {
    const LandscapeFn f = make_skewed_well(1, 0.3, 1.0);
    const FlatCheck c = check_flat_constraint(f, Vector{{0.0}}, 0.5, 1.0, 41, quadrature(400), rng);
    MESSAGE("skewed well: phi = " << c.phi << ", spacing = " << c.spacing);
    CHECK(c.spacing > 0.0);
  }
}

TEST_CASE("sharp constraint") {
  const Rng rng(5);
  SUBCASE("m = 10 preset passes with eps = 0.9 a") {
    const LandscapeFn f = two_well_preset(10);
    const SharpCheck c = check_sharp_constraint(f, Vector::Constant(10, 3.0), Vector::Constant(10, -3.0),
                                                0.3, 0.27, 0.5, monte_carlo(10000), rng);
    CHECK(c.pass);
    const LandscapeFn f1 = two_well_preset(1);
    const SharpCheck c1 = check_sharp_constraint(f1, Vector{{3.0}}, Vector{{-3.0}}, 0.3, 0.27, 0.5,
                                                 monte_carlo(10000), rng);
    CHECK(c.margin() > c1.margin());
  }
  SUBCASE("a = 0 fails") {
    const LandscapeFn f = two_well_preset(1);
    const SharpCheck c =
        check_sharp_constraint(f, Vector{{3.0}}, Vector{{-3.0}}, 0.0, 0.01, 0.5, quadrature(10), rng);
    CHECK_FALSE(c.pass);
  }
}

TEST_CASE("lower bound") {
  const Rng rng(7);
  SUBCASE("m = 1, eps' = a / 2 by quadrature") {
    const LandscapeFn f = two_well_preset(1);
    const LowerBoundCheck c = check_lower_bound(f, Vector{{3.0}}, 0.3, 0.15, quadrature(2000), rng);
    CHECK(c.pass);
    CHECK(c.ratio_power == 0.5);
    CHECK(c.lhs >= c.bound - 1e-9);
  }
  SUBCASE("eps' -> 0 reduces to C(w_s)") {
    const LandscapeFn f = two_well_preset(1);
    const LowerBoundCheck c = check_lower_bound(f, Vector{{3.0}}, 0.3, 1e-9, quadrature(2000), rng);
    CHECK(c.pass);
    CHECK(c.bound == doctest::Approx(f(Vector{{3.0}})).scale(1.0).epsilon(1e-6));
  }
  SUBCASE("bound arithmetic at m = 10, eps'/a = 0.9") {
    const LandscapeFn f = two_well_preset(10);
    const LowerBoundCheck c =
        check_lower_bound(f, Vector::Constant(10, 3.0), 0.3, 0.27, monte_carlo(4000), rng);
    CHECK(c.ratio_power == doctest::Approx(0.3486784401).epsilon(1e-12));
    CHECK(c.bound == doctest::Approx((1 - c.ratio_power) * c.box_max + c.ratio_power * c.center_value)
                         .epsilon(1e-14));
    CHECK(c.pass);
  }
}

TEST_CASE("sensitivity metric") {
  const Rng rng(9);
  const std::vector<double> grid{0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
  CHECK(sensitivity_metric(make_quadratic(1), Vector{{0.0}}, grid, quadrature(2000), rng) ==
        doctest::Approx(0.1).epsilon(1e-6));
  CHECK(sensitivity_metric([](double a) { return a * a / 3.0; }, grid) ==
        doctest::Approx(0.1).epsilon(1e-12));
  CHECK(sensitivity_metric(make_constant(2, 4.0), Vector::Zero(2), grid, monte_carlo(100), rng) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  const LandscapeFn f = two_well_preset(1);
  const double s_sharp = sensitivity_metric(f, Vector{{3.0}}, grid, quadrature(400), rng);
  const double s_flat = sensitivity_metric(f, Vector{{-3.0}}, grid, quadrature(400), rng);
  CHECK(s_sharp > s_flat);
  const std::vector<double> bad{0.1, 0.2};
  CHECK_THROWS_AS(sensitivity_metric(f, Vector{{3.0}}, bad, quadrature(10), rng), Error);
  const std::vector<double> unordered{0.0, 0.2, 0.1};
  CHECK_THROWS_AS(sensitivity_metric(f, Vector{{3.0}}, unordered, quadrature(10), rng), Error);
}

TEST_CASE("sweep csv") {
  const std::vector<double> grid{0.0, 0.1};
  const auto pts = sweep_smoothed(make_quadratic(1), Vector{{0.0}}, grid, quadrature(100), Rng(1));
  std::ostringstream out;
  write_sweep_csv(out, pts);
  const std::string s = out.str();
  CHECK(s.rfind("a,value,stderr,method\n0,0,", 0) == 0);
  CHECK(s.find("quadrature") != std::string::npos);
}
