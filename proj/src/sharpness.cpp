#include "smoothout/sharpness.hpp"

#include <cstdio>
#include <ostream>

#include <json.hpp>

#include "smoothout/landscape.hpp"

namespace smoothout {

Curve interpolate_losses(const Model& shape, const ParamVector& w_f, const ParamVector& w_s,
                         std::span<const double> alphas, std::span<const Batch> data) {
  require(shape.params().same_layout(w_f) && shape.params().same_layout(w_s),
          ErrorKind::shape_mismatch, "parameter vectors do not fit the model");
  Model model = shape;
  Curve curve;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    require(i == 0 || alphas[i] > alphas[i - 1], ErrorKind::invalid_argument,
            "alphas must be strictly increasing");
    const double alpha = alphas[i];
    model.params().values = alpha * w_s.values + (1.0 - alpha) * w_f.values;
    const EvalMetrics m = evaluate(model, data);
    curve.push_back({alpha, m.loss, m.accuracy});
  }
  return curve;
}

Vector filter_normalized_direction(const ParamVector& params, const Rng& rng) {
  Rng sub = rng.substream("filter-direction");
  Vector d = gaussian_sample(sub, 0.0, 1.0, params.size()).data();
  auto rescale = [&](const ParamGroup& g) {
    auto dg = d.segment(g.offset, g.size);
    const double wn = l2_norm(params.values.segment(g.offset, g.size));
    const double dn = l2_norm(dg);
    if (wn == 0.0 || dn == 0.0) {
      dg.setZero();
    } else {
      dg *= wn / dn;
    }
  };
  for (const ParamGroup& g : params.filter_groups()) rescale(g);
  for (const ParamGroup& g : params.bias_groups()) rescale(g);
  return d;
}

Curve loss_slice(const Model& model, const Vector& direction, double lo, double hi, Index points,
                 std::span<const Batch> data) {
  require(direction.size() == model.params().size(), ErrorKind::length_mismatch,
          "direction length does not match parameters");
  require(points >= 2 && hi > lo, ErrorKind::invalid_argument, "need points >= 2 and hi > lo");
  Model local = model;
  const Vector& base = model.params().values;
  Curve curve;
  for (Index k = 0; k < points; ++k) {
    const double t = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    local.params().values = base + t * direction;
    const EvalMetrics m = evaluate(local, data);
    curve.push_back({t, m.loss, m.accuracy});
  }
  return curve;
}

double model_sensitivity(const Model& model, std::span<const Batch> data,
                         std::span<const double> a_grid, NoiseFamily family, const Rng& rng) {
  Model local = model;
  const auto passes = static_cast<Index>(data.size());
  return sensitivity_metric(
      [&](double a) {
        const NoiseSpec spec{family, a, false, NoiseGrouping::global};
        return estimate_smoothed_loss_stochastic(local, data, spec, passes, rng).mean;
      },
      a_grid);
}

void write_curve_csv(std::ostream& out, const Curve& curve) {
  out << "abscissa,loss,accuracy\n";
  char buf[128];
  for (const CurvePoint& p : curve) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.abscissa, p.loss, p.accuracy);
    out << buf;
  }
}

std::string report_to_json(const SharpnessReport& report, int indent) {
  nlohmann::ordered_json j;
  j["keskar_sharpness"] = report.keskar_sharpness;
  j["per_run"] = report.per_run;
  j["per_run_max_loss"] = report.per_run_max_loss;
  j["base_loss"] = report.base_loss;
  if (std::isnan(report.sensitivity_slope)) {
    j["sensitivity_slope"] = nullptr;
  } else {
    j["sensitivity_slope"] = report.sensitivity_slope;
  }
  nlohmann::ordered_json curves = nlohmann::ordered_json::object();
  for (const auto& [name, curve] : report.curves) {
    nlohmann::ordered_json c = nlohmann::ordered_json::array();
    for (const CurvePoint& p : curve) {
      c.push_back({{"abscissa", p.abscissa}, {"loss", p.loss}, {"accuracy", p.accuracy}});
    }
    curves[name] = std::move(c);
  }
  j["curves"] = std::move(curves);
  j["metadata"] = {{"epsilon", report.epsilon},
                   {"runs", report.runs},
                   {"seed", report.seed},
                   {"split", report.split}};
  return j.dump(indent);
}

}  // namespace smoothout
