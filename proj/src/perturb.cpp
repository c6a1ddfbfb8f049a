#include "smoothout/perturb.hpp"

namespace smoothout {

void NoiseSpec::validate() const {
  require(strength >= 0.0, ErrorKind::invalid_argument, "noise strength must be >= 0");
  if (family == NoiseFamily::dropout_bernoulli) {
    require(strength <= 1.0, ErrorKind::invalid_argument, "drop probability must lie in [0, 1]");
    require(!adaptive, ErrorKind::invalid_argument, "dropout-bernoulli noise cannot be adaptive");
  }
  if (adaptive) {
    require(grouping == NoiseGrouping::per_filter_neuron, ErrorKind::invalid_argument,
            "adaptive noise requires per-filter-neuron grouping");
  }
}

std::string to_string(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::uniform: return "uniform";
    case NoiseFamily::gaussian: return "gaussian";
    case NoiseFamily::dropout_bernoulli: return "dropout-bernoulli";
  }
  return "unknown";
}

NoiseFamily parse_noise_family(const std::string& name) {
  if (name == "uniform") return NoiseFamily::uniform;
  if (name == "gaussian") return NoiseFamily::gaussian;
  if (name == "dropout-bernoulli" || name == "dropout") return NoiseFamily::dropout_bernoulli;
  throw Error(ErrorKind::config, "unknown noise family '" + name + "'");
}

Vector sample_noise(const NoiseSpec& spec, const ParamVector& params, Rng& rng) {
  spec.validate();
  const Index m = params.size();
  const double a = spec.strength;
  switch (spec.family) {
    case NoiseFamily::uniform:
      if (a == 0.0) return Vector::Zero(m);
      return uniform_sample(rng, -a, a, m).data();
    case NoiseFamily::gaussian:
      return gaussian_sample(rng, 0.0, a, m).data();
    case NoiseFamily::dropout_bernoulli: {
      Vector theta = Vector::Zero(m);
      for (Index i = 0; i < m; ++i) {
        if (rng.uniform() < a) theta[i] = -params.values[i];
      }
      return theta;
    }
  }
  return Vector::Zero(m);
}

Vector adapt_noise(const Vector& theta, const ParamVector& params, const NoiseSpec& spec) {
  require(theta.size() == params.size(), ErrorKind::length_mismatch,
          "noise length does not match parameters");
  require(spec.grouping == NoiseGrouping::per_filter_neuron, ErrorKind::invalid_argument,
          "adapt_noise requires per-filter-neuron grouping");
  Vector out = theta;
  for (const ParamGroup& g : params.filter_groups()) {
    auto noise = out.segment(g.offset, g.size);
    const double noise_norm = l2_norm(noise);
    const double weight_norm = l2_norm(params.values.segment(g.offset, g.size));
    if (noise_norm == 0.0 || weight_norm == 0.0) {
      noise.setZero();
    } else {
      noise *= spec.strength * weight_norm / noise_norm;
    }
  }
  return out;
}

Vector draw_noise(const NoiseSpec& spec, const ParamVector& params, Rng& rng) {
  Vector theta = sample_noise(spec, params, rng);
  if (spec.adaptive) theta = adapt_noise(theta, params, spec);
  return theta;
}

PerturbationRecord perturb(ParamVector& params, const Vector& theta) {
  require(theta.size() == params.size(), ErrorKind::length_mismatch,
          "noise length does not match parameters");
  PerturbationRecord rec;
  rec.theta_ = theta;
  rec.snapshot_ = params.values;
  params.values += theta;
  rec.perturbed_digest_ = bit_digest(params.values);
  return rec;
}

void denoise(ParamVector& params, PerturbationRecord& record) {
  require(!record.consumed_, ErrorKind::stale_record, "perturbation already denoised");
  require(params.size() == record.snapshot_.size() &&
              bit_digest(params.values) == record.perturbed_digest_,
          ErrorKind::stale_record, "parameters changed since perturb");
  params.values = record.snapshot_;
  record.consumed_ = true;
}

}  // namespace smoothout
