#pragma once

// Noise sources and the perturb / denoise pair around each gradient step.

#include <cstdint>
#include <string>

#include "smoothout/nn.hpp"

namespace smoothout {

enum class NoiseFamily { uniform, gaussian, dropout_bernoulli };
enum class NoiseGrouping { global, per_filter_neuron };

/// `strength` is the half-range for uniform noise, the standard deviation for
/// gaussian noise and the drop probability for dropout-bernoulli.
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::uniform;
  double strength = 0.0;
  bool adaptive = false;
  NoiseGrouping grouping = NoiseGrouping::global;

  void validate() const;

  static NoiseSpec uniform(double a) { return {NoiseFamily::uniform, a, false, NoiseGrouping::global}; }
  static NoiseSpec gaussian(double a) { return {NoiseFamily::gaussian, a, false, NoiseGrouping::global}; }
  static NoiseSpec dropout(double p) {
    return {NoiseFamily::dropout_bernoulli, p, false, NoiseGrouping::global};
  }
  static NoiseSpec adaptive_uniform(double a) {
    return {NoiseFamily::uniform, a, true, NoiseGrouping::per_filter_neuron};
  }
  static NoiseSpec adaptive_gaussian(double a) {
    return {NoiseFamily::gaussian, a, true, NoiseGrouping::per_filter_neuron};
  }
};

std::string to_string(NoiseFamily family);
NoiseFamily parse_noise_family(const std::string& name);

/// Raw (unadapted) noise of length m.
Vector sample_noise(const NoiseSpec& spec, const ParamVector& params, Rng& rng);

/// Rescales each filter / neuron group to norm `spec.strength * ||w_group||`.
/// Bias entries are returned unchanged. Groups whose noise or weights have
/// zero norm come back as zeros.
Vector adapt_noise(const Vector& theta, const ParamVector& params, const NoiseSpec& spec);

/// sample_noise followed by adapt_noise when the spec asks for it.
Vector draw_noise(const NoiseSpec& spec, const ParamVector& params, Rng& rng);

class PerturbationRecord {
 public:
  const Vector& theta() const noexcept { return theta_; }
  const Vector& snapshot() const noexcept { return snapshot_; }
  bool consumed() const noexcept { return consumed_; }

 private:
  friend PerturbationRecord perturb(ParamVector& params, const Vector& theta);
  friend void denoise(ParamVector& params, PerturbationRecord& record);

  Vector theta_;
  Vector snapshot_;
  std::uint64_t perturbed_digest_ = 0;
  bool consumed_ = false;
};

/// params += theta; remembers the exact pre-perturbation values.
PerturbationRecord perturb(ParamVector& params, const Vector& theta);

/// Restores the snapshot bit-exactly. Throws stale_record if the parameters
/// changed since `perturb` or the record was already used.
void denoise(ParamVector& params, PerturbationRecord& record);

}  // namespace smoothout
