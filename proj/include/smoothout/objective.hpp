#pragma once

// Anything with trainable parameters, a batch loss and its gradient.

#include <concepts>
#include <span>

#include "smoothout/nn.hpp"

namespace smoothout {

template <typename T>
concept Objective = requires(T& obj, const T& cobj, const Batch& batch, Vector& grad) {
  { obj.params() } -> std::same_as<ParamVector&>;
  { cobj.loss(batch) } -> std::convertible_to<double>;
  { cobj.loss_and_grad(batch, grad) } -> std::convertible_to<double>;
};

/// C(w) = scale * ||w - center||^2, independent of the batch. A one-segment
/// stand-in "network" for checks with closed-form answers.
class QuadraticObjective {
 public:
  QuadraticObjective(Vector w, double scale = 1.0, Vector center = {});

  ParamVector& params() noexcept { return params_; }
  const ParamVector& params() const noexcept { return params_; }
  double loss(const Batch&) const;
  double loss_and_grad(const Batch&, Vector& grad) const;

 private:
  ParamVector params_;
  double scale_;
  Vector center_;
};

/// Sample-weighted mean loss over a sequence of batches.
template <Objective Obj>
double dataset_loss(const Obj& obj, std::span<const Batch> data) {
  double sum = 0.0;
  Index n = 0;
  for (const Batch& b : data) {
    sum += obj.loss(b) * static_cast<double>(b.count());
    n += b.count();
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

template <Objective Obj>
double dataset_loss_and_grad(const Obj& obj, std::span<const Batch> data, Vector& grad) {
  double sum = 0.0;
  Index n = 0;
  Vector g;
  grad.setZero(obj.params().size());
  for (const Batch& b : data) {
    const auto w = static_cast<double>(b.count());
    sum += obj.loss_and_grad(b, g) * w;
    grad += w * g;
    n += b.count();
  }
  if (n == 0) return 0.0;
  grad /= static_cast<double>(n);
  return sum / static_cast<double>(n);
}

/// A single empty batch, for objectives that ignore their data.
Batch empty_batch();

}  // namespace smoothout
