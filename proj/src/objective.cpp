#include "smoothout/objective.hpp"

namespace smoothout {

QuadraticObjective::QuadraticObjective(Vector w, double scale, Vector center)
    : scale_(scale), center_(std::move(center)) {
  const auto m = static_cast<std::uint32_t>(w.size());
  params_ = ParamVector({Segment{0, ParamRole::weight, {1, m}}}, std::move(w));
  if (center_.size() == 0) center_ = Vector::Zero(params_.size());
  require(center_.size() == params_.size(), ErrorKind::length_mismatch,
          "center length does not match parameters");
}

double QuadraticObjective::loss(const Batch&) const {
  return scale_ * (params_.values - center_).squaredNorm();
}

double QuadraticObjective::loss_and_grad(const Batch& batch, Vector& grad) const {
  grad = 2.0 * scale_ * (params_.values - center_);
  return loss(batch);
}

Batch empty_batch() {
  Batch b;
  b.inputs = Tensor({1, 1});
  b.labels = {0};
  return b;
}

}  // namespace smoothout
