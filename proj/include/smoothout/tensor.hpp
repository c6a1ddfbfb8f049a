#pragma once

// Dense arrays, the counter-based generator and the handful of reductions
// everything else builds on. All storage is row-major f64.

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "smoothout/error.hpp"

namespace smoothout {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<Index> shape);
  Tensor(std::vector<Index> shape, Vector data);

  const std::vector<Index>& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.size() == 0; }

  const Vector& data() const noexcept { return data_; }
  Vector& data() noexcept { return data_; }
  double operator[](Index i) const { return data_[i]; }
  double& operator[](Index i) { return data_[i]; }

  /// Rows = leading dimension, columns = product of the trailing ones.
  Eigen::Map<const RowMatrix> rows() const;
  Eigen::Map<RowMatrix> rows();

  static Index element_count(const std::vector<Index>& shape);

 private:
  std::vector<Index> shape_{0};
  Vector data_;
};

/// Philox4x32-10 counter-based generator.
///
/// The 64-bit seed is the Philox key. The 128-bit counter is split into a
/// 64-bit block index (low half) and a 64-bit stream id (high half). Each
/// block yields four 32-bit words. `substream(tag)` keeps the key and derives
/// a new stream id as splitmix64(stream ^ splitmix64(tag)), which gives every
/// Monte-Carlo sample or purpose its own independent, order-free sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
      : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on (0, 1), never returns 0.
  double uniform_open() noexcept;
  /// Standard normal via Box-Muller (cosine branch, one normal per two uniforms).
  double normal() noexcept;
  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

  Rng substream(std::uint64_t tag) const noexcept;
  Rng substream(std::string_view tag) const noexcept;

  static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> counter,
                                             std::array<std::uint32_t, 2> key) noexcept;

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a(std::string_view text) noexcept;

Tensor uniform_sample(Rng& rng, double lo, double hi, Index n);
Tensor gaussian_sample(Rng& rng, double mean, double stddev, Index n);

template <typename Derived>
double l2_norm(const Eigen::MatrixBase<Derived>& v) {
  return v.size() == 0 ? 0.0 : v.norm();
}

inline double l2_norm(const Tensor& t) { return l2_norm(t.data()); }

/// Digest of the raw bit pattern of a vector; used to detect mutation.
std::uint64_t bit_digest(const Eigen::Ref<const Vector>& v) noexcept;

bool bit_equal(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) noexcept;

}  // namespace smoothout
