#include "smoothout/tensor.hpp"

#include <bit>
#include <cstring>
#include <numbers>

namespace smoothout {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_range: return "invalid-range";
    case ErrorKind::invalid_stddev: return "invalid-stddev";
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::shape_mismatch: return "shape-mismatch";
    case ErrorKind::length_mismatch: return "length-mismatch";
    case ErrorKind::stale_record: return "stale-record";
    case ErrorKind::invalid_geometry: return "invalid-geometry";
    case ErrorKind::dimension_too_high: return "dimension-too-high";
    case ErrorKind::bad_magic: return "bad-magic";
    case ErrorKind::truncated_file: return "truncated-file";
    case ErrorKind::count_mismatch: return "count-mismatch";
    case ErrorKind::io: return "io";
    case ErrorKind::config: return "config";
    case ErrorKind::numeric: return "numeric";
  }
  return "unknown";
}

Index Tensor::element_count(const std::vector<Index>& shape) {
  Index n = 1;
  for (Index d : shape) {
    require(d >= 0, ErrorKind::shape_mismatch, "negative dimension");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<Index> shape) : shape_(std::move(shape)) {
  data_ = Vector::Zero(element_count(shape_));
}

Tensor::Tensor(std::vector<Index> shape, Vector data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(element_count(shape_) == data_.size(), ErrorKind::shape_mismatch,
          "data length does not match shape");
}

Eigen::Map<const RowMatrix> Tensor::rows() const {
  const Index r = shape_.empty() ? 1 : shape_.front();
  const Index c = r == 0 ? 0 : data_.size() / r;
  return {data_.data(), r, c};
}

Eigen::Map<RowMatrix> Tensor::rows() {
  const Index r = shape_.empty() ? 1 : shape_.front();
  const Index c = r == 0 ? 0 : data_.size() / r;
  return {data_.data(), r, c};
}

// Philox4x32-10 (Salmon et al., SC'11), reference constants.
std::array<std::uint32_t, 4> Rng::philox(std::array<std::uint32_t, 4> ctr,
                                         std::array<std::uint32_t, 2> key) noexcept {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

void Rng::refill() noexcept {
  const std::array<std::uint32_t, 4> counter{
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_),
                                         static_cast<std::uint32_t>(seed_ >> 32)};
  buffer_ = philox(counter, key);
  ++block_;
  used_ = 0;
}

std::uint32_t Rng::next_u32() noexcept {
  if (used_ == 4) refill();
  return buffer_[static_cast<std::size_t>(used_++)];
}

std::uint64_t Rng::next_u64() noexcept {
  const std::uint64_t hi = next_u32();
  const std::uint64_t lo = next_u32();
  return (hi << 32) | lo;
}

double Rng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open() noexcept {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() noexcept {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  // Rejection on the top of the range keeps the result unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

Rng Rng::substream(std::uint64_t tag) const noexcept {
  return Rng(seed_, splitmix64(stream_ ^ splitmix64(tag)));
}

Rng Rng::substream(std::string_view tag) const noexcept { return substream(fnv1a(tag)); }

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

Tensor uniform_sample(Rng& rng, double lo, double hi, Index n) {
  require(lo < hi, ErrorKind::invalid_range, "uniform_sample requires lo < hi");
  require(n >= 0, ErrorKind::invalid_argument, "negative sample count");
  Vector out(n);
  const double width = hi - lo;
  for (Index i = 0; i < n; ++i) out[i] = lo + width * rng.uniform();
  return Tensor({n}, std::move(out));
}

Tensor gaussian_sample(Rng& rng, double mean, double stddev, Index n) {
  require(stddev >= 0.0, ErrorKind::invalid_stddev, "gaussian_sample requires stddev >= 0");
  require(n >= 0, ErrorKind::invalid_argument, "negative sample count");
  Vector out(n);
  for (Index i = 0; i < n; ++i) out[i] = mean + stddev * rng.normal();
  return Tensor({n}, std::move(out));
}

std::uint64_t bit_digest(const Eigen::Ref<const Vector>& v) noexcept {
  std::uint64_t h = 0x84222325CBF29CE4ull ^ static_cast<std::uint64_t>(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v[i]));
  }
  return h;
}

bool bit_equal(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) noexcept {
  if (a.size() != b.size()) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

}  // namespace smoothout
