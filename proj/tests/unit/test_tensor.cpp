#include <doctest.h>

#include <cmath>
#include <limits>

#include "smoothout/tensor.hpp"

using namespace smoothout;

namespace {

double ulp(double x) { return std::nextafter(std::abs(x), std::numeric_limits<double>::infinity()) - std::abs(x); }

}  // namespace

TEST_CASE("philox4x32-10 known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  using A2 = std::array<std::uint32_t, 2>;
  CHECK(Rng::philox(A4{0, 0, 0, 0}, A2{0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Rng::philox(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Rng::philox(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("uniform_sample") {
  SUBCASE("mean within the Monte-Carlo bound") {
    Rng rng(7);
    const Index n = 100000;
    const Tensor t = uniform_sample(rng, -1.0, 1.0, n);
    REQUIRE(t.size() == n);
    const double bound = 3.0 * (2.0 / std::sqrt(12.0 * n));
    CHECK(std::abs(t.data().mean()) < bound);
    CHECK(t.data().maxCoeff() < 1.0);
    CHECK(t.data().minCoeff() >= -1.0);
  }
  SUBCASE("empty") {
    Rng rng(3);
    CHECK(uniform_sample(rng, 0.0, 1.0, 0).empty());
  }
  SUBCASE("same seed, same stream") {
    Rng a(7), b(7);
    CHECK(bit_equal(uniform_sample(a, -1, 1, 1000).data(), uniform_sample(b, -1, 1, 1000).data()));
  }
  SUBCASE("invalid range") {
    Rng rng(1);
    CHECK_THROWS_AS(uniform_sample(rng, 1.0, 1.0, 3), Error);
    try {
      uniform_sample(rng, 2.0, 1.0, 3);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::invalid_range);
    }
  }
}

TEST_CASE("gaussian_sample") {
  const Index n = 100000;
  SUBCASE("unit variance within 5%") {
    Rng rng(7);
    const Vector x = gaussian_sample(rng, 0.0, 1.0, n).data();
    const double mean = x.mean();
    const double var = (x.array() - mean).square().sum() / (n - 1);
    CHECK(std::abs(var - 1.0) < 0.05);
  }
  SUBCASE("degenerate") {
    Rng rng(7);
    const Tensor t = gaussian_sample(rng, 0.0, 0.0, 5);
    CHECK(t.size() == 5);
    CHECK(t.data().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("shifted mean within the CLT bound") {
    Rng rng(7);
    const Vector x = gaussian_sample(rng, 3.0, 2.0, n).data();
    CHECK(std::abs(x.mean() - 3.0) < 3.0 * 2.0 / std::sqrt(double(n)));
  }
  SUBCASE("negative stddev") {
    Rng rng(7);
    try {
      gaussian_sample(rng, 0.0, -1.0, 2);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::invalid_stddev);
    }
  }
}

TEST_CASE("substreams are order independent") {
  const Rng root(11);
  Rng a = root.substream(5);
  Rng skip = root.substream(4);
  (void)skip.next_u64();
  Rng b = root.substream(5);
  CHECK(a.next_u64() == b.next_u64());
  CHECK(root.substream(5).next_u64() != root.substream(6).next_u64());
  CHECK(root.substream("noise").next_u64() != root.substream("epoch").next_u64());
}

TEST_CASE("below is in range and covers it") {
  Rng rng(2);
  std::array<int, 7> hits{};
  for (int i = 0; i < 7000; ++i) {
    const auto k = rng.below(7);
    REQUIRE(k < 7);
    ++hits[k];
  }
  for (int h : hits) CHECK(h > 800);
}

TEST_CASE("l2_norm") {
  CHECK(l2_norm(Tensor({2}, Vector{{3.0, 4.0}})) == 5.0);
  CHECK(l2_norm(Tensor({4})) == 0.0);
  CHECK(l2_norm(Tensor({0})) == 0.0);

  Rng rng(19);
  const Vector v = uniform_sample(rng, -10.0, 10.0, 100).data();
  double naive = 0.0;
  for (Index i = 0; i < v.size(); ++i) naive += v[i] * v[i];
  naive = std::sqrt(naive);
  CHECK(std::abs(l2_norm(v) - naive) <= 1e-12 * naive);
}

TEST_CASE("l2_norm is absolutely homogeneous (property)") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.below(64));
    const Vector v = gaussian_sample(rng, 0.0, 1.0, n).data();
    const double c = (rng.uniform() - 0.5) * std::pow(2.0, double(rng.below(20)) - 10.0);
    const double lhs = l2_norm(Vector(c * v));
    const double rhs = std::abs(c) * l2_norm(v);
    CHECK(std::abs(lhs - rhs) <= 4.0 * ulp(rhs));
  }
}

TEST_CASE("tensor shape invariant") {
  CHECK_THROWS_AS(Tensor({2, 3}, Vector::Zero(5)), Error);
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rows().rows() == 2);
  CHECK(t.rows().cols() == 3);
}
