#include <algorithm>
#include <chrono>
#include <cmath>

#include "dense_oracle.hpp"
#include "doctest.h"
#include "kronsketch/errors.hpp"
#include "kronsketch/kron.hpp"

using namespace kronsketch;
using oracle::Mat;
using oracle::Vec;

namespace {

std::vector<KronFactor> hadamard_factors(std::vector<std::size_t> sizes, PermuteMode mode, std::uint64_t seed) {
  std::vector<KronFactor> out;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    Stream s(seed, StreamTag::hadamard_pre, k);
    out.emplace_back(HadamardFactor::sample(sizes[k], mode, s));
  }
  return out;
}

double apply_error(std::span<const KronFactor> factors, std::mt19937_64& rng) {
  const Mat m = oracle::materialize(factors);
  const auto x = oracle::gaussian(static_cast<std::size_t>(m.cols()), rng);
  const auto v = oracle::gaussian(static_cast<std::size_t>(m.rows()), rng);
  const auto y = kron_apply<double>(x, factors);
  const auto w = kron_apply_transpose<double>(v, factors);
  return std::max(oracle::rel_err(oracle::to_vec(y), m * oracle::to_vec(x)),
                  oracle::rel_err(oracle::to_vec(w), m.transpose() * oracle::to_vec(v)));
}

}  // namespace

TEST_CASE("compute_kron_shapes follows the greedy listing") {
  CHECK(compute_kron_shapes(1u << 15, 32) == std::vector<std::size_t>{32, 32, 32});
  CHECK(compute_kron_shapes(1u << 15, 1024) == std::vector<std::size_t>{32, 1024});
  CHECK(compute_kron_shapes(1, 32).empty());
  CHECK(compute_kron_shapes(1024, 1024) == std::vector<std::size_t>{1024});
  CHECK(compute_kron_shapes(1u << 20, 1024) == std::vector<std::size_t>{1024, 1024});
  CHECK_THROWS_AS(compute_kron_shapes(0, 32), InvalidArgument);
  CHECK_THROWS_AS(compute_kron_shapes(64, 24), InvalidArgument);
}

TEST_CASE("make_kron_shape fills rows from the trailing factor") {
  const auto s = make_kron_shape(1u << 15, 64, 1024);
  REQUIRE(s.factors.size() == 2);
  CHECK(s.cols() == std::vector<std::size_t>{32, 1024});
  CHECK(s.rows() == std::vector<std::size_t>{1, 64});
  CHECK(s.output_dim == 64);

  const auto t = make_kron_shape(1u << 15, 1u << 12, 1024);
  CHECK(t.rows() == std::vector<std::size_t>{4, 1024});

  const auto padded = make_kron_shape(1000, 8, 1024);
  CHECK(padded.padded_input_dim == 1024);

  CHECK_THROWS_AS(make_kron_shape(64, 0, 1024), InvalidArgument);
  CHECK_THROWS_AS(make_kron_shape(64, 128, 1024), InvalidArgument);
  CHECK_THROWS_AS(make_kron_shape(1u << 15, 1536, 1024), InvalidArgument);
}

TEST_CASE("kron_apply examples") {
  SUBCASE("identity factors") {
    std::vector<KronFactor> f;
    f.emplace_back(DenseFactor(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
    f.emplace_back(DenseFactor(2, 2, {1, 0, 0, 1}));
    const std::vector<double> x = {1, 2, 3, 4, 5, 6};
    CHECK(kron_apply<double>(x, f) == x);
  }
  SUBCASE("e0 through H2 x H2") {
    std::vector<KronFactor> f = {HadamardFactor(2), HadamardFactor(2)};
    const std::vector<double> e0 = {1, 0, 0, 0};
    const auto y = kron_apply<double>(e0, f);
    for (double v : y) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("three row-permuted H4 factors against the dense product") {
    std::mt19937_64 rng(1);
    const auto f = hadamard_factors({4, 4, 4}, PermuteMode::rows, 3);
    const Mat m = oracle::materialize(std::span<const KronFactor>(f));
    const auto x = oracle::gaussian(64, rng);
    const auto y = kron_apply<double>(x, f);
    CHECK(oracle::rel_err(oracle::to_vec(y), m * oracle::to_vec(x)) <= 1e-12);
  }
  SUBCASE("shape mismatch") {
    std::vector<KronFactor> f = {HadamardFactor(4)};
    const std::vector<double> x(5, 1.0);
    CHECK_THROWS_AS(kron_apply<double>(x, f), InvalidArgument);
    CHECK_THROWS_AS(kron_apply_transpose<double>(x, f), InvalidArgument);
  }
}

TEST_CASE("kron_apply matches dense materialization for every factor combination up to 2^10") {
  std::mt19937_64 rng(42);
  const std::vector<std::vector<std::size_t>> shapes = {{2}, {4, 8}, {8, 2, 4}, {32, 32}, {2, 2, 2, 2, 2}, {1024}, {16, 64}};
  std::uint64_t seed = 0;
  for (const auto& sizes : shapes) {
    for (auto mode : {PermuteMode::none, PermuteMode::rows, PermuteMode::cols}) {
      const auto f = hadamard_factors(sizes, mode, ++seed);
      CHECK(apply_error(f, rng) <= 1e-10);
    }
    // Mixed Hadamard and (possibly rectangular) Haar factors.
    std::vector<KronFactor> mixed;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      Stream s(++seed, StreamTag::orth_factor, k);
      if (k % 2 == 0)
        mixed.emplace_back(sample_haar_factor(std::max<std::size_t>(1, sizes[k] / 2), sizes[k], s));
      else
        mixed.emplace_back(HadamardFactor::sample(sizes[k], PermuteMode::cols, s));
    }
    CHECK(apply_error(mixed, rng) <= 1e-10);
  }
}

TEST_CASE("kron_apply_transpose is the adjoint and inverts square factors") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<KronFactor> f;
    Stream s(trial, StreamTag::orth_factor, 1);
    f.emplace_back(HadamardFactor::sample(16, PermuteMode::rows, s));
    f.emplace_back(sample_haar_factor(8, 8, s));
    f.emplace_back(HadamardFactor::sample(4, PermuteMode::cols, s));
    const auto x = oracle::gaussian(512, rng);
    const auto v = oracle::gaussian(512, rng);
    const auto fx = kron_apply<double>(x, f);
    const auto ftv = kron_apply_transpose<double>(v, f);
    const double lhs = oracle::dot(fx, v);
    const double rhs = oracle::dot(x, ftv);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * oracle::norm(x) * oracle::norm(v));
    CHECK(std::abs(oracle::norm(fx) - oracle::norm(x)) <= 1e-10 * oracle::norm(x));
    const auto back = kron_apply_transpose<double>(fx, f);
    CHECK(oracle::rel_err(oracle::to_vec(back), oracle::to_vec(x)) <= 1e-10);
  }
}

TEST_CASE("rectangular factors: apply after transpose is the identity on the row space") {
  std::mt19937_64 rng(8);
  Stream s(4);
  std::vector<KronFactor> f;
  f.emplace_back(sample_haar_factor(2, 4, s));
  f.emplace_back(sample_haar_factor(3, 8, s));
  const Mat m = oracle::materialize(std::span<const KronFactor>(f));
  const auto v = oracle::gaussian(6, rng);
  const auto x = oracle::gaussian(32, rng);
  // F F^T = I for orthonormal rows; F^T F is the projection onto the row space.
  const auto fft = kron_apply<double>(kron_apply_transpose<double>(v, f), f);
  CHECK(oracle::rel_err(oracle::to_vec(fft), oracle::to_vec(v)) <= 1e-10);
  const auto proj = kron_apply_transpose<double>(kron_apply<double>(x, f), f);
  const Vec expected = m.transpose() * (m * oracle::to_vec(x));
  CHECK(oracle::rel_err(oracle::to_vec(proj), expected) <= 1e-10);
}

TEST_CASE("permuted Hadamard products are exact isometries") {
  std::mt19937_64 rng(13);
  for (auto mode : {PermuteMode::none, PermuteMode::rows, PermuteMode::cols}) {
    const auto f = hadamard_factors({1024, 64}, mode, 99);
    const auto x = oracle::gaussian(1u << 16, rng);
    const auto y = kron_apply<double>(x, f);
    CHECK(std::abs(oracle::norm(y) - oracle::norm(x)) <= 1e-10 * oracle::norm(x));
  }
}

TEST_CASE("float application tracks double") {
  std::mt19937_64 rng(21);
  const auto f = hadamard_factors({32, 32}, PermuteMode::rows, 2);
  const auto x = oracle::gaussian(1024, rng);
  std::vector<float> xf(x.begin(), x.end());
  const auto y = kron_apply<double>(x, f);
  const auto yf = kron_apply<float>(xf, f);
  double err = 0;
  for (std::size_t i = 0; i < y.size(); ++i) err = std::max(err, std::abs(y[i] - yf[i]));
  CHECK(err <= 1e-4);
}

TEST_CASE("sample_haar_factor") {
  SUBCASE("square factors are orthogonal") {
    Stream s(1);
    for (std::size_t n : {1u, 2u, 5u, 16u, 64u}) {
      const Mat q = oracle::materialize(sample_haar_factor(n, n, s));
      CHECK((q * q.transpose() - Mat::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
  SUBCASE("row restriction keeps orthonormal rows") {
    Stream s(2);
    const Mat q = oracle::materialize(sample_haar_factor(2, 4, s));
    CHECK(q.rows() == 2);
    CHECK((q * q.transpose() - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("Haar symmetry: Q00 has mean zero") {
    Stream s(3);
    const int samples = 10000;
    double m1 = 0, m2 = 0;
    for (int i = 0; i < samples; ++i) {
      const double q = sample_haar_factor(4, 4, s)(0, 0);
      m1 += q;
      m2 += q * q;
    }
    m1 /= samples;
    const double sd = std::sqrt(m2 / samples - m1 * m1);
    CHECK(std::abs(m1) <= 3.0 * sd / std::sqrt(double(samples)));
    // E[Q00^2] = 1/n for a Haar matrix.
    CHECK(m2 / samples == doctest::Approx(0.25).epsilon(0.05));
  }
  SUBCASE("rows > cols is rejected") {
    Stream s(4);
    CHECK_THROWS_AS(sample_haar_factor(5, 4, s), InvalidArgument);
  }
}

TEST_CASE("Fourier preconditioner") {
  std::mt19937_64 rng(17);
  SUBCASE("e0 at N=4 is the first column of the materialized map") {
    const std::vector<double> e0 = {1, 0, 0, 0};
    const auto y = fourier_preconditioner_apply(e0);
    const Mat f = oracle::fourier(4);
    for (int i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(f(i, 0)).epsilon(1e-14));
    CHECK((f * f.transpose() - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("matches the explicit DFT packing, preserves norms, adjoint holds") {
    for (std::size_t n : {2u, 6u, 16u, 100u, 256u}) {
      CAPTURE(n);
      FourierPreconditioner p(n);
      const Mat f = oracle::fourier(n);
      const auto x = oracle::gaussian(n, rng);
      const auto v = oracle::gaussian(n, rng);
      std::vector<double> y(n), w(n);
      p.apply<double>(x, y);
      p.apply_transpose<double>(v, w);
      CHECK(oracle::rel_err(oracle::to_vec(y), f * oracle::to_vec(x)) <= 1e-10);
      CHECK(std::abs(oracle::norm(y) - oracle::norm(x)) <= 1e-10 * oracle::norm(x));
      CHECK(std::abs(oracle::dot(y, v) - oracle::dot(x, w)) <= 1e-10 * oracle::norm(x) * oracle::norm(v));
    }
  }
  SUBCASE("odd length is rejected") {
    const std::vector<double> x(5, 1.0);
    CHECK_THROWS_AS(fourier_preconditioner_apply(x), InvalidArgument);
  }
}

TEST_CASE("HadamardFactor validates its permutation") {
  CHECK_THROWS_AS(HadamardFactor(6), InvalidArgument);
  CHECK_THROWS_AS(HadamardFactor(4, PermuteMode::rows, {0, 1, 1, 3}), InvalidArgument);
  CHECK_THROWS_AS(HadamardFactor(4, PermuteMode::rows, {0, 1, 2}), InvalidArgument);
}

TEST_CASE("Hadamard kron_apply scales as N log N" * doctest::description("coarse timing")) {
  volatile double sink = 0;
  auto time_at = [&sink](std::size_t n) {
    const auto f = hadamard_factors(compute_kron_shapes(n, 1024), PermuteMode::rows, 1);
    std::vector<double> x(n, 1.0);
    std::vector<double> runs;
    for (int r = 0; r < 7; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      auto y = kron_apply<double>(x, f);
      const auto t1 = std::chrono::steady_clock::now();
      sink = sink + y[0];
      runs.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::nth_element(runs.begin(), runs.begin() + 3, runs.end());
    return runs[3];
  };
  double prev = time_at(1u << 14);
  for (std::size_t n = 1u << 15; n <= (1u << 20); n *= 2) {
    const double t = time_at(n);
    CAPTURE(n);
    CHECK(t < 3.0 * prev);
    prev = t;
  }
}
