#include <algorithm>
#include <cmath>

#include "dense_oracle.hpp"
#include "doctest.h"
#include "kronsketch/errors.hpp"
#include "kronsketch/spectral.hpp"

using namespace kronsketch;
using oracle::Mat;
using oracle::Vec;

namespace {

// Cyclic Jacobi rotations; independent of Eigen's solvers.
std::vector<double> jacobi_eigenvalues(Mat a) {
  const auto n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

LinearOperator dense_operator(const Mat& m) {
  return [m](std::span<const double> v) { return oracle::to_std(m * oracle::to_vec(v)); };
}

Mat random_symmetric(std::size_t n, std::mt19937_64& rng) {
  Mat a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = oracle::gaussian(1, rng)[0];
  return (a + a.transpose()) / 2;
}

SketchSpec spec_for(Algorithm a, std::size_t n, std::size_t d, std::uint64_t seed) {
  SketchSpec s;
  s.algorithm = a;
  s.n = n;
  s.d = d;
  s.seed = seed;
  return s;
}

double mean_top10_mae(std::size_t d, std::uint64_t seeds) {
  EigenExperiment e;
  auto q = std::make_shared<QuadraticOracle>(make_eigen_oracle(e));
  const auto truth = q->eigenvalues_descending();
  double acc = 0;
  for (std::uint64_t seed = 0; seed < seeds; ++seed)
    acc += run_eigen_experiment(e, q, truth, spec_for(Algorithm::affd, e.n, d, seed)).mae;
  return acc / static_cast<double>(seeds);
}

}  // namespace

TEST_CASE("ritz_from_hessenberg examples") {
  Mat d = Mat::Zero(3, 3);
  d.diagonal() << 3, 1, 2;
  CHECK(ritz_from_hessenberg(d) == std::vector<double>{3, 2, 1});
  Mat two(2, 2);
  two << 2, 1, 1, 2;
  const auto r = ritz_from_hessenberg(two);
  CHECK(r[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(r[1] == doctest::Approx(1.0).epsilon(1e-14));

  std::mt19937_64 rng(1);
  const Mat a = random_symmetric(16, rng);
  const auto ev = ritz_from_hessenberg(a);
  const auto jv = jacobi_eigenvalues(a);
  for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(ev[i] - jv[i]) <= 1e-10);

  // Non-symmetric upper Hessenberg with a known real spectrum.
  Mat u(2, 2);
  u << 4, 7, 0, -1;
  const auto ru = ritz_from_hessenberg(u);
  CHECK(ru[0] == doctest::Approx(4.0));
  CHECK(ru[1] == doctest::Approx(-1.0));

  d(1, 1) = NAN;
  CHECK_THROWS_AS(ritz_from_hessenberg(d), NumericError);
  CHECK_THROWS_AS(ritz_from_hessenberg(Mat::Zero(2, 3)), InvalidArgument);
}

TEST_CASE("identity operator breaks down after one step") {
  const auto id = [](std::span<const double> v) { return std::vector<double>(v.begin(), v.end()); };
  const auto r = arnoldi(id, 64, 10, 3);
  CHECK(r.m == 1);
  CHECK(r.breakdown);
  CHECK(std::abs(r.ritz_values.at(0) - 1.0) <= 1e-8);

  // Same through the sketched path: A = I under an orthogonal square sketch.
  auto q = std::make_shared<QuadraticOracle>(QuadraticOracle::diagonal(std::vector<double>(64, 1.0), {}));
  SketchedOperator op(Sketcher(spec_for(Algorithm::qk, 64, 64, 2)), q, std::vector<double>(64, 0.0));
  const auto rs = arnoldi(op, 8, 3);
  CHECK(rs.m == 1);
  for (double v : rs.ritz_values) CHECK(std::abs(v - 1.0) <= 1e-8);
}

TEST_CASE("Krylov invariants: orthonormality, Hessenberg relation, monotone top Ritz value") {
  std::mt19937_64 rng(2);
  for (std::size_t n : {32, 200}) {
    const Mat a = random_symmetric(n, rng);
    const auto op = dense_operator(a);
    const std::size_t m = std::min<std::size_t>(n, 60);
    const auto r = arnoldi(op, n, m, 5);
    REQUIRE(r.m == m);
    CHECK(r.basis.rows() == static_cast<Eigen::Index>(n));
    CHECK(r.hessenberg.rows() == static_cast<Eigen::Index>(m + 1));
    const Mat gram = r.basis.transpose() * r.basis;
    CHECK((gram - Mat::Identity(m, m)).cwiseAbs().maxCoeff() <= 1e-8);
    for (std::size_t j = 0; j < m; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const Vec image = a * r.basis.col(jj);
      const Vec inside = r.basis.leftCols(jj + 1) * r.hessenberg.col(jj).head(jj + 1);
      const Vec residual = image - inside;
      CHECK(std::abs(residual.norm() - r.hessenberg(jj + 1, jj)) <= 1e-8 * image.norm());
    }
    double prev = -INFINITY;
    for (std::size_t k = 1; k <= r.m; ++k) {
      const auto ev = ritz_from_hessenberg(r.hessenberg.topLeftCorner(k, k));
      CHECK(ev[0] >= prev - 1e-10);
      prev = ev[0];
    }
  }
}

TEST_CASE("orthonormality holds at 512 iterations") {
  std::mt19937_64 rng(3);
  const std::size_t n = 1024;
  auto q = std::make_shared<QuadraticOracle>(
      QuadraticOracle::kron_haar(planted_spectrum(n, std::vector<double>{10, 9, 8}, 1.0, 1.0), {}, 4, 32));
  SketchedOperator op(Sketcher(spec_for(Algorithm::affd, n, 512, 4)), q, std::vector<double>(n, 0.0));
  const auto r = arnoldi(op, 512, 1);
  const Mat gram = r.basis.transpose() * r.basis;
  CHECK((gram - Mat::Identity(r.basis.cols(), r.basis.cols())).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("full-rank run recovers the exact spectrum") {
  std::mt19937_64 rng(4);
  const Mat a = random_symmetric(24, rng);
  const auto r = arnoldi(dense_operator(a), 24, 24, 9);
  REQUIRE(r.m == 24);
  const auto exact = jacobi_eigenvalues(a);
  for (std::size_t i = 0; i < 24; ++i) CHECK(std::abs(r.ritz_values[i] - exact[i]) <= 1e-8);

  // Materialized sketched operator Phi A Phi^T.
  const std::size_t n = 256, d = 32;
  auto q = std::make_shared<QuadraticOracle>(
      QuadraticOracle::kron_haar(planted_spectrum(n, std::vector<double>{6, 5}, 1.0, 1.0), {}, 3, 16));
  Sketcher s(spec_for(Algorithm::affd, n, d, 8));
  const Mat phi = oracle::materialize(s);
  Mat dense_a(n, n);
  std::vector<double> e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    dense_a.col(static_cast<Eigen::Index>(j)) = oracle::to_vec(q->apply(e));
    e[j] = 0.0;
  }
  const auto expected = jacobi_eigenvalues(phi * dense_a * phi.transpose());
  SketchedOperator op(s, q, std::vector<double>(n, 0.0));
  const auto rs = arnoldi(op, d, 2);
  REQUIRE(rs.m == d);
  for (std::size_t i = 0; i < d; ++i) CHECK(std::abs(rs.ritz_values[i] - expected[i]) <= 1e-8 * expected[0]);
}

TEST_CASE("arnoldi errors") {
  const auto id = [](std::span<const double> v) { return std::vector<double>(v.begin(), v.end()); };
  CHECK_THROWS_AS(arnoldi(id, 8, 9, 0), InvalidArgument);
  CHECK_THROWS_AS(arnoldi(id, 8, 0, 0), InvalidArgument);
  int calls = 0;
  const auto poison = [&calls](std::span<const double> v) {
    std::vector<double> out(v.begin(), v.end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= static_cast<double>(i + 1);
    if (++calls == 3) out[1] = NAN;
    return out;
  };
  try {
    arnoldi(poison, 8, 6, 0);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.iteration() == 2);
  }
}

TEST_CASE("relative_mae examples") {
  const std::vector<double> t = {10, -4, 2};
  CHECK(relative_mae(t, t) == 0.0);
  const std::vector<double> e = {11, -4.4, 2.2};
  CHECK(relative_mae(e, t) == doctest::Approx(0.1));
  CHECK_THROWS_AS(relative_mae(std::vector<double>{1, 1}, std::vector<double>{1, 0}), InvalidArgument);
  CHECK_THROWS_AS(relative_mae(std::vector<double>{1}, std::vector<double>{1, 2}), InvalidArgument);
}

TEST_CASE("spectrum_report examples") {
  const auto r = spectrum_report(std::vector<double>{10, 3, 1, -2}, 10);
  REQUIRE(r.rneg);
  CHECK(*r.rneg == doctest::Approx(0.2));
  CHECK(r.outliers == 1);
  CHECK(r.top_positive == std::vector<double>{10, 3, 1});
  CHECK(*r.top_negative == -2);

  CHECK(spectrum_report(std::vector<double>(7, 2.5), 3).outliers == 6);
  const auto no_neg = spectrum_report(std::vector<double>{4, 1}, 3);
  CHECK(*no_neg.rneg == 0.0);
  CHECK_FALSE(no_neg.top_negative);
  const auto undefined = spectrum_report(std::vector<double>{-1, -3}, 3);
  CHECK_FALSE(undefined.rneg);
  CHECK(*undefined.top_negative == -3);
  CHECK_THROWS_AS(spectrum_report(std::vector<double>{1}, 1, 1.0), InvalidArgument);

  // Planted outliers {10, 9, 8} over a power law with c=1: the count is the
  // two trailing outliers plus power-law terms above 2.
  const auto planted = planted_spectrum(1024, std::vector<double>{10, 9, 8}, 1.0, 2.0);
  CHECK(spectrum_report(planted, 10).outliers == 2);
}

TEST_CASE("sketched spectrum: error shrinks with D") {
  const double m8 = mean_top10_mae(1u << 8, 6);
  const double m10 = mean_top10_mae(1u << 10, 6);
  const double m12 = mean_top10_mae(1u << 12, 6);
  MESSAGE("mean top-10 relative MAE: D=2^8 " << m8 << ", 2^10 " << m10 << ", 2^12 " << m12);
  CHECK(m8 >= m10);
  CHECK(m10 >= m12);
  CHECK(m10 <= 0.06);
}

TEST_CASE("eigen experiment row") {
  EigenExperiment e;
  e.n = 512;
  e.basis_block = 64;
  auto q = std::make_shared<QuadraticOracle>(make_eigen_oracle(e));
  const auto truth = q->eigenvalues_descending();
  const auto row = run_eigen_experiment(e, q, truth, spec_for(Algorithm::qk, 512, 512, 3));
  // Square QK is orthogonal, so only Arnoldi convergence separates the values.
  CHECK(row.mae <= 1e-6);
  CHECK(row.report.outliers == 2);
  CHECK_THROWS_AS(run_eigen_experiment(e, q, truth, spec_for(Algorithm::qk, 256, 64, 3)), InvalidArgument);
}

TEST_CASE("JSON layout and Ritz alignment") {
  const std::size_t n = 256;
  auto q = std::make_shared<QuadraticOracle>(
      QuadraticOracle::kron_haar(planted_spectrum(n, std::vector<double>{9, 7}, 1.0, 2.0), {}, 2, 16));
  const auto spec = spec_for(Algorithm::qk, n, n, 1);
  SketchedOperator op(Sketcher(spec), q, std::vector<double>(n, 0.0));
  const auto r = arnoldi(op, 40, 7);
  const auto rep = spectrum_report(r.ritz_values, 10);
  const auto j = spectrum_json(r, rep, spec, 7);
  for (const char* key : {"ritz", "rneg", "outliers", "m", "d", "algorithm", "seed"}) CHECK(j.contains(key));
  CHECK(j["algorithm"] == "qk");
  CHECK(j["ritz"].size() == r.m);

  // The top Ritz vector of a square orthogonal sketch of A is the sketched top
  // eigenvector; A times it aligns almost entirely with it.
  const Mat t = r.hessenberg.topRows(static_cast<Eigen::Index>(r.m));
  Eigen::SelfAdjointEigenSolver<Mat> es((t + t.transpose()) / 2);
  const Vec top = r.basis * es.eigenvectors().col(es.eigenvectors().cols() - 1);
  const auto image = apply_sketched_operator(op, oracle::to_std(top));
  CHECK(ritz_alignment(r, image, 1) >= 1 - 1e-6);
  CHECK(ritz_alignment(r, image, 3) >= ritz_alignment(r, image, 1) - 1e-12);
  CHECK_THROWS_AS(ritz_alignment(r, image, 0), InvalidArgument);
}
