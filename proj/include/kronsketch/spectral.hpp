#pragma once

// Arnoldi iteration with full re-orthogonalization and Ritz-value summaries.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "kronsketch/calculus.hpp"

namespace kronsketch {

using LinearOperator = std::function<std::vector<double>(std::span<const double>)>;

struct KrylovResult {
  Eigen::MatrixXd basis;        // D x m, orthonormal columns
  Eigen::MatrixXd hessenberg;   // (m + 1) x m
  Eigen::VectorXd next_vector;  // unit q_m (zero after breakdown)
  std::vector<double> ritz_values;  // descending
  std::size_t m = 0;
  bool breakdown = false;
};

/// Relative breakdown threshold: iteration stops once the new residual is at
/// most this fraction of |op(q_j)|.
inline constexpr double kBreakdownTolerance = 1e-12;

/// Arnoldi with two-pass modified Gram-Schmidt from a unit Gaussian start
/// vector drawn from (seed, start_vector). Stops early on breakdown.
KrylovResult arnoldi(const LinearOperator& op, std::size_t dim, std::size_t m, std::uint64_t seed);
KrylovResult arnoldi(const SketchedOperator& op, std::size_t m, std::uint64_t seed);

/// Eigenvalues of a square Hessenberg block, descending. Symmetric blocks
/// (to 1e-8 relative) use a symmetric solver; otherwise the real parts of the
/// general eigenvalues are returned.
std::vector<double> ritz_from_hessenberg(const Eigen::MatrixXd& block);

/// mean_i |est_i - truth_i| / |truth_i|.
double relative_mae(std::span<const double> estimate, std::span<const double> truth);

struct SpectrumReport {
  std::vector<double> top_positive;     // at most k, descending
  std::optional<double> top_negative;   // most negative value
  std::optional<double> rneg;           // |top_negative| / top positive; 0 without negatives
  std::size_t outliers = 0;             // n >= 2 with lambda_n / lambda_1 > threshold
  double threshold = 0.20;
};

SpectrumReport spectrum_report(std::span<const double> ritz_values, std::size_t k, double outlier_threshold = 0.20);

/// {ritz, rneg, outliers, m, d, algorithm, seed}
nlohmann::json spectrum_json(const KrylovResult& result, const SpectrumReport& report, const SketchSpec& spec,
                             std::uint64_t arnoldi_seed);

/// Fraction of |g|^2 captured by the Ritz vectors of the `count` largest Ritz
/// values (symmetric operators).
double ritz_alignment(const KrylovResult& result, std::span<const double> g, std::size_t count);

/// Quadratic model with planted outliers over a power law, sketched and
/// solved with Arnoldi; compares the top-k Ritz values with the exact spectrum.
struct EigenExperiment {
  std::size_t n = 1u << 12;
  std::vector<double> outliers = {10.0, 9.0, 8.0};
  double c = 1.0;
  double alpha = 2.0;
  /// Kronecker Haar eigenbasis block limit.
  std::size_t basis_block = 1024;
  std::uint64_t oracle_seed = 1;
  std::size_t m = 64;
  std::size_t k = 10;
};

struct EigenRow {
  std::size_t d = 0;
  std::uint64_t seed = 0;
  double mae = 0.0;
  std::size_t m = 0;
  std::vector<double> top;    // estimated top-k
  std::vector<double> truth;  // exact top-k
  SpectrumReport report;
};

QuadraticOracle make_eigen_oracle(const EigenExperiment& e);
/// The Arnoldi start vector uses the sketch seed.
EigenRow run_eigen_experiment(const EigenExperiment& e, const std::shared_ptr<const ModelOracle>& oracle,
                              std::span<const double> truth_descending, const SketchSpec& spec);

}  // namespace kronsketch
