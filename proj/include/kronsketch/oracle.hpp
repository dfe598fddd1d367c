#pragma once

// Differentiable synthetic models with analytic gradients and Hessian-vector
// products.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kronsketch/kron.hpp"

namespace kronsketch {

/// Batch id selecting the mean loss over every batch.
inline constexpr std::size_t kFullBatch = std::numeric_limits<std::size_t>::max();

class ModelOracle {
 public:
  virtual ~ModelOracle() = default;

  virtual std::size_t dim() const = 0;
  /// Valid batch ids are [0, batch_count()) and kFullBatch.
  virtual std::size_t batch_count() const = 0;
  virtual double loss(std::span<const double> theta, std::size_t batch = kFullBatch) const = 0;
  virtual std::vector<double> gradient(std::span<const double> theta, std::size_t batch = kFullBatch) const = 0;
  virtual std::vector<double> hvp(std::span<const double> theta, std::span<const double> u,
                                  std::size_t batch = kFullBatch) const = 0;
  /// Parameters needed to rebuild the oracle; goes into report headers.
  virtual nlohmann::json describe() const = 0;

 protected:
  void check_theta(std::span<const double> theta) const;
  void check_batch(std::size_t batch) const;
};

/// L(theta) = 1/2 theta^T A theta + b^T theta with A = Q diag(lambda) Q^T.
/// Q is the identity or a Kronecker product of Haar factors.
class QuadraticOracle final : public ModelOracle {
 public:
  QuadraticOracle(std::vector<double> spectrum, std::vector<double> b, std::vector<KronFactor> basis = {});

  static QuadraticOracle diagonal(std::vector<double> spectrum, std::vector<double> b);
  /// Square Haar factors with blocks from compute_kron_shapes(n, max_block);
  /// n must be a power of two.
  static QuadraticOracle kron_haar(std::vector<double> spectrum, std::vector<double> b, std::uint64_t seed,
                                   std::size_t max_block = 64);

  std::size_t dim() const override { return spectrum_.size(); }
  std::size_t batch_count() const override { return 1; }
  double loss(std::span<const double> theta, std::size_t batch = kFullBatch) const override;
  std::vector<double> gradient(std::span<const double> theta, std::size_t batch = kFullBatch) const override;
  std::vector<double> hvp(std::span<const double> theta, std::span<const double> u,
                          std::size_t batch = kFullBatch) const override;
  nlohmann::json describe() const override;

  std::vector<double> apply(std::span<const double> u) const;
  /// -A^{-1} b; every eigenvalue must be non-zero.
  std::vector<double> minimizer() const;
  std::span<const double> spectrum() const { return spectrum_; }
  /// Eigenvalues sorted in descending order.
  std::vector<double> eigenvalues_descending() const;
  bool is_diagonal() const { return basis_.empty(); }

 private:
  std::vector<double> spectrum_;
  std::vector<double> b_;
  std::vector<KronFactor> basis_;
  std::uint64_t seed_ = 0;
  std::size_t max_block_ = 0;
};

/// outliers, then negatives, then c * i^-alpha for i = 1, 2, ..., truncated to n.
std::vector<double> planted_spectrum(std::size_t n, std::span<const double> outliers, double c, double alpha,
                                     std::span<const double> negatives = {});

struct LogisticConfig {
  std::size_t dim = 1u << 14;
  std::size_t examples = 256;
  /// Contiguous coordinate blocks ("layers"); dim must be a multiple.
  std::size_t blocks = 16;
  /// Latent factors per block.
  std::size_t rank = 6;
  /// Block signal scales run geometrically from scale_min to scale_max.
  double scale_min = 0.05;
  double scale_max = 5.0;
  /// Weight of the latent factors shared by all blocks; the rest is block-private.
  double shared = 0.7;
  /// Isotropic noise; its total energy per example is noise^2.
  double noise = 1.0;
  double ridge = 1e-3;
  std::uint64_t seed = 0;
};

/// Per-example logistic loss softplus(w) - y w + ridge/2 |theta|^2, w = x^T theta.
/// Batch i is example i.
class LogisticOracle final : public ModelOracle {
 public:
  /// features is examples x dim, row-major.
  LogisticOracle(std::size_t dim, std::vector<double> features, std::vector<int> labels, double ridge);
  static LogisticOracle synthetic(const LogisticConfig& config);

  std::size_t dim() const override { return dim_; }
  std::size_t batch_count() const override { return labels_.size(); }
  double loss(std::span<const double> theta, std::size_t batch = kFullBatch) const override;
  std::vector<double> gradient(std::span<const double> theta, std::size_t batch = kFullBatch) const override;
  std::vector<double> hvp(std::span<const double> theta, std::span<const double> u,
                          std::size_t batch = kFullBatch) const override;
  nlohmann::json describe() const override;

  std::span<const double> features(std::size_t example) const;
  int label(std::size_t example) const { return labels_.at(example); }
  /// [begin, end) coordinate ranges of the synthetic layers (one block when
  /// built from explicit features).
  const std::vector<std::pair<std::size_t, std::size_t>>& layers() const { return layers_; }

 private:
  std::size_t dim_;
  std::vector<double> features_;
  std::vector<int> labels_;
  double ridge_;
  std::vector<std::pair<std::size_t, std::size_t>> layers_;
  nlohmann::json description_;
};

/// L(theta) = |S^T theta - t|^2 for an orthonormal N x d basis S.
class PlantedSubspaceOracle final : public ModelOracle {
 public:
  PlantedSubspaceOracle(std::size_t dim, std::size_t planted_dim, std::uint64_t seed);

  std::size_t dim() const override { return dim_; }
  std::size_t batch_count() const override { return 1; }
  double loss(std::span<const double> theta, std::size_t batch = kFullBatch) const override;
  std::vector<double> gradient(std::span<const double> theta, std::size_t batch = kFullBatch) const override;
  std::vector<double> hvp(std::span<const double> theta, std::span<const double> u,
                          std::size_t batch = kFullBatch) const override;
  nlohmann::json describe() const override;

  std::size_t planted_dim() const { return planted_; }
  /// S^T u.
  std::vector<double> project(std::span<const double> u) const;
  /// S w.
  std::vector<double> lift(std::span<const double> w) const;
  std::span<const double> target() const { return target_; }

 private:
  std::size_t dim_;
  std::size_t planted_;
  std::uint64_t seed_;
  std::vector<double> basis_;  // dim x planted, row-major
  std::vector<double> target_;
};

struct FiniteDifferenceReport {
  double gradient_error = 0.0;  // max relative error over probed directions
  double hvp_error = 0.0;
  double hvp_asymmetry = 0.0;
  bool passed = false;
  std::vector<std::string> failures;
};

/// Central differences of loss (against gradient) and of gradient (against
/// hvp) along `probes` random unit directions, plus the symmetry of hvp.
FiniteDifferenceReport finite_difference_check(const ModelOracle& oracle, std::span<const double> theta,
                                               double tolerance, std::size_t batch = kFullBatch,
                                               double step = 1e-4, std::size_t probes = 8, std::uint64_t seed = 0);

}  // namespace kronsketch
