#pragma once

// Training-data attribution by gradient dot products, sketched against exact,
// and the layer-restriction ablation.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kronsketch/calculus.hpp"

namespace kronsketch {

double tda_score(std::span<const double> a, std::span<const double> b);

/// Throws UndefinedCorrelation when either sample has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

using ExamplePair = std::pair<std::size_t, std::size_t>;

/// Distinct unordered pairs x < z drawn uniformly without replacement.
std::vector<ExamplePair> sample_pairs(std::size_t examples, std::size_t count, std::uint64_t seed);

/// Row-major examples x dim matrix of per-example gradients.
struct GradientTable {
  std::size_t examples = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const { return std::span<const double>(values).subspan(i * dim, dim); }
};

/// One gradient per example (batch id == example id). Examples are split over
/// `threads` workers; the result does not depend on the split.
GradientTable per_example_gradients(const ModelOracle& oracle, std::span<const double> theta, unsigned threads = 1);

/// Sketch every row once.
GradientTable sketch_gradients(const Sketcher& sketcher, const GradientTable& grads, unsigned threads = 1);

struct CorrelationResult {
  double r = 0.0;
  std::vector<ExamplePair> pairs;
  std::vector<double> true_scores;
  std::vector<double> sketched_scores;
};

CorrelationResult correlation_harness(const GradientTable& grads, const GradientTable& sketched,
                                      std::size_t pair_count, std::uint64_t pair_seed);
/// Convenience form: gradients at theta, sketched with `sketcher`.
CorrelationResult correlation_harness(const ModelOracle& oracle, const Sketcher& sketcher,
                                      std::span<const double> theta, std::size_t pair_count, std::uint64_t pair_seed,
                                      unsigned threads = 1);

struct BlockCorrelation {
  CoordinateBlock block;
  double r = 0.0;
};

/// For each block, Pearson r between block-restricted and full dot products.
std::vector<BlockCorrelation> layer_masked_correlation(const GradientTable& grads,
                                                       std::span<const CoordinateBlock> blocks,
                                                       std::size_t pair_count, std::uint64_t pair_seed);

/// x_id,z_id,true,sketched[,block_k...]
std::string score_dump_csv(const CorrelationResult& result, const GradientTable& grads,
                           std::span<const CoordinateBlock> blocks = {});

/// Smallest d whose mean r reaches the threshold; (d, mean r) rows must be
/// sorted by d.
std::optional<std::size_t> minimal_dimension(std::span<const std::pair<std::size_t, double>> rows, double threshold);

}  // namespace kronsketch
