#pragma once

// Subspace training theta = theta0 + Phi^T w with w masked to its first d
// coordinates, and the doubling search for the smallest working d.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kronsketch/calculus.hpp"
#include "kronsketch/errors.hpp"

namespace kronsketch {

/// Metric to maximize, evaluated at full parameters theta.
using Evaluator = std::function<double(std::span<const double>)>;

struct SearchConfig {
  std::size_t d_min = 1;
  std::size_t d_max = 1024;
  std::size_t c = 100;  // steps per window
  double delta = 1e-3;
  double tau_target = 0.9;
  double lr = 0.1;
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::affd;
  /// Guard against a search that keeps improving without reaching the target.
  std::size_t max_windows = 10000;

  void validate() const;
};

struct TracePoint {
  std::size_t step = 0;
  std::size_t active_d = 0;
  double metric = 0.0;
};

struct SearchTrace {
  std::vector<TracePoint> points;  // step 0 first, then one per window
  std::optional<std::size_t> d_star;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

class SearchExhausted : public Error {
 public:
  SearchExhausted(const std::string& what, SearchTrace trace)
      : Error(ErrorCode::search_exhausted, what), trace_(std::move(trace)) {}
  const SearchTrace& trace() const noexcept { return trace_; }

 private:
  SearchTrace trace_;
};

/// One SGD step on w: the gradient of w -> L(theta0 + Phi^T w) with coordinates
/// >= active_d zeroed. Returns the updated w.
std::vector<double> subspace_sgd_step(const ModelOracle& oracle, const Sketcher& sketcher,
                                      std::span<const double> theta0, std::span<const double> w,
                                      std::size_t active_d, double lr, std::size_t batch = kFullBatch);

/// theta0 + Phi^T w.
std::vector<double> subspace_point(const Sketcher& sketcher, std::span<const double> theta0,
                                   std::span<const double> w);

/// Sketcher at d_max shared by the whole search.
Sketcher search_sketcher(const SearchConfig& config, std::size_t n);

struct SearchResult {
  std::size_t d_star = 0;
  SearchTrace trace;
  std::vector<double> w;
};

/// Doubling search: c steps, evaluate; stop at the target, double d when the
/// window improved by less than delta. Throws SearchExhausted past d_max.
SearchResult search_intrinsic_dimension(const ModelOracle& oracle, const Evaluator& evaluate,
                                        std::span<const double> theta0, const SearchConfig& config);

struct VerifyResult {
  bool passed = false;  // the metric stayed below the target at d*/2
  double final_metric = 0.0;
  double best_metric = 0.0;
  SearchTrace trace;
};

/// Trains at fixed d_star / 2 for `steps` steps from theta0.
VerifyResult verify_half(const ModelOracle& oracle, const Evaluator& evaluate, std::span<const double> theta0,
                         std::size_t d_star, const SearchConfig& config, std::size_t steps);

/// (L(theta0) - L(theta)) / (L(theta0) - best_loss): 0 at theta0, 1 at the
/// best achievable loss.
Evaluator loss_reduction_metric(const ModelOracle& oracle, std::span<const double> theta0, double best_loss);

}  // namespace kronsketch
