#pragma once

// Timing harness and the chunked dense baseline: a D x N Rademacher matrix
// regenerated chunk by chunk on every call, so its cost grows linearly in D.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kronsketch/sketch.hpp"

namespace kronsketch {

enum class Precision { f32, f64 };
std::string_view to_string(Precision p);
Precision parse_precision(std::string_view name);

class ChunkedDense {
 public:
  ChunkedDense(std::size_t n, std::size_t d, std::uint64_t seed, std::size_t chunk_rows = 64);

  std::size_t input_dim() const { return n_; }
  std::size_t target_dim() const { return d_; }

  /// y_r = sum_j s_rj x_j / sqrt(D), s_rj = +-1 from (seed, row r).
  template <typename T>
  std::vector<T> forward(std::span<const T> x) const;

 private:
  std::size_t n_, d_, words_, chunk_rows_;
  std::uint64_t seed_;
};

struct Timing {
  double median_seconds = 0.0;
  std::vector<double> samples;
};

inline constexpr std::size_t kWarmupRuns = 2;
inline constexpr std::size_t kTimedRuns = 9;

/// Median wall time on the steady clock.
Timing time_runs(const std::function<void()>& body, std::size_t warmup = kWarmupRuns,
                 std::size_t repeats = kTimedRuns);

/// CPU model, core count, SIMD variant, compiler, build flags.
nlohmann::json host_fingerprint();

struct PerfRow {
  std::string algorithm;  // an Algorithm name or "chunked_dense"
  std::size_t n = 0;
  std::size_t d = 0;
  Precision precision = Precision::f64;
  Timing timing;
};

/// Times forward() on one fixed unit Gaussian input. Sketcher construction is
/// excluded from the timed region.
PerfRow time_forward(const SketchSpec& spec, Precision precision, std::size_t warmup = kWarmupRuns,
                     std::size_t repeats = kTimedRuns);
PerfRow time_chunked_dense(std::size_t n, std::size_t d, std::uint64_t seed, Precision precision,
                           std::size_t warmup = kWarmupRuns, std::size_t repeats = kTimedRuns);

}  // namespace kronsketch
