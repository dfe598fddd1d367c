#include "kronsketch/perf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "kronsketch/errors.hpp"
#include "kronsketch/rng.hpp"
#include "kronsketch/simd.hpp"

#if defined(__unix__)
#include <sys/utsname.h>
#endif

namespace kronsketch {

using detail::require;

std::string_view to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision parse_precision(std::string_view name) {
  if (name == "f32") return Precision::f32;
  if (name == "f64") return Precision::f64;
  throw InvalidArgument("unknown precision '" + std::string(name) + "' (expected f32 or f64)");
}

ChunkedDense::ChunkedDense(std::size_t n, std::size_t d, std::uint64_t seed, std::size_t chunk_rows)
    : n_(n), d_(d), words_((n + 63) / 64), chunk_rows_(chunk_rows), seed_(seed) {
  require(n >= 1 && d >= 1, "chunked dense: dimensions must be positive");
  require(chunk_rows >= 1, "chunked dense: chunk_rows must be positive");
}

template <typename T>
std::vector<T> ChunkedDense::forward(std::span<const T> x) const {
  require(x.size() == n_, "chunked dense: input length mismatch");
  const auto& k = simd::active<T>();
  std::vector<T> padded(words_ * 64, T(0));
  std::copy(x.begin(), x.end(), padded.begin());
  std::vector<T> acc(d_, T(0));
  std::vector<std::uint64_t> bits(chunk_rows_ * words_);
  // Column tiles small enough that x stays in L1/L2 across a chunk of rows.
  constexpr std::size_t tile_words = 64;
  for (std::size_t r0 = 0; r0 < d_; r0 += chunk_rows_) {
    const std::size_t rows = std::min(chunk_rows_, d_ - r0);
    for (std::size_t r = 0; r < rows; ++r) {
      // SplitMix64 sequence keyed by (seed, row).
      const std::uint64_t key = derive_seed(seed_, StreamTag::chunked_dense, r0 + r);
      std::uint64_t* row = bits.data() + r * words_;
      for (std::size_t w = 0; w < words_; ++w) row[w] = splitmix64(key + w * 0x9E3779B97F4A7C15ULL);
    }
    for (std::size_t t = 0; t < words_; t += tile_words) {
      const std::size_t tw = std::min(tile_words, words_ - t);
      for (std::size_t r = 0; r < rows; ++r)
        acc[r0 + r] += k.signed_sum(padded.data() + 64 * t, bits.data() + r * words_ + t, 64 * tw);
    }
  }
  const T scale = T(1) / std::sqrt(static_cast<T>(d_));
  for (auto& v : acc) v *= scale;
  return acc;
}

template std::vector<float> ChunkedDense::forward<float>(std::span<const float>) const;
template std::vector<double> ChunkedDense::forward<double>(std::span<const double>) const;

Timing time_runs(const std::function<void()>& body, std::size_t warmup, std::size_t repeats) {
  require(repeats >= 1, "time_runs: need at least one timed run");
  for (std::size_t i = 0; i < warmup; ++i) body();
  Timing t;
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto start = std::chrono::steady_clock::now();
    body();
    t.samples.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  auto sorted = t.samples;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  t.median_seconds = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  return t;
}

nlohmann::json host_fingerprint() {
  nlohmann::json j;
  std::string model = "unknown";
  std::ifstream cpuinfo("/proc/cpuinfo");
  for (std::string line; std::getline(cpuinfo, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) model = line.substr(line.find_first_not_of(' ', colon + 1));
      break;
    }
  }
  j["cpu"] = model;
  j["hardware_threads"] = std::thread::hardware_concurrency();
  j["simd"] = std::string(simd::active_name());
#if defined(__VERSION__)
  j["compiler"] = __VERSION__;
#endif
#if defined(NDEBUG)
  j["assertions"] = false;
#else
  j["assertions"] = true;
#endif
#if defined(__unix__)
  utsname u{};
  if (uname(&u) == 0) j["os"] = std::string(u.sysname) + " " + u.release + " " + u.machine;
#endif
  return j;
}

namespace {

template <typename T>
std::vector<T> unit_input(std::size_t n, std::uint64_t seed) {
  Stream s(seed, StreamTag::test_vectors);
  std::vector<double> v = s.normals(n);
  double norm = 0;
  for (double a : v) norm += a * a;
  norm = std::sqrt(norm);
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(v[i] / norm);
  return out;
}

template <typename T, typename F>
Timing time_map(std::size_t n, std::uint64_t seed, F&& apply, std::size_t warmup, std::size_t repeats) {
  const auto x = unit_input<T>(n, seed);
  volatile T sink = T(0);
  const auto t = time_runs([&] { sink = sink + apply(std::span<const T>(x))[0]; }, warmup, repeats);
  return t;
}

}  // namespace

PerfRow time_forward(const SketchSpec& spec, Precision precision, std::size_t warmup, std::size_t repeats) {
  const Sketcher sk(spec);
  PerfRow row{std::string(to_string(spec.algorithm)), spec.n, spec.d, precision, {}};
  if (precision == Precision::f32)
    row.timing = time_map<float>(spec.n, spec.seed, [&](std::span<const float> x) { return sk.forward<float>(x); },
                                 warmup, repeats);
  else
    row.timing = time_map<double>(spec.n, spec.seed, [&](std::span<const double> x) { return sk.forward<double>(x); },
                                  warmup, repeats);
  return row;
}

PerfRow time_chunked_dense(std::size_t n, std::size_t d, std::uint64_t seed, Precision precision,
                           std::size_t warmup, std::size_t repeats) {
  const ChunkedDense cd(n, d, seed);
  PerfRow row{"chunked_dense", n, d, precision, {}};
  if (precision == Precision::f32)
    row.timing = time_map<float>(n, seed, [&](std::span<const float> x) { return cd.forward<float>(x); }, warmup,
                                 repeats);
  else
    row.timing = time_map<double>(n, seed, [&](std::span<const double> x) { return cd.forward<double>(x); }, warmup,
                                  repeats);
  return row;
}

}  // namespace kronsketch
