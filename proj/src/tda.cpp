#include "kronsketch/tda.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "kronsketch/errors.hpp"
#include "kronsketch/rng.hpp"
#include "kronsketch/simd.hpp"

namespace kronsketch {

using detail::require;

namespace {

template <typename F>
void for_each_example(std::size_t count, unsigned threads, F&& f) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += threads) f(i);
    });
  for (auto& th : pool) th.join();
}

// Inverse of k -> (i, j), i < j, enumerating row by row.
ExamplePair decode_pair(std::uint64_t k, std::size_t m) {
  std::size_t i = 0;
  std::uint64_t row = m - 1;
  while (k >= row) {
    k -= row;
    ++i;
    --row;
  }
  return {i, i + 1 + static_cast<std::size_t>(k)};
}

}  // namespace

double tda_score(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "tda_score: length mismatch (" + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
  return simd::active<double>().dot(a.data(), b.data(), a.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "pearson: need two equal-length samples of size >= 2");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = x[i] - mx, b = y[i] - my;
    sxx += a * a;
    syy += b * b;
    sxy += a * b;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw UndefinedCorrelation("pearson: a score list has zero variance");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<ExamplePair> sample_pairs(std::size_t examples, std::size_t count, std::uint64_t seed) {
  require(examples >= 2, "sample_pairs: need at least two examples");
  const std::uint64_t total = static_cast<std::uint64_t>(examples) * (examples - 1) / 2;
  require(count >= 2 && count <= total, "sample_pairs: pair count must lie in [2, " + std::to_string(total) + "]");
  // Floyd's sampling, then sorted so the order is independent of hashing.
  Stream s(seed, StreamTag::pair_sampling);
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(count * 2);
  for (std::uint64_t j = total - count; j < total; ++j) {
    const std::uint64_t t = s.below(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> ids(chosen.begin(), chosen.end());
  std::sort(ids.begin(), ids.end());
  std::vector<ExamplePair> out;
  out.reserve(count);
  for (auto k : ids) out.push_back(decode_pair(k, examples));
  // Shuffle so that a prefix is itself a uniform sample.
  for (std::size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[s.below(i)]);
  return out;
}

GradientTable per_example_gradients(const ModelOracle& oracle, std::span<const double> theta, unsigned threads) {
  GradientTable t;
  t.examples = oracle.batch_count();
  t.dim = oracle.dim();
  require(t.examples >= 2, "per_example_gradients: oracle needs at least two examples");
  t.values.resize(t.examples * t.dim);
  for_each_example(t.examples, threads, [&](std::size_t i) {
    const auto g = oracle.gradient(theta, i);
    std::copy(g.begin(), g.end(), t.values.begin() + static_cast<std::ptrdiff_t>(i * t.dim));
  });
  for (double v : t.values)
    if (!std::isfinite(v)) throw NumericError("per_example_gradients: non-finite gradient", 0);
  return t;
}

GradientTable sketch_gradients(const Sketcher& sketcher, const GradientTable& grads, unsigned threads) {
  require(grads.dim == sketcher.input_dim(), "sketch_gradients: gradient length differs from the sketch input");
  GradientTable t;
  t.examples = grads.examples;
  t.dim = sketcher.target_dim();
  t.values.resize(t.examples * t.dim);
  for_each_example(t.examples, threads, [&](std::size_t i) {
    const auto y = sketcher.forward<double>(grads.row(i));
    std::copy(y.begin(), y.end(), t.values.begin() + static_cast<std::ptrdiff_t>(i * t.dim));
  });
  return t;
}

CorrelationResult correlation_harness(const GradientTable& grads, const GradientTable& sketched,
                                      std::size_t pair_count, std::uint64_t pair_seed) {
  require(grads.examples == sketched.examples, "correlation_harness: example counts differ");
  CorrelationResult r;
  r.pairs = sample_pairs(grads.examples, pair_count, pair_seed);
  r.true_scores.reserve(pair_count);
  r.sketched_scores.reserve(pair_count);
  for (const auto& [x, z] : r.pairs) {
    r.true_scores.push_back(tda_score(grads.row(x), grads.row(z)));
    r.sketched_scores.push_back(tda_score(sketched.row(x), sketched.row(z)));
  }
  r.r = pearson(r.true_scores, r.sketched_scores);
  return r;
}

CorrelationResult correlation_harness(const ModelOracle& oracle, const Sketcher& sketcher,
                                      std::span<const double> theta, std::size_t pair_count, std::uint64_t pair_seed,
                                      unsigned threads) {
  const auto g = per_example_gradients(oracle, theta, threads);
  return correlation_harness(g, sketch_gradients(sketcher, g, threads), pair_count, pair_seed);
}

std::vector<BlockCorrelation> layer_masked_correlation(const GradientTable& grads,
                                                       std::span<const CoordinateBlock> blocks,
                                                       std::size_t pair_count, std::uint64_t pair_seed) {
  require(!blocks.empty(), "layer_masked_correlation: no blocks");
  for (const auto& [b, e] : blocks)
    require(b < e && e <= grads.dim, "layer_masked_correlation: empty or out-of-range block [" + std::to_string(b) +
                                         ", " + std::to_string(e) + ")");
  const auto pairs = sample_pairs(grads.examples, pair_count, pair_seed);
  std::vector<double> full;
  full.reserve(pairs.size());
  for (const auto& [x, z] : pairs) full.push_back(tda_score(grads.row(x), grads.row(z)));
  std::vector<BlockCorrelation> out;
  std::vector<double> part(pairs.size());
  for (const auto& blk : blocks) {
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto gx = grads.row(pairs[p].first).subspan(blk.first, blk.second - blk.first);
      const auto gz = grads.row(pairs[p].second).subspan(blk.first, blk.second - blk.first);
      part[p] = tda_score(gx, gz);
    }
    out.push_back({blk, pearson(part, full)});
  }
  return out;
}

std::string score_dump_csv(const CorrelationResult& result, const GradientTable& grads,
                           std::span<const CoordinateBlock> blocks) {
  std::ostringstream os;
  os.precision(17);
  os << "x_id,z_id,true,sketched";
  for (std::size_t k = 0; k < blocks.size(); ++k) os << ",block_" << k;
  os << '\n';
  for (std::size_t p = 0; p < result.pairs.size(); ++p) {
    const auto [x, z] = result.pairs[p];
    os << x << ',' << z << ',' << result.true_scores[p] << ',' << result.sketched_scores[p];
    for (const auto& blk : blocks) {
      require(blk.first < blk.second && blk.second <= grads.dim, "score_dump_csv: bad block");
      os << ',' << tda_score(grads.row(x).subspan(blk.first, blk.second - blk.first),
                             grads.row(z).subspan(blk.first, blk.second - blk.first));
    }
    os << '\n';
  }
  return os.str();
}

std::optional<std::size_t> minimal_dimension(std::span<const std::pair<std::size_t, double>> rows, double threshold) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) require(rows[i].first > rows[i - 1].first, "minimal_dimension: rows must be sorted by d");
    if (rows[i].second >= threshold) return rows[i].first;
  }
  return std::nullopt;
}

}  // namespace kronsketch
