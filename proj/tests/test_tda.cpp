#include <algorithm>
#include <cmath>
#include <set>

#include "dense_oracle.hpp"
#include "doctest.h"
#include "kronsketch/errors.hpp"
#include "kronsketch/tda.hpp"

using namespace kronsketch;

namespace {

SketchSpec spec_for(Algorithm a, std::size_t n, std::size_t d, std::uint64_t seed) {
  SketchSpec s;
  s.algorithm = a;
  s.n = n;
  s.d = d;
  s.seed = seed;
  return s;
}

const GradientTable& default_gradients() {
  static const GradientTable g = [] {
    const auto o = LogisticOracle::synthetic(LogisticConfig{});
    return per_example_gradients(o, std::vector<double>(o.dim(), 0.0));
  }();
  return g;
}

double mean_r(Algorithm a, std::size_t d, std::uint64_t seeds) {
  const auto& g = default_gradients();
  double acc = 0;
  for (std::uint64_t s = 0; s < seeds; ++s)
    acc += correlation_harness(g, sketch_gradients(Sketcher(spec_for(a, g.dim, d, s)), g), 4096, s).r;
  return acc / static_cast<double>(seeds);
}

}  // namespace

TEST_CASE("tda_score and pearson") {
  const std::vector<double> a = {1, 0, 2}, b = {0, 3, 0};
  CHECK(tda_score(a, b) == 0.0);
  CHECK(tda_score(a, a) == 5.0);
  CHECK_THROWS_AS(tda_score(a, std::vector<double>{1, 2}), InvalidArgument);

  const std::vector<double> x = {1, 2, 3, 4}, y = {2, 4, 6, 8}, z = {4, 3, 2, 1};
  CHECK(pearson(x, y) == doctest::Approx(1.0));
  CHECK(pearson(x, z) == doctest::Approx(-1.0));
  CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(pearson(x, std::vector<double>(4, 7.0)), UndefinedCorrelation);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), InvalidArgument);
}

TEST_CASE("pair sampling") {
  const auto p = sample_pairs(50, 300, 9);
  CHECK(p.size() == 300);
  std::set<ExamplePair> seen(p.begin(), p.end());
  CHECK(seen.size() == 300);
  for (const auto& [x, z] : p) {
    CHECK(x < z);
    CHECK(z < 50);
  }
  CHECK(sample_pairs(50, 300, 9) == p);
  CHECK(sample_pairs(50, 300, 10) != p);

  const auto all = sample_pairs(6, 15, 1);
  std::set<ExamplePair> every(all.begin(), all.end());
  CHECK(every.size() == 15);
  CHECK_THROWS_AS(sample_pairs(6, 16, 1), InvalidArgument);
  CHECK_THROWS_AS(sample_pairs(6, 1, 1), InvalidArgument);

  // Marginal uniformity: each of the 15 pairs drawn with probability 5/15.
  std::vector<int> hits(15, 0);
  const int trials = 3000;
  for (int t = 0; t < trials; ++t)
    for (const auto& [x, z] : sample_pairs(6, 5, 1000 + t)) {
      const std::size_t k = x * 6 - x * (x + 1) / 2 + (z - x - 1);
      ++hits[k];
    }
  for (int h : hits) CHECK(std::abs(h - trials / 3) <= 4 * std::sqrt(trials * (1.0 / 3) * (2.0 / 3)));
}

TEST_CASE("orthogonal square sketch reproduces the exact scores") {
  LogisticConfig cfg;
  cfg.dim = 1024;
  cfg.examples = 64;
  cfg.blocks = 4;
  const auto o = LogisticOracle::synthetic(cfg);
  const std::vector<double> theta(1024, 0.01);
  const auto r = correlation_harness(o, Sketcher(spec_for(Algorithm::qk, 1024, 1024, 3)), theta, 500, 1);
  CHECK(std::abs(r.r - 1.0) <= 1e-10);
  for (std::size_t i = 0; i < r.pairs.size(); ++i)
    CHECK(std::abs(r.sketched_scores[i] - r.true_scores[i]) <= 1e-10 * (1 + std::abs(r.true_scores[i])));
}

TEST_CASE("AFFD correlation grows with D and reaches 0.95 at D=2^10") {
  double prev = -1;
  for (std::size_t d : {64, 256, 1024, 4096}) {
    const double r = mean_r(Algorithm::affd, d, 5);
    MESSAGE("affd D=" << d << " mean r " << r);
    CHECK(r >= prev);
    prev = r;
  }
  const auto& g = default_gradients();
  for (std::uint64_t s = 0; s < 5; ++s)
    CHECK(correlation_harness(g, sketch_gradients(Sketcher(spec_for(Algorithm::affd, g.dim, 1024, s)), g), 4096, s)
              .r >= 0.95);
  CHECK(mean_r(Algorithm::qk, 1024, 5) < mean_r(Algorithm::affd, 1024, 5));
}

TEST_CASE("layer restriction") {
  const auto& g = default_gradients();
  const std::vector<CoordinateBlock> whole = {{0, g.dim}};
  CHECK(layer_masked_correlation(g, whole, 1000, 2).at(0).r == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<CoordinateBlock> empty = {{5, 5}};
  CHECK_THROWS_AS(layer_masked_correlation(g, empty, 1000, 2), InvalidArgument);
  CHECK_THROWS_AS(layer_masked_correlation(g, {}, 1000, 2), InvalidArgument);

  const auto o = LogisticOracle::synthetic(LogisticConfig{});
  const auto per_block = layer_masked_correlation(g, o.layers(), 4096, 3);
  const double worst = std::min_element(per_block.begin(), per_block.end(), [](auto& a, auto& b) {
                         return a.r < b.r;
                       })->r;
  CHECK(worst < 0.95);
  CHECK(correlation_harness(g, sketch_gradients(Sketcher(spec_for(Algorithm::affd, g.dim, 1u << 13, 0)), g), 4096, 0)
            .r >= 0.98);

  // Two statistically identical blocks.
  LogisticConfig twin;
  twin.dim = 2048;
  twin.blocks = 2;
  twin.scale_min = twin.scale_max = 1.0;
  twin.examples = 256;
  const auto t = LogisticOracle::synthetic(twin);
  const auto tg = per_example_gradients(t, std::vector<double>(2048, 0.0));
  const auto rs = layer_masked_correlation(tg, t.layers(), 4096, 4);
  MESSAGE("twin blocks r: " << rs[0].r << ", " << rs[1].r);
  CHECK(std::abs(rs[0].r - rs[1].r) <= 0.1);
}

TEST_CASE("sketched scores are unbiased") {
  LogisticConfig cfg;
  cfg.dim = 256;
  cfg.examples = 4;
  cfg.blocks = 2;
  const auto o = LogisticOracle::synthetic(cfg);
  const auto g = per_example_gradients(o, std::vector<double>(256, 0.0));
  const double truth = tda_score(g.row(0), g.row(1));
  for (auto a : {Algorithm::dense, Algorithm::affd, Algorithm::afjl, Algorithm::qk}) {
    INFO(to_string(a));
    const int seeds = 1000;
    double sum = 0, sum2 = 0;
    for (int s = 0; s < seeds; ++s) {
      SketchSpec spec = spec_for(a, 256, 16, static_cast<std::uint64_t>(s));
      spec.max_block = 16;
      const Sketcher sk(spec);
      const double v = tda_score(sk.forward<double>(g.row(0)), sk.forward<double>(g.row(1)));
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / seeds;
    const double sd = std::sqrt((sum2 - seeds * mean * mean) / (seeds - 1));
    CHECK(std::abs(mean - truth) <= 3 * sd / std::sqrt(double(seeds)));
  }
}

TEST_CASE("gradient caches are deterministic across thread counts") {
  LogisticConfig cfg;
  cfg.dim = 2048;
  cfg.examples = 37;
  cfg.blocks = 4;
  const auto o = LogisticOracle::synthetic(cfg);
  const std::vector<double> theta(2048, 0.02);
  const auto g1 = per_example_gradients(o, theta, 1);
  const auto g3 = per_example_gradients(o, theta, 3);
  CHECK(g1.values == g3.values);
  const Sketcher sk(spec_for(Algorithm::affd, 2048, 128, 5));
  const auto s1 = sketch_gradients(sk, g1, 1);
  CHECK(sketch_gradients(sk, g1, 4).values == s1.values);
  CHECK(sketch_gradients(sk, g1, 1).values == s1.values);
  for (std::size_t i = 0; i < g1.examples; ++i) CHECK(sk.forward<double>(g1.row(i)) == std::vector<double>(s1.row(i).begin(), s1.row(i).end()));
  CHECK_THROWS_AS(sketch_gradients(Sketcher(spec_for(Algorithm::affd, 1024, 128, 5)), g1), InvalidArgument);
}

TEST_CASE("score dump and minimal dimension") {
  LogisticConfig cfg;
  cfg.dim = 64;
  cfg.examples = 4;
  cfg.blocks = 2;
  const auto o = LogisticOracle::synthetic(cfg);
  const auto g = per_example_gradients(o, std::vector<double>(64, 0.0));
  const auto r = correlation_harness(g, sketch_gradients(Sketcher(spec_for(Algorithm::affd, 64, 8, 1)), g), 3, 1);
  const std::vector<CoordinateBlock> blocks = {{0, 32}, {32, 64}};
  const auto csv = score_dump_csv(r, g, blocks);
  CHECK(csv.rfind("x_id,z_id,true,sketched,block_0,block_1\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  const std::vector<std::pair<std::size_t, double>> rows = {{64, 0.8}, {256, 0.96}, {1024, 0.99}};
  CHECK(*minimal_dimension(rows, 0.95) == 256);
  CHECK_FALSE(minimal_dimension(rows, 0.999));
  const std::vector<std::pair<std::size_t, double>> unsorted = {{256, 0.1}, {64, 0.2}};
  CHECK_THROWS_AS(minimal_dimension(unsorted, 0.95), InvalidArgument);
}
