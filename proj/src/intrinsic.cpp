#include "kronsketch/intrinsic.hpp"

#include <bit>
#include <cmath>
#include <sstream>

namespace kronsketch {

using detail::require;

namespace {

std::size_t batch_for_step(const ModelOracle& oracle, std::size_t step) {
  const std::size_t b = oracle.batch_count();
  return b <= 1 ? kFullBatch : step % b;
}

}  // namespace

void SearchConfig::validate() const {
  require(d_min >= 1 && std::has_single_bit(d_min), "search: d_min must be a power of two");
  require(std::has_single_bit(d_max) && d_min <= d_max, "search: d_max must be a power of two >= d_min");
  require(c >= 1, "search: c must be at least 1");
  require(delta > 0.0, "search: delta must be positive");
  require(std::isfinite(lr) && lr > 0.0, "search: lr must be positive");
  require(max_windows >= 1, "search: max_windows must be at least 1");
}

std::string SearchTrace::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "step,active_d,metric\n";
  for (const auto& p : points) os << p.step << ',' << p.active_d << ',' << p.metric << '\n';
  return os.str();
}

nlohmann::json SearchTrace::to_json() const {
  nlohmann::json j;
  j["d_star"] = d_star ? nlohmann::json(*d_star) : nlohmann::json(nullptr);
  j["windows"] = points.empty() ? 0 : points.size() - 1;
  j["final_metric"] = points.empty() ? nlohmann::json(nullptr) : nlohmann::json(points.back().metric);
  auto& arr = j["trace"] = nlohmann::json::array();
  for (const auto& p : points) arr.push_back({{"step", p.step}, {"active_d", p.active_d}, {"metric", p.metric}});
  return j;
}

std::vector<double> subspace_point(const Sketcher& sketcher, std::span<const double> theta0,
                                   std::span<const double> w) {
  require(theta0.size() == sketcher.input_dim(), "subspace_point: theta0 length mismatch");
  auto theta = sketcher.transpose<double>(w);
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += theta0[i];
  return theta;
}

std::vector<double> subspace_sgd_step(const ModelOracle& oracle, const Sketcher& sketcher,
                                      std::span<const double> theta0, std::span<const double> w,
                                      std::size_t active_d, double lr, std::size_t batch) {
  require(w.size() == sketcher.target_dim(), "subspace_sgd_step: w length differs from the sketch dimension");
  require(active_d <= sketcher.target_dim(), "subspace_sgd_step: active_d " + std::to_string(active_d) +
                                                 " exceeds d_max " + std::to_string(sketcher.target_dim()));
  std::vector<double> out(w.begin(), w.end());
  if (active_d == 0) return out;
  const auto g = reparameterized_gradient(sketcher, oracle, theta0, w, batch);
  for (std::size_t i = 0; i < active_d; ++i) out[i] -= lr * g[i];
  return out;
}

Sketcher search_sketcher(const SearchConfig& config, std::size_t n) {
  SketchSpec spec;
  spec.algorithm = config.algorithm;
  spec.n = n;
  spec.d = config.d_max;
  spec.seed = config.seed;
  return Sketcher(spec);
}

SearchResult search_intrinsic_dimension(const ModelOracle& oracle, const Evaluator& evaluate,
                                        std::span<const double> theta0, const SearchConfig& config) {
  config.validate();
  require(theta0.size() == oracle.dim(), "search: theta0 length mismatch");
  const Sketcher sk = search_sketcher(config, oracle.dim());
  SearchResult res;
  res.w.assign(config.d_max, 0.0);

  std::size_t d = config.d_min;
  std::size_t step = 0;
  double tau_old = evaluate(theta0);
  res.trace.points.push_back({0, d, tau_old});
  for (std::size_t window = 0; window < config.max_windows; ++window) {
    for (std::size_t s = 0; s < config.c; ++s, ++step)
      res.w = subspace_sgd_step(oracle, sk, theta0, res.w, d, config.lr, batch_for_step(oracle, step));
    const double tau_new = evaluate(subspace_point(sk, theta0, res.w));
    if (!std::isfinite(tau_new)) throw NumericError("search: metric is not finite", step);
    res.trace.points.push_back({step, d, tau_new});
    if (tau_new >= config.tau_target) {
      res.d_star = d;
      res.trace.d_star = d;
      return res;
    }
    if (tau_new - tau_old < config.delta) {
      d *= 2;
      if (d > config.d_max)
        throw SearchExhausted("search: d would exceed d_max = " + std::to_string(config.d_max), res.trace);
    }
    tau_old = tau_new;
  }
  throw SearchExhausted("search: no result after " + std::to_string(config.max_windows) + " windows", res.trace);
}

VerifyResult verify_half(const ModelOracle& oracle, const Evaluator& evaluate, std::span<const double> theta0,
                         std::size_t d_star, const SearchConfig& config, std::size_t steps) {
  config.validate();
  require(d_star >= 2 * config.d_min && d_star <= config.d_max, "verify_half: d_star outside [2 d_min, d_max]");
  const Sketcher sk = search_sketcher(config, oracle.dim());
  const std::size_t d = d_star / 2;
  std::vector<double> w(config.d_max, 0.0);
  VerifyResult r;
  r.final_metric = r.best_metric = evaluate(theta0);
  r.trace.points.push_back({0, d, r.final_metric});
  for (std::size_t step = 0; step < steps;) {
    const std::size_t end = std::min(steps, step + config.c);
    for (; step < end; ++step) w = subspace_sgd_step(oracle, sk, theta0, w, d, config.lr, batch_for_step(oracle, step));
    r.final_metric = evaluate(subspace_point(sk, theta0, w));
    r.best_metric = std::max(r.best_metric, r.final_metric);
    r.trace.points.push_back({step, d, r.final_metric});
  }
  r.passed = r.best_metric < config.tau_target;
  return r;
}

Evaluator loss_reduction_metric(const ModelOracle& oracle, std::span<const double> theta0, double best_loss) {
  const double l0 = oracle.loss(theta0);
  require(l0 > best_loss, "loss_reduction_metric: initial loss must exceed the best loss");
  return [&oracle, l0, best_loss](std::span<const double> theta) {
    return (l0 - oracle.loss(theta)) / (l0 - best_loss);
  };
}

}  // namespace kronsketch
