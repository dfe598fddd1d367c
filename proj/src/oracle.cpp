#include "kronsketch/oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "kronsketch/errors.hpp"

namespace kronsketch {

using detail::require;

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// log(1 + e^w) without overflow.
double softplus(double w) { return w > 0 ? w + std::log1p(std::exp(-w)) : std::log1p(std::exp(w)); }

double sigmoid(double w) {
  if (w >= 0) return 1.0 / (1.0 + std::exp(-w));
  const double e = std::exp(w);
  return e / (1.0 + e);
}

}  // namespace

void ModelOracle::check_theta(std::span<const double> theta) const {
  require(theta.size() == dim(), "oracle: parameter length " + std::to_string(theta.size()) + " != " +
                                     std::to_string(dim()));
}

void ModelOracle::check_batch(std::size_t batch) const {
  require(batch == kFullBatch || batch < batch_count(), "oracle: batch id " + std::to_string(batch) + " out of range");
}

// ------------------------------------------------------------ quadratic

QuadraticOracle::QuadraticOracle(std::vector<double> spectrum, std::vector<double> b, std::vector<KronFactor> basis)
    : spectrum_(std::move(spectrum)), b_(std::move(b)), basis_(std::move(basis)) {
  require(!spectrum_.empty(), "QuadraticOracle: empty spectrum");
  if (b_.empty()) b_.assign(spectrum_.size(), 0.0);
  require(b_.size() == spectrum_.size(), "QuadraticOracle: b has the wrong length");
  if (!basis_.empty()) {
    std::size_t cols = 1;
    for (const auto& f : basis_) {
      require(factor_rows(f) == factor_cols(f), "QuadraticOracle: basis factors must be square");
      cols *= factor_cols(f);
    }
    require(cols == spectrum_.size(), "QuadraticOracle: basis does not match the spectrum length");
  }
}

QuadraticOracle QuadraticOracle::diagonal(std::vector<double> spectrum, std::vector<double> b) {
  return QuadraticOracle(std::move(spectrum), std::move(b));
}

QuadraticOracle QuadraticOracle::kron_haar(std::vector<double> spectrum, std::vector<double> b, std::uint64_t seed,
                                           std::size_t max_block) {
  const std::size_t n = spectrum.size();
  require(is_pow2(n), "QuadraticOracle::kron_haar: dimension must be a power of two");
  std::vector<KronFactor> basis;
  const auto blocks = compute_kron_shapes(n, max_block);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    Stream stream(seed, StreamTag::oracle, 1000 + k);
    basis.emplace_back(sample_haar_factor(blocks[k], blocks[k], stream));
  }
  QuadraticOracle q(std::move(spectrum), std::move(b), std::move(basis));
  q.seed_ = seed;
  q.max_block_ = max_block;
  return q;
}

std::vector<double> QuadraticOracle::apply(std::span<const double> u) const {
  check_theta(u);
  if (basis_.empty()) {
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = spectrum_[i] * u[i];
    return out;
  }
  auto c = kron_apply_transpose<double>(u, basis_);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= spectrum_[i];
  return kron_apply<double>(c, basis_);
}

double QuadraticOracle::loss(std::span<const double> theta, std::size_t batch) const {
  check_theta(theta);
  check_batch(batch);
  const auto a = apply(theta);
  return 0.5 * dot(theta, a) + dot(b_, theta);
}

std::vector<double> QuadraticOracle::gradient(std::span<const double> theta, std::size_t batch) const {
  check_theta(theta);
  check_batch(batch);
  auto g = apply(theta);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += b_[i];
  return g;
}

std::vector<double> QuadraticOracle::hvp(std::span<const double> theta, std::span<const double> u,
                                         std::size_t batch) const {
  check_theta(theta);
  check_batch(batch);
  return apply(u);
}

std::vector<double> QuadraticOracle::minimizer() const {
  for (double l : spectrum_) require(l != 0.0, "QuadraticOracle::minimizer: singular spectrum");
  if (basis_.empty()) {
    std::vector<double> out(b_.size());
    for (std::size_t i = 0; i < b_.size(); ++i) out[i] = -b_[i] / spectrum_[i];
    return out;
  }
  auto c = kron_apply_transpose<double>(b_, basis_);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = -c[i] / spectrum_[i];
  return kron_apply<double>(c, basis_);
}

std::vector<double> QuadraticOracle::eigenvalues_descending() const {
  std::vector<double> out = spectrum_;
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

nlohmann::json QuadraticOracle::describe() const {
  nlohmann::json j = {{"oracle", "quadratic"}, {"n", dim()}, {"basis", basis_.empty() ? "diagonal" : "kron_haar"}};
  if (!basis_.empty()) {
    j["seed"] = seed_;
    j["max_block"] = max_block_;
  }
  return j;
}

std::vector<double> planted_spectrum(std::size_t n, std::span<const double> outliers, double c, double alpha,
                                     std::span<const double> negatives) {
  require(n >= 1, "planted_spectrum: n must be positive");
  std::vector<double> out(outliers.begin(), outliers.end());
  out.insert(out.end(), negatives.begin(), negatives.end());
  for (std::size_t i = 1; out.size() < n; ++i) out.push_back(c * std::pow(static_cast<double>(i), -alpha));
  out.resize(n);
  return out;
}

// ------------------------------------------------------------- logistic

LogisticOracle::LogisticOracle(std::size_t dim, std::vector<double> features, std::vector<int> labels, double ridge)
    : dim_(dim), features_(std::move(features)), labels_(std::move(labels)), ridge_(ridge) {
  require(dim_ >= 1, "LogisticOracle: dimension must be positive");
  require(!labels_.empty(), "LogisticOracle: no examples");
  require(features_.size() == dim_ * labels_.size(), "LogisticOracle: feature matrix has the wrong size");
  require(ridge_ >= 0.0, "LogisticOracle: ridge must be non-negative");
  for (int y : labels_) require(y == 0 || y == 1, "LogisticOracle: labels must be 0 or 1");
  layers_ = {{0, dim_}};
  description_ = {{"oracle", "logistic"}, {"n", dim_}, {"examples", labels_.size()}, {"ridge", ridge_}};
}

LogisticOracle LogisticOracle::synthetic(const LogisticConfig& cfg) {
  require(cfg.dim >= 1 && cfg.examples >= 2, "LogisticOracle: need dim >= 1 and at least two examples");
  require(cfg.blocks >= 1 && cfg.dim % cfg.blocks == 0, "LogisticOracle: blocks must divide dim");
  require(cfg.rank >= 1, "LogisticOracle: rank must be positive");
  require(cfg.scale_min > 0 && cfg.scale_max >= cfg.scale_min, "LogisticOracle: bad scale range");
  require(cfg.shared >= 0.0 && cfg.shared <= 1.0, "LogisticOracle: shared weight must lie in [0, 1]");
  require(cfg.noise >= 0.0, "LogisticOracle: noise must be non-negative");

  const std::size_t m = cfg.examples;
  const std::size_t n = cfg.dim;
  const std::size_t width = n / cfg.blocks;
  const std::size_t k = cfg.rank;
  const double shared_w = cfg.shared;
  const double private_w = std::sqrt(1.0 - cfg.shared * cfg.shared);

  std::vector<double> shared(m * k);
  {
    Stream s(cfg.seed, StreamTag::oracle, 0);
    for (auto& v : shared) v = s.normal();
  }
  std::vector<double> x(m * n, 0.0);
  std::vector<double> coeff(k);
  for (std::size_t l = 0; l < cfg.blocks; ++l) {
    const double t = cfg.blocks == 1 ? 0.0 : static_cast<double>(l) / static_cast<double>(cfg.blocks - 1);
    const double scale = cfg.scale_min * std::pow(cfg.scale_max / cfg.scale_min, t);
    Stream s(cfg.seed, StreamTag::oracle, 1 + l);
    // Block loadings U_l: k x width, columns of unit expected norm.
    std::vector<double> u = s.normals(k * width);
    const double u_scale = scale / std::sqrt(static_cast<double>(width));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t r = 0; r < k; ++r) coeff[r] = shared_w * shared[i * k + r] + private_w * s.normal();
      double* row = x.data() + i * n + l * width;
      for (std::size_t r = 0; r < k; ++r) {
        const double c = coeff[r] * u_scale;
        const double* ur = u.data() + r * width;
        for (std::size_t j = 0; j < width; ++j) row[j] += c * ur[j];
      }
    }
  }
  {
    Stream s(cfg.seed, StreamTag::oracle, 1 + cfg.blocks);
    const double noise = cfg.noise / std::sqrt(static_cast<double>(n));
    for (auto& v : x) v += noise * s.normal();
  }
  std::vector<int> labels(m);
  {
    Stream s(cfg.seed, StreamTag::oracle, 2 + cfg.blocks);
    for (auto& y : labels) y = static_cast<int>(s.bits() >> 63);
  }

  LogisticOracle out(n, std::move(x), std::move(labels), cfg.ridge);
  out.layers_.clear();
  for (std::size_t l = 0; l < cfg.blocks; ++l) out.layers_.emplace_back(l * width, (l + 1) * width);
  out.description_ = {{"oracle", "logistic"},   {"n", n},
                      {"examples", m},          {"blocks", cfg.blocks},
                      {"rank", cfg.rank},       {"scale_min", cfg.scale_min},
                      {"scale_max", cfg.scale_max}, {"shared", cfg.shared},
                      {"noise", cfg.noise},     {"ridge", cfg.ridge},
                      {"seed", cfg.seed}};
  return out;
}

std::span<const double> LogisticOracle::features(std::size_t example) const {
  require(example < labels_.size(), "LogisticOracle: example out of range");
  return std::span<const double>(features_).subspan(example * dim_, dim_);
}

double LogisticOracle::loss(std::span<const double> theta, std::size_t batch) const {
  check_theta(theta);
  check_batch(batch);
  const double reg = 0.5 * ridge_ * dot(theta, theta);
  auto one = [&](std::size_t i) {
    const double w = dot(features(i), theta);
    return softplus(w) - labels_[i] * w;
  };
  if (batch != kFullBatch) return one(batch) + reg;
  double acc = 0.0;
  for (std::size_t i = 0; i < labels_.size(); ++i) acc += one(i);
  return acc / static_cast<double>(labels_.size()) + reg;
}

std::vector<double> LogisticOracle::gradient(std::span<const double> theta, std::size_t batch) const {
  check_theta(theta);
  check_batch(batch);
  std::vector<double> g(dim_);
  for (std::size_t j = 0; j < dim_; ++j) g[j] = ridge_ * theta[j];
  auto add = [&](std::size_t i, double weight) {
    const auto x = features(i);
    const double c = weight * (sigmoid(dot(x, theta)) - labels_[i]);
    for (std::size_t j = 0; j < dim_; ++j) g[j] += c * x[j];
  };
  if (batch != kFullBatch) {
    add(batch, 1.0);
  } else {
    for (std::size_t i = 0; i < labels_.size(); ++i) add(i, 1.0 / static_cast<double>(labels_.size()));
  }
  return g;
}

std::vector<double> LogisticOracle::hvp(std::span<const double> theta, std::span<const double> u,
                                        std::size_t batch) const {
  check_theta(theta);
  check_theta(u);
  check_batch(batch);
  std::vector<double> h(dim_);
  for (std::size_t j = 0; j < dim_; ++j) h[j] = ridge_ * u[j];
  auto add = [&](std::size_t i, double weight) {
    const auto x = features(i);
    const double p = sigmoid(dot(x, theta));
    const double c = weight * p * (1.0 - p) * dot(x, u);
    for (std::size_t j = 0; j < dim_; ++j) h[j] += c * x[j];
  };
  if (batch != kFullBatch) {
    add(batch, 1.0);
  } else {
    for (std::size_t i = 0; i < labels_.size(); ++i) add(i, 1.0 / static_cast<double>(labels_.size()));
  }
  return h;
}

nlohmann::json LogisticOracle::describe() const { return description_; }

// --------------------------------------------------------------- planted

PlantedSubspaceOracle::PlantedSubspaceOracle(std::size_t dim, std::size_t planted_dim, std::uint64_t seed)
    : dim_(dim), planted_(planted_dim), seed_(seed) {
  require(planted_dim >= 1 && planted_dim <= dim, "PlantedSubspaceOracle: need 1 <= planted_dim <= dim");
  const auto n = static_cast<Eigen::Index>(dim);
  const auto d = static_cast<Eigen::Index>(planted_dim);
  Stream s(seed, StreamTag::oracle, 0);
  Eigen::MatrixXd g(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = s.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, d);
  basis_.resize(dim * planted_dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) basis_[static_cast<std::size_t>(i * d + j)] = q(i, j);
  Stream t(seed, StreamTag::oracle, 1);
  target_ = t.normals(planted_dim);
}

std::vector<double> PlantedSubspaceOracle::project(std::span<const double> u) const {
  check_theta(u);
  std::vector<double> out(planted_, 0.0);
  for (std::size_t i = 0; i < dim_; ++i) {
    const double ui = u[i];
    const double* row = basis_.data() + i * planted_;
    for (std::size_t j = 0; j < planted_; ++j) out[j] += row[j] * ui;
  }
  return out;
}

std::vector<double> PlantedSubspaceOracle::lift(std::span<const double> w) const {
  require(w.size() == planted_, "PlantedSubspaceOracle::lift: length mismatch");
  std::vector<double> out(dim_);
  for (std::size_t i = 0; i < dim_; ++i) out[i] = dot(std::span<const double>(basis_).subspan(i * planted_, planted_), w);
  return out;
}

double PlantedSubspaceOracle::loss(std::span<const double> theta, std::size_t batch) const {
  check_batch(batch);
  auto r = project(theta);
  double acc = 0.0;
  for (std::size_t j = 0; j < planted_; ++j) acc += (r[j] - target_[j]) * (r[j] - target_[j]);
  return acc;
}

std::vector<double> PlantedSubspaceOracle::gradient(std::span<const double> theta, std::size_t batch) const {
  check_batch(batch);
  auto r = project(theta);
  for (std::size_t j = 0; j < planted_; ++j) r[j] = 2.0 * (r[j] - target_[j]);
  return lift(r);
}

std::vector<double> PlantedSubspaceOracle::hvp(std::span<const double> theta, std::span<const double> u,
                                               std::size_t batch) const {
  check_theta(theta);
  check_batch(batch);
  auto r = project(u);
  for (auto& v : r) v *= 2.0;
  return lift(r);
}

nlohmann::json PlantedSubspaceOracle::describe() const {
  return {{"oracle", "planted"}, {"n", dim_}, {"planted_dim", planted_}, {"seed", seed_}};
}

// ------------------------------------------------------ finite differences

FiniteDifferenceReport finite_difference_check(const ModelOracle& oracle, std::span<const double> theta,
                                               double tolerance, std::size_t batch, double step, std::size_t probes,
                                               std::uint64_t seed) {
  FiniteDifferenceReport report;
  const std::size_t n = oracle.dim();
  for (double v : theta) require(std::isfinite(v), "finite_difference_check: non-finite parameters");
  require(step > 0.0, "finite_difference_check: step must be positive");
  const auto g = oracle.gradient(theta, batch);
  const double gnorm = std::max(norm(g), 1e-300);

  std::vector<double> plus(theta.begin(), theta.end());
  std::vector<double> minus(theta.begin(), theta.end());
  auto central_loss = [&](std::span<const double> dir) {
    for (std::size_t i = 0; i < n; ++i) {
      plus[i] = theta[i] + step * dir[i];
      minus[i] = theta[i] - step * dir[i];
    }
    return (oracle.loss(plus, batch) - oracle.loss(minus, batch)) / (2.0 * step);
  };

  Stream stream(seed, StreamTag::test_vectors);
  auto random_unit = [&] {
    auto u = stream.normals(n);
    const double s = norm(u);
    for (auto& v : u) v /= s;
    return u;
  };

  if (n <= 256) {
    // Every coordinate: the full finite-difference gradient.
    std::vector<double> fd(n);
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      e[j] = 1.0;
      fd[j] = central_loss(e);
      e[j] = 0.0;
    }
    double diff = 0.0;
    for (std::size_t j = 0; j < n; ++j) diff += (fd[j] - g[j]) * (fd[j] - g[j]);
    report.gradient_error = std::sqrt(diff) / gnorm;
  } else {
    for (std::size_t p = 0; p < probes; ++p) {
      const auto u = random_unit();
      report.gradient_error = std::max(report.gradient_error, std::abs(central_loss(u) - dot(g, u)) / gnorm);
    }
  }

  for (std::size_t p = 0; p < probes; ++p) {
    const auto u = random_unit();
    const auto w = random_unit();
    for (std::size_t i = 0; i < n; ++i) {
      plus[i] = theta[i] + step * u[i];
      minus[i] = theta[i] - step * u[i];
    }
    const auto gp = oracle.gradient(plus, batch);
    const auto gm = oracle.gradient(minus, batch);
    const auto hu = oracle.hvp(theta, u, batch);
    const auto hw = oracle.hvp(theta, w, batch);
    const double hnorm = std::max(norm(hu), 1e-300);
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fd = (gp[i] - gm[i]) / (2.0 * step);
      diff += (fd - hu[i]) * (fd - hu[i]);
    }
    report.hvp_error = std::max(report.hvp_error, std::sqrt(diff) / hnorm);
    const double a = dot(hu, w);
    const double b = dot(u, hw);
    report.hvp_asymmetry = std::max(report.hvp_asymmetry, std::abs(a - b) / std::max(hnorm, norm(hw)));
  }

  if (report.gradient_error > tolerance)
    report.failures.push_back("gradient error " + std::to_string(report.gradient_error));
  if (report.hvp_error > tolerance) report.failures.push_back("hvp error " + std::to_string(report.hvp_error));
  if (report.hvp_asymmetry > 1e-8) report.failures.push_back("hvp asymmetry " + std::to_string(report.hvp_asymmetry));
  report.passed = report.failures.empty();
  return report;
}

}  // namespace kronsketch
