#include "kronsketch/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kronsketch/errors.hpp"

namespace kronsketch {

using detail::require;

KrylovResult arnoldi(const LinearOperator& op, std::size_t dim, std::size_t m, std::uint64_t seed) {
  require(dim >= 1, "arnoldi: operator dimension must be positive");
  require(m >= 1 && m <= dim, "arnoldi: iteration count " + std::to_string(m) + " outside [1, " +
                                  std::to_string(dim) + "]");
  const auto n = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd q(n, static_cast<Eigen::Index>(m) + 1);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m) + 1, static_cast<Eigen::Index>(m));

  Stream stream(seed, StreamTag::start_vector);
  Eigen::VectorXd start(n);
  for (Eigen::Index i = 0; i < n; ++i) start(i) = stream.normal();
  q.col(0) = start / start.norm();

  KrylovResult out;
  std::vector<double> in(dim);
  std::size_t done = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    Eigen::Map<Eigen::VectorXd>(in.data(), n) = q.col(jj);
    const auto image = op(in);
    require(image.size() == dim, "arnoldi: operator returned the wrong length");
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(image.data(), n);
    if (!w.allFinite()) throw NumericError("arnoldi: operator output is not finite", j);
    const double image_norm = w.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i <= jj; ++i) {
        const double c = q.col(i).dot(w);
        w -= c * q.col(i);
        h(i, jj) += c;
      }
    }
    const double r = w.norm();
    h(jj + 1, jj) = r;
    done = j + 1;
    if (r <= kBreakdownTolerance * image_norm) {
      out.breakdown = true;
      q.col(jj + 1).setZero();
      break;
    }
    q.col(jj + 1) = w / r;
  }

  const auto mm = static_cast<Eigen::Index>(done);
  out.m = done;
  out.basis = q.leftCols(mm);
  out.next_vector = q.col(mm);
  out.hessenberg = h.topLeftCorner(mm + 1, mm);
  out.ritz_values = ritz_from_hessenberg(out.hessenberg.topRows(mm));
  return out;
}

KrylovResult arnoldi(const SketchedOperator& op, std::size_t m, std::uint64_t seed) {
  return arnoldi([&op](std::span<const double> v) { return apply_sketched_operator(op, v); }, op.dim(), m, seed);
}

std::vector<double> ritz_from_hessenberg(const Eigen::MatrixXd& block) {
  require(block.rows() == block.cols() && block.rows() >= 1, "ritz_from_hessenberg: need a non-empty square block");
  if (!block.allFinite()) throw NumericError("ritz_from_hessenberg: non-finite entries", static_cast<std::size_t>(block.rows()));
  const double scale = std::max(block.cwiseAbs().maxCoeff(), 1e-300);
  std::vector<double> values;
  if ((block - block.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * scale) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((block + block.transpose()) / 2, Eigen::EigenvaluesOnly);
    values.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  } else {
    Eigen::EigenSolver<Eigen::MatrixXd> es(block, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) values.push_back(es.eigenvalues()(i).real());
  }
  std::sort(values.begin(), values.end(), std::greater<>());
  return values;
}

double relative_mae(std::span<const double> estimate, std::span<const double> truth) {
  require(estimate.size() == truth.size() && !truth.empty(), "relative_mae: lengths differ or are zero");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i] != 0.0, "relative_mae: zero true eigenvalue");
    acc += std::abs(estimate[i] - truth[i]) / std::abs(truth[i]);
  }
  return acc / static_cast<double>(truth.size());
}

SpectrumReport spectrum_report(std::span<const double> ritz_values, std::size_t k, double outlier_threshold) {
  require(outlier_threshold > 0.0 && outlier_threshold < 1.0, "spectrum_report: threshold must lie in (0, 1)");
  SpectrumReport r;
  r.threshold = outlier_threshold;
  std::vector<double> v(ritz_values.begin(), ritz_values.end());
  std::sort(v.begin(), v.end(), std::greater<>());
  for (double x : v)
    if (x > 0.0 && r.top_positive.size() < k) r.top_positive.push_back(x);
  if (!v.empty() && v.back() < 0.0) r.top_negative = v.back();
  if (!v.empty() && v.front() > 0.0) {
    const double top = v.front();
    r.rneg = r.top_negative ? std::abs(*r.top_negative) / top : 0.0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] / top > outlier_threshold) ++r.outliers;
  }
  return r;
}

nlohmann::json spectrum_json(const KrylovResult& result, const SpectrumReport& report, const SketchSpec& spec,
                             std::uint64_t arnoldi_seed) {
  nlohmann::json j;
  j["ritz"] = result.ritz_values;
  j["rneg"] = report.rneg ? nlohmann::json(*report.rneg) : nlohmann::json(nullptr);
  j["outliers"] = report.outliers;
  j["m"] = result.m;
  j["d"] = spec.d;
  j["algorithm"] = std::string(to_string(spec.algorithm));
  j["seed"] = spec.seed;
  j["arnoldi_seed"] = arnoldi_seed;
  return j;
}

double ritz_alignment(const KrylovResult& result, std::span<const double> g, std::size_t count) {
  const auto d = result.basis.rows();
  require(static_cast<Eigen::Index>(g.size()) == d, "ritz_alignment: vector length mismatch");
  require(count >= 1 && count <= result.m, "ritz_alignment: count outside [1, m]");
  const auto mm = static_cast<Eigen::Index>(result.m);
  const Eigen::MatrixXd t = result.hessenberg.topRows(mm);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((t + t.transpose()) / 2);
  // Eigen sorts ascending: the largest Ritz pairs are the last columns.
  const Eigen::MatrixXd vectors = result.basis * es.eigenvectors().rightCols(static_cast<Eigen::Index>(count));
  const Eigen::Map<const Eigen::VectorXd> gv(g.data(), d);
  const double total = gv.squaredNorm();
  require(total > 0.0, "ritz_alignment: zero vector");
  return (vectors.transpose() * gv).squaredNorm() / total;
}

QuadraticOracle make_eigen_oracle(const EigenExperiment& e) {
  require(e.k >= 1 && e.k <= e.n, "eigen experiment: k outside [1, n]");
  return QuadraticOracle::kron_haar(planted_spectrum(e.n, e.outliers, e.c, e.alpha), {}, e.oracle_seed,
                                    e.basis_block);
}

EigenRow run_eigen_experiment(const EigenExperiment& e, const std::shared_ptr<const ModelOracle>& oracle,
                              std::span<const double> truth_descending, const SketchSpec& spec) {
  require(spec.n == oracle->dim(), "eigen experiment: sketch input dimension differs from the model");
  require(truth_descending.size() >= e.k, "eigen experiment: fewer true eigenvalues than k");
  SketchedOperator op(Sketcher(spec), oracle, std::vector<double>(oracle->dim(), 0.0));
  const auto r = arnoldi(op, std::min(e.m, spec.d), spec.seed);
  require(r.ritz_values.size() >= e.k, "eigen experiment: Arnoldi produced fewer than k Ritz values");
  EigenRow row;
  row.d = spec.d;
  row.seed = spec.seed;
  row.m = r.m;
  row.top.assign(r.ritz_values.begin(), r.ritz_values.begin() + static_cast<std::ptrdiff_t>(e.k));
  row.truth.assign(truth_descending.begin(), truth_descending.begin() + static_cast<std::ptrdiff_t>(e.k));
  row.mae = relative_mae(row.top, row.truth);
  row.report = spectrum_report(r.ritz_values, e.k);
  return row;
}

}  // namespace kronsketch
