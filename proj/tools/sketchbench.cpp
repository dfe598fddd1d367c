// sketchbench: quality, timing, spectrum, intrinsic-dimension and attribution
// sweeps over the sketch library. Reports are CSV or JSON with the full run
// configuration embedded so any non-timing column can be reproduced.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kronsketch/errors.hpp"
#include "kronsketch/intrinsic.hpp"
#include "kronsketch/perf.hpp"
#include "kronsketch/skvb.hpp"
#include "kronsketch/spectral.hpp"
#include "kronsketch/tda.hpp"

using namespace kronsketch;
using nlohmann::json;

namespace {

enum class Format { csv, json };

struct RunConfig {
  std::string subcommand;
  std::vector<std::string> algorithms;
  std::optional<std::size_t> n;
  std::vector<std::size_t> d;
  std::uint64_t seed = 0;
  std::size_t seeds = 1;
  std::string oracle;
  std::vector<std::string> oracle_params;
  std::string out;
  std::string format = "csv";
  std::string precision = "f64";
  unsigned threads = 1;
  std::string vectors;

  // quality / tda
  std::size_t pairs = 4096;
  double eps = 0.2;
  std::size_t jl_vectors = 1000;
  std::size_t jl_nonzeros = 256;
  double threshold = 0.95;
  std::string scores;
  // perf
  std::size_t warmup = kWarmupRuns;
  std::size_t repeats = kTimedRuns;
  bool baseline = true;
  // eigen
  std::size_t m = 64;
  std::size_t k = 10;
  // intdim
  std::size_t d_min = 16;
  std::size_t d_max = 1024;
  std::size_t c = 100;
  double delta = 0.01;
  double tau = 0.9;
  double lr = 0.4;
  bool verify = true;
};

// ---------------------------------------------------------------- reports

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;
};

std::string cell_text(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void write_report(const RunConfig& rc, const json& config, const std::optional<json>& host,
                  const std::vector<Table>& tables) {
  std::ostringstream os;
  if (rc.format == "json") {
    json doc;
    doc["config"] = config;
    if (host) doc["host"] = *host;
    for (const auto& t : tables) {
      auto& arr = doc["tables"][t.name] = json::array();
      for (const auto& row : t.rows) {
        json obj;
        for (std::size_t i = 0; i < t.columns.size(); ++i) obj[t.columns[i]] = row[i];
        arr.push_back(obj);
      }
    }
    os << doc.dump(2) << '\n';
  } else {
    os << "# config: " << config.dump() << '\n';
    if (host) os << "# host: " << host->dump() << '\n';
    for (std::size_t ti = 0; ti < tables.size(); ++ti) {
      const auto& t = tables[ti];
      if (ti) os << '\n';
      os << "# table: " << t.name << '\n';
      for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
      os << '\n';
      for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << cell_text(row[i]);
        os << '\n';
      }
    }
  }
  if (rc.out.empty() || rc.out == "-") {
    std::cout << os.str();
  } else {
    std::ofstream f(rc.out);
    if (!f) throw InvalidArgument("cannot open output file " + rc.out);
    f << os.str();
  }
}

// ---------------------------------------------------------------- helpers

template <typename F>
void parallel_cells(std::size_t count, unsigned threads, F&& f) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::map<std::string, std::string> parse_params(const std::vector<std::string>& raw) {
  std::map<std::string, std::string> out;
  for (const auto& p : raw) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidArgument("--oracle-param expects key=value, got '" + p + "'");
    out[p.substr(0, eq)] = p.substr(eq + 1);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw InvalidArgument("oracle parameter " + key + ": '" + v + "' is not a number");
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x < 0 || x != std::floor(x)) throw InvalidArgument("oracle parameter " + key + " must be a non-negative integer");
  return static_cast<std::size_t>(x);
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ':');) out.push_back(to_double(key, item));
  return out;
}

void reject_unknown(const std::map<std::string, std::string>& params, std::initializer_list<const char*> known) {
  for (const auto& [k, v] : params) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw InvalidArgument("unknown oracle parameter '" + k + "'");
  }
}

LogisticConfig logistic_config(const RunConfig& rc, std::size_t n) {
  LogisticConfig cfg;
  cfg.dim = n;
  const auto p = parse_params(rc.oracle_params);
  reject_unknown(p, {"examples", "blocks", "rank", "scale_min", "scale_max", "shared", "noise", "ridge", "seed"});
  for (const auto& [k, v] : p) {
    if (k == "examples") cfg.examples = to_size(k, v);
    if (k == "blocks") cfg.blocks = to_size(k, v);
    if (k == "rank") cfg.rank = to_size(k, v);
    if (k == "scale_min") cfg.scale_min = to_double(k, v);
    if (k == "scale_max") cfg.scale_max = to_double(k, v);
    if (k == "shared") cfg.shared = to_double(k, v);
    if (k == "noise") cfg.noise = to_double(k, v);
    if (k == "ridge") cfg.ridge = to_double(k, v);
    if (k == "seed") cfg.seed = to_size(k, v);
  }
  return cfg;
}

EigenExperiment eigen_config(const RunConfig& rc, std::size_t n) {
  EigenExperiment e;
  e.n = n;
  e.m = rc.m;
  e.k = rc.k;
  const auto p = parse_params(rc.oracle_params);
  reject_unknown(p, {"outliers", "c", "alpha", "basis_block", "seed"});
  for (const auto& [k, v] : p) {
    if (k == "outliers") e.outliers = to_list(k, v);
    if (k == "c") e.c = to_double(k, v);
    if (k == "alpha") e.alpha = to_double(k, v);
    if (k == "basis_block") e.basis_block = to_size(k, v);
    if (k == "seed") e.oracle_seed = to_size(k, v);
  }
  return e;
}

std::vector<Algorithm> algorithms(const RunConfig& rc, std::initializer_list<Algorithm> defaults) {
  std::vector<Algorithm> out;
  for (const auto& a : rc.algorithms) out.push_back(parse_algorithm(a));
  if (out.empty()) out.assign(defaults);
  return out;
}

std::vector<std::size_t> dims(const RunConfig& rc, std::initializer_list<std::size_t> defaults) {
  std::vector<std::size_t> out = rc.d.empty() ? std::vector<std::size_t>(defaults) : rc.d;
  for (auto d : out)
    if (d == 0) throw InvalidArgument("--d must be positive");
  return out;
}

SketchSpec make_spec(Algorithm a, std::size_t n, std::size_t d, std::uint64_t seed) {
  SketchSpec s;
  s.algorithm = a;
  s.n = n;
  s.d = d;
  s.seed = seed;
  return s;
}

std::size_t next_pow2(std::size_t n) { return std::bit_ceil(n); }

std::size_t pair_budget(std::size_t requested, std::size_t examples) {
  return std::min(requested, examples * (examples - 1) / 2);
}

json base_config(const RunConfig& rc) {
  json j;
  j["subcommand"] = rc.subcommand;
  j["seed"] = rc.seed;
  j["seeds"] = rc.seeds;
  j["precision"] = rc.precision;
  j["format"] = rc.format;
  j["threads"] = rc.threads;
  if (!rc.vectors.empty()) j["vectors"] = rc.vectors;
  return j;
}

std::vector<std::string> names(const std::vector<Algorithm>& as) {
  std::vector<std::string> out;
  for (auto a : as) out.emplace_back(to_string(a));
  return out;
}

GradientTable sketch_rows(const Sketcher& sk, const GradientTable& g, Precision p) {
  if (p == Precision::f64) return sketch_gradients(sk, g);
  GradientTable t;
  t.examples = g.examples;
  t.dim = sk.target_dim();
  t.values.resize(t.examples * t.dim);
  std::vector<float> xf(g.dim);
  for (std::size_t i = 0; i < g.examples; ++i) {
    const auto row = g.row(i);
    std::copy(row.begin(), row.end(), xf.begin());
    const auto y = sk.forward<float>(xf);
    std::copy(y.begin(), y.end(), t.values.begin() + static_cast<std::ptrdiff_t>(i * t.dim));
  }
  return t;
}

double failure_rate(const Sketcher& sk, const std::vector<std::vector<double>>& vs, double eps, Precision p) {
  if (p == Precision::f64) return jl_failure_rate(sk, vs, eps);
  std::size_t fails = 0;
  std::vector<float> xf;
  for (const auto& x : vs) {
    xf.assign(x.begin(), x.end());
    const auto y = sk.forward<float>(xf);
    double s = 0;
    for (float v : y) s += static_cast<double>(v) * v;
    if (std::abs(std::sqrt(s) - 1.0) >= eps) ++fails;
  }
  return static_cast<double>(fails) / static_cast<double>(vs.size());
}

std::vector<std::vector<double>> load_vectors(const std::string& path) {
  std::vector<std::vector<double>> out;
  for (auto& r : read_skvb_file(path)) out.push_back(std::move(r.values));
  if (out.empty()) throw InvalidArgument("--vectors file " + path + " holds no records");
  for (const auto& v : out)
    if (v.size() != out.front().size()) throw InvalidArgument("--vectors records must share one length");
  return out;
}

std::vector<std::vector<double>> normalized(std::vector<std::vector<double>> vs) {
  for (auto& v : vs) {
    double s = 0;
    for (double x : v) s += x * x;
    if (!(s > 0)) throw InvalidArgument("--vectors contains a zero vector");
    const double inv = 1.0 / std::sqrt(s);
    for (auto& x : v) x *= inv;
  }
  return vs;
}

GradientTable table_from(const std::vector<std::vector<double>>& vs) {
  GradientTable g;
  g.examples = vs.size();
  g.dim = vs.front().size();
  for (const auto& v : vs) g.values.insert(g.values.end(), v.begin(), v.end());
  return g;
}

// --------------------------------------------------------------- commands

// (algorithm, d, seed) cells; "identity" is square QK, an orthogonal map.
struct Cell {
  std::string name;
  Algorithm algorithm;
  std::size_t d;
  std::uint64_t seed;
};

void cmd_quality(const RunConfig& rc) {
  const Precision prec = parse_precision(rc.precision);
  const auto algs = algorithms(rc, {Algorithm::affd, Algorithm::afjl, Algorithm::qk});
  const auto ds = dims(rc, {1u << 8, 1u << 10, 1u << 12, 1u << 14});

  GradientTable grads;
  std::vector<std::vector<double>> jl;
  json config = base_config(rc);
  if (!rc.vectors.empty()) {
    const auto vs = load_vectors(rc.vectors);
    grads = table_from(vs);
    jl = normalized(vs);
    config["oracle"] = "vectors";
  } else {
    const std::size_t n = rc.n.value_or(1u << 14);
    const auto cfg = logistic_config(rc, n);
    const auto o = LogisticOracle::synthetic(cfg);
    grads = per_example_gradients(o, std::vector<double>(n, 0.0), rc.threads);
    jl = sparse_unit_vectors(n, rc.jl_vectors, std::min(rc.jl_nonzeros, n), rc.seed);
    config["oracle"] = o.describe();
    config["theta"] = "zeros";
    config["jl_vectors"] = {{"count", rc.jl_vectors}, {"nonzeros", std::min(rc.jl_nonzeros, n)}, {"seed", rc.seed}};
  }
  const std::size_t n = grads.dim;
  config["n"] = n;
  config["algorithms"] = names(algs);
  config["d"] = ds;
  const std::size_t pairs = pair_budget(rc.pairs, grads.examples);
  config["pairs"] = pairs;
  config["eps"] = rc.eps;
  config["identity_row"] = "qk with d = padded n";

  std::vector<Cell> cells;
  cells.push_back({"identity", Algorithm::qk, next_pow2(n), rc.seed});
  for (auto a : algs)
    for (auto d : ds)
      for (std::size_t s = 0; s < rc.seeds; ++s) cells.push_back({std::string(to_string(a)), a, d, rc.seed + s});
  std::vector<std::vector<json>> rows(cells.size());
  parallel_cells(cells.size(), rc.threads, [&](std::size_t i) {
    const auto& c = cells[i];
    const Sketcher sk(make_spec(c.algorithm, n, c.d, c.seed));
    const double r = correlation_harness(grads, sketch_rows(sk, grads, prec), pairs, c.seed).r;
    rows[i] = {c.name, n, c.d, c.seed, r, failure_rate(sk, jl, rc.eps, prec)};
  });
  write_report(rc, config, std::nullopt, {{"quality", {"algorithm", "n", "d", "seed", "r", "jl_failure_rate"}, rows}});
}

void cmd_perf(const RunConfig& rc) {
  const Precision prec = parse_precision(rc.precision);
  const auto algs = algorithms(rc, {Algorithm::affd, Algorithm::qk});
  const auto ds = dims(rc, {1u << 12, 1u << 18});
  std::size_t n = rc.n.value_or(1u << 20);
  json config = base_config(rc);
  if (!rc.vectors.empty()) {
    // Only the length matters for timing; the input itself is a fixed
    // Gaussian so that runs stay comparable.
    n = load_vectors(rc.vectors).front().size();
    config["n_from_vectors"] = true;
  }
  config["n"] = n;
  config["algorithms"] = names(algs);
  config["d"] = ds;
  config["baseline"] = rc.baseline ? json("chunked_dense") : json(nullptr);
  config["warmup"] = rc.warmup;
  config["repeats"] = rc.repeats;
  config["timing"] = "median wall time, steady clock, cells run one at a time";

  Table t{"perf", {"algorithm", "n", "d", "precision", "median_s", "min_s", "max_s"}, {}};
  auto add = [&](const PerfRow& r) {
    const auto [lo, hi] = std::minmax_element(r.timing.samples.begin(), r.timing.samples.end());
    t.rows.push_back({r.algorithm, r.n, r.d, std::string(to_string(r.precision)), r.timing.median_seconds, *lo, *hi});
  };
  for (auto a : algs)
    for (auto d : ds) add(time_forward(make_spec(a, n, d, rc.seed), prec, rc.warmup, rc.repeats));
  if (rc.baseline)
    for (auto d : ds) add(time_chunked_dense(n, d, rc.seed, prec, rc.warmup, rc.repeats));
  write_report(rc, config, host_fingerprint(), {t});
}

void cmd_eigen(const RunConfig& rc) {
  if (rc.precision != "f64") throw InvalidArgument("eigen runs in f64 only");
  if (!rc.oracle.empty() && rc.oracle != "quadratic") throw InvalidArgument("eigen supports --oracle quadratic only");
  const auto algs = algorithms(rc, {Algorithm::affd});
  const auto ds = dims(rc, {1u << 8, 1u << 10});
  const auto e = eigen_config(rc, rc.n.value_or(1u << 12));
  const auto q = std::make_shared<QuadraticOracle>(make_eigen_oracle(e));
  const auto truth = q->eigenvalues_descending();

  json config = base_config(rc);
  config["oracle"] = q->describe();
  config["n"] = e.n;
  config["algorithms"] = names(algs);
  config["d"] = ds;
  config["m"] = e.m;
  config["k"] = e.k;
  config["spectrum"] = {{"outliers", e.outliers}, {"c", e.c}, {"alpha", e.alpha}};
  config["arnoldi_seed"] = "sketch seed";

  std::vector<Cell> cells;
  for (auto a : algs)
    for (auto d : ds)
      for (std::size_t s = 0; s < rc.seeds; ++s) cells.push_back({std::string(to_string(a)), a, d, rc.seed + s});
  std::vector<EigenRow> results(cells.size());
  parallel_cells(cells.size(), rc.threads, [&](std::size_t i) {
    results[i] = run_eigen_experiment(e, q, truth, make_spec(cells[i].algorithm, e.n, cells[i].d, cells[i].seed));
  });

  Table rows{"eigen", {"algorithm", "n", "d", "seed", "m", "relative_mae", "rneg", "outliers", "top", "truth"}, {}};
  std::map<std::pair<std::string, std::size_t>, std::pair<double, std::size_t>> means;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& r = results[i];
    rows.rows.push_back({cells[i].name, e.n, r.d, r.seed, r.m, r.mae,
                         r.report.rneg ? json(*r.report.rneg) : json(nullptr), r.report.outliers, json(r.top).dump(),
                         json(r.truth).dump()});
    auto& acc = means[{cells[i].name, r.d}];
    acc.first += r.mae;
    ++acc.second;
  }
  Table summary{"eigen_summary", {"algorithm", "d", "seeds", "mean_relative_mae"}, {}};
  for (auto a : algs)
    for (auto d : ds) {
      const auto& acc = means[{std::string(to_string(a)), d}];
      summary.rows.push_back({std::string(to_string(a)), d, acc.second, acc.first / acc.second});
    }
  write_report(rc, config, std::nullopt, {rows, summary});
}

int cmd_intdim(const RunConfig& rc) {
  if (rc.precision != "f64") throw InvalidArgument("intdim runs in f64 only");
  if (!rc.oracle.empty() && rc.oracle != "planted") throw InvalidArgument("intdim supports --oracle planted only");
  const auto algs = algorithms(rc, {Algorithm::affd});
  if (algs.size() != 1) throw InvalidArgument("intdim takes a single --algo");
  const std::size_t n = rc.n.value_or(1u << 12);
  const auto p = parse_params(rc.oracle_params);
  reject_unknown(p, {"planted", "seed"});
  const std::size_t planted = p.count("planted") ? to_size("planted", p.at("planted")) : 128;
  const std::size_t oracle_seed = p.count("seed") ? to_size("seed", p.at("seed")) : 100;

  SearchConfig sc;
  sc.d_min = rc.d_min;
  sc.d_max = rc.d_max;
  sc.c = rc.c;
  sc.delta = rc.delta;
  sc.tau_target = rc.tau;
  sc.lr = rc.lr;
  sc.algorithm = algs.front();
  sc.validate();

  json config = base_config(rc);
  config["n"] = n;
  config["algorithm"] = std::string(to_string(sc.algorithm));
  config["search"] = {{"d_min", sc.d_min}, {"d_max", sc.d_max}, {"c", sc.c},        {"delta", sc.delta},
                      {"tau_target", sc.tau_target}, {"lr", sc.lr}, {"max_windows", sc.max_windows}};
  config["metric"] = "(L(theta0) - L(theta)) / L(theta0), theta0 = 0";
  config["oracle_seed_rule"] = "oracle seed + run index";

  struct Outcome {
    std::optional<std::size_t> d_star;
    SearchTrace trace;
    std::optional<VerifyResult> verify;
    std::string error;
  };
  std::vector<Outcome> outcomes(rc.seeds);
  std::vector<json> oracles(rc.seeds);
  parallel_cells(rc.seeds, rc.threads, [&](std::size_t i) {
    PlantedSubspaceOracle o(n, planted, oracle_seed + i);
    oracles[i] = o.describe();
    const std::vector<double> theta0(n, 0.0);
    const auto metric = loss_reduction_metric(o, theta0, 0.0);
    SearchConfig cfg = sc;
    cfg.seed = rc.seed + i;
    auto& out = outcomes[i];
    try {
      auto r = search_intrinsic_dimension(o, metric, theta0, cfg);
      out.d_star = r.d_star;
      out.trace = std::move(r.trace);
      if (rc.verify && r.d_star >= 2 * cfg.d_min)
        out.verify = verify_half(o, metric, theta0, r.d_star, cfg, out.trace.points.back().step);
    } catch (const SearchExhausted& e) {
      out.trace = e.trace();
      out.error = e.what();
    }
  });
  config["oracles"] = oracles;

  Table summary{"intdim", {"run", "seed", "d_star", "windows", "final_metric", "verify_d", "verify_best_metric", "verify_passed", "error"}, {}};
  Table trace{"trace", {"run", "step", "active_d", "metric"}, {}};
  bool exhausted = false;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    exhausted = exhausted || !o.d_star;
    summary.rows.push_back({i, rc.seed + i, o.d_star ? json(*o.d_star) : json(nullptr), o.trace.points.size() - 1,
                            o.trace.points.back().metric, o.verify ? json(*o.d_star / 2) : json(nullptr),
                            o.verify ? json(o.verify->best_metric) : json(nullptr),
                            o.verify ? json(o.verify->passed) : json(nullptr), o.error});
    for (const auto& pt : o.trace.points) trace.rows.push_back({i, pt.step, pt.active_d, pt.metric});
  }
  write_report(rc, config, std::nullopt, {summary, trace});
  if (exhausted) {
    for (const auto& o : outcomes)
      if (!o.error.empty()) std::cerr << "sketchbench: " << o.error << '\n';
    return static_cast<int>(ErrorCode::search_exhausted);
  }
  return 0;
}

void cmd_tda(const RunConfig& rc) {
  const Precision prec = parse_precision(rc.precision);
  const auto algs = algorithms(rc, {Algorithm::affd, Algorithm::afjl, Algorithm::qk});
  const auto ds = dims(rc, {1u << 6, 1u << 8, 1u << 10, 1u << 12, 1u << 14});
  json config = base_config(rc);
  GradientTable grads;
  std::vector<CoordinateBlock> blocks;
  if (!rc.vectors.empty()) {
    grads = table_from(load_vectors(rc.vectors));
    blocks = {{0, grads.dim}};
    config["oracle"] = "vectors";
  } else {
    if (!rc.oracle.empty() && rc.oracle != "logistic") throw InvalidArgument("tda supports --oracle logistic only");
    const std::size_t n = rc.n.value_or(1u << 14);
    const auto o = LogisticOracle::synthetic(logistic_config(rc, n));
    grads = per_example_gradients(o, std::vector<double>(n, 0.0), rc.threads);
    blocks = o.layers();
    config["oracle"] = o.describe();
    config["theta"] = "zeros";
  }
  config["n"] = grads.dim;
  config["algorithms"] = names(algs);
  config["d"] = ds;
  const std::size_t pairs = pair_budget(rc.pairs, grads.examples);
  config["pairs"] = pairs;
  config["threshold"] = rc.threshold;

  std::vector<Cell> cells;
  for (auto a : algs)
    for (auto d : ds)
      for (std::size_t s = 0; s < rc.seeds; ++s) cells.push_back({std::string(to_string(a)), a, d, rc.seed + s});
  std::vector<double> rs(cells.size());
  std::optional<CorrelationResult> first;
  parallel_cells(cells.size(), rc.threads, [&](std::size_t i) {
    const Sketcher sk(make_spec(cells[i].algorithm, grads.dim, cells[i].d, cells[i].seed));
    auto res = correlation_harness(grads, sketch_rows(sk, grads, prec), pairs, cells[i].seed);
    rs[i] = res.r;
    if (i == 0) first = std::move(res);
  });

  Table sketched{"tda", {"algorithm", "n", "d", "seed", "r"}, {}};
  for (std::size_t i = 0; i < cells.size(); ++i)
    sketched.rows.push_back({cells[i].name, grads.dim, cells[i].d, cells[i].seed, rs[i]});

  Table minimal{"minimal_d", {"algorithm", "threshold", "seeds", "d"}, {}};
  for (auto a : algs) {
    std::vector<std::pair<std::size_t, double>> means;
    auto sorted = ds;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (auto d : sorted) {
      double acc = 0;
      std::size_t cnt = 0;
      for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i].algorithm == a && cells[i].d == d) {
          acc += rs[i];
          ++cnt;
        }
      means.emplace_back(d, acc / static_cast<double>(cnt));
    }
    const auto md = minimal_dimension(means, rc.threshold);
    minimal.rows.push_back({std::string(to_string(a)), rc.threshold, rc.seeds, md ? json(*md) : json(nullptr)});
  }

  Table layer{"layer_masked", {"block", "begin", "end", "r"}, {}};
  const auto per_block = layer_masked_correlation(grads, blocks, pairs, rc.seed);
  for (std::size_t b = 0; b < per_block.size(); ++b)
    layer.rows.push_back({b, per_block[b].block.first, per_block[b].block.second, per_block[b].r});

  if (!rc.scores.empty() && first) {
    std::ofstream f(rc.scores);
    if (!f) throw InvalidArgument("cannot open score dump " + rc.scores);
    f << score_dump_csv(*first, grads, blocks);
    config["scores"] = {{"path", rc.scores}, {"cell", 0}};
  }
  write_report(rc, config, std::nullopt, {sketched, minimal, layer});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sketch quality, timing, spectrum, intrinsic-dimension and attribution sweeps"};
  app.require_subcommand(1);
  RunConfig rc;

  auto common = [&rc](CLI::App* sub) {
    sub->add_option("--algo", rc.algorithms, "Algorithm(s): dense fjl ffd affd afjl qk")->delimiter(',');
    sub->add_option("--n", rc.n, "Input dimension N");
    sub->add_option("--d", rc.d, "Target dimension(s) D")->delimiter(',');
    sub->add_option("--seed", rc.seed, "Base seed");
    sub->add_option("--seeds", rc.seeds, "Seeds per cell, counting up from --seed")->check(CLI::PositiveNumber);
    sub->add_option("--oracle", rc.oracle, "Model oracle");
    sub->add_option("--oracle-param", rc.oracle_params, "Oracle parameter key=value (repeatable)");
    sub->add_option("--out", rc.out, "Output path (default stdout)");
    sub->add_option("--format", rc.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--precision", rc.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
    sub->add_option("--threads", rc.threads, "Worker threads for independent cells")->check(CLI::PositiveNumber);
    sub->add_option("--vectors", rc.vectors, "SKVB file with input vectors")->check(CLI::ExistingFile);
  };

  auto* quality = app.add_subcommand("quality", "TDA correlation and JL failure rate per (algorithm, D)");
  common(quality);
  quality->add_option("--pairs", rc.pairs, "Example pairs per cell");
  quality->add_option("--eps", rc.eps, "JL distortion threshold");
  quality->add_option("--jl-vectors", rc.jl_vectors, "Number of JL test vectors");
  quality->add_option("--jl-nonzeros", rc.jl_nonzeros, "Non-zeros per JL test vector");

  auto* perf = app.add_subcommand("perf", "forward() wall time over D, with the chunked dense baseline");
  common(perf);
  perf->add_option("--warmup", rc.warmup, "Untimed runs per cell");
  perf->add_option("--repeats", rc.repeats, "Timed runs per cell")->check(CLI::PositiveNumber);
  perf->add_flag("!--no-baseline", rc.baseline, "Skip the chunked dense baseline");

  auto* eigen = app.add_subcommand("eigen", "Sketched Arnoldi on the quadratic model");
  common(eigen);
  eigen->add_option("--m", rc.m, "Arnoldi iterations")->check(CLI::PositiveNumber);
  eigen->add_option("--k", rc.k, "Top eigenvalues compared")->check(CLI::PositiveNumber);

  auto* intdim = app.add_subcommand("intdim", "Doubling search for the intrinsic dimension");
  common(intdim);
  intdim->add_option("--d-min", rc.d_min, "Initial subspace dimension");
  intdim->add_option("--d-max", rc.d_max, "Sketch dimension and search bound");
  intdim->add_option("--c", rc.c, "Steps per window");
  intdim->add_option("--delta", rc.delta, "Minimum improvement per window");
  intdim->add_option("--tau", rc.tau, "Target metric");
  intdim->add_option("--lr", rc.lr, "SGD step size");
  intdim->add_flag("!--no-verify", rc.verify, "Skip the d*/2 verification run");

  auto* tda = app.add_subcommand("tda", "Sketched vs exact gradient dot products and layer restriction");
  common(tda);
  tda->add_option("--pairs", rc.pairs, "Example pairs per cell");
  tda->add_option("--threshold", rc.threshold, "r threshold for the minimal-D table");
  tda->add_option("--scores", rc.scores, "Write the first cell's score dump (CSV) here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorCode::invalid_argument);
  }

  try {
    if (quality->parsed()) {
      rc.subcommand = "quality";
      cmd_quality(rc);
    } else if (perf->parsed()) {
      rc.subcommand = "perf";
      cmd_perf(rc);
    } else if (eigen->parsed()) {
      rc.subcommand = "eigen";
      cmd_eigen(rc);
    } else if (intdim->parsed()) {
      rc.subcommand = "intdim";
      return cmd_intdim(rc);
    } else if (tda->parsed()) {
      rc.subcommand = "tda";
      cmd_tda(rc);
    }
  } catch (const Error& e) {
    std::cerr << "sketchbench: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::invalid_argument: return 2;
      case ErrorCode::search_exhausted: return 4;
      case ErrorCode::numeric_error:
      case ErrorCode::undefined_correlation: return 3;
    }
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "sketchbench: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
