#include "kronsketch/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <cstring>
#include <string>

#include "kronsketch/errors.hpp"
#include "kronsketch/simd.hpp"

namespace kronsketch {

using detail::require;

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::dense: return "dense";
    case Algorithm::fjl: return "fjl";
    case Algorithm::ffd: return "ffd";
    case Algorithm::affd: return "affd";
    case Algorithm::afjl: return "afjl";
    case Algorithm::qk: return "qk";
  }
  return "?";
}

std::string_view to_string(Preconditioner p) {
  switch (p) {
    case Preconditioner::hadamard: return "hadamard";
    case Preconditioner::fft: return "fft";
    case Preconditioner::kron_orthogonal: return "kron_orthogonal";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  for (auto a : kAllAlgorithms)
    if (to_string(a) == name) return a;
  throw InvalidArgument("unknown algorithm '" + std::string(name) + "'");
}

Preconditioner parse_preconditioner(std::string_view name) {
  for (auto p : {Preconditioner::hadamard, Preconditioner::fft, Preconditioner::kron_orthogonal})
    if (to_string(p) == name) return p;
  throw InvalidArgument("unknown preconditioner '" + std::string(name) + "'");
}

nlohmann::json spec_to_json(const SketchSpec& spec) {
  nlohmann::json j = {
      {"algorithm", std::string(to_string(spec.algorithm))},
      {"n", spec.n},
      {"d", spec.d},
      {"preconditioner", std::string(to_string(spec.preconditioner))},
      {"seed", spec.seed},
      {"m", spec.m},
  };
  if (spec.max_block != kDefaultMaxBlock) j["max_block"] = spec.max_block;
  return j;
}

SketchSpec spec_from_json(const nlohmann::json& j) {
  try {
    SketchSpec spec;
    spec.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    spec.n = j.at("n").get<std::size_t>();
    spec.d = j.at("d").get<std::size_t>();
    spec.preconditioner = parse_preconditioner(j.value("preconditioner", std::string("hadamard")));
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.m = j.value("m", std::size_t{4096});
    spec.max_block = j.value("max_block", kDefaultMaxBlock);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed sketch spec: ") + e.what());
  }
}

template <typename T>
std::vector<T> OrthogonalTransform::apply(std::span<const T> x, bool transpose) const {
  if (fourier) {
    std::vector<T> out(x.size());
    if (transpose)
      fourier->apply_transpose<T>(x, out);
    else
      fourier->apply<T>(x, out);
    return out;
  }
  if (factors.empty()) return std::vector<T>(x.begin(), x.end());
  return transpose ? kron_apply_transpose<T>(x, factors) : kron_apply<T>(x, factors);
}

template std::vector<float> OrthogonalTransform::apply<float>(std::span<const float>, bool) const;
template std::vector<double> OrthogonalTransform::apply<double>(std::span<const double>, bool) const;

// ------------------------------------------------------------------ build

namespace {

enum class MixerRole : std::uint64_t { plain = 0, pre = 1, post = 2 };

OrthogonalTransform make_mixer(const SketchSpec& spec, std::size_t padded, MixerRole role) {
  OrthogonalTransform t;
  switch (spec.preconditioner) {
    case Preconditioner::fft:
      t.fourier = std::make_shared<FourierPreconditioner>(padded);
      break;
    case Preconditioner::hadamard: {
      const auto blocks = compute_kron_shapes(padded, spec.max_block);
      const PermuteMode mode = role == MixerRole::pre    ? PermuteMode::rows
                               : role == MixerRole::post ? PermuteMode::cols
                                                         : PermuteMode::none;
      const StreamTag tag = role == MixerRole::post ? StreamTag::hadamard_post : StreamTag::hadamard_pre;
      for (std::size_t k = 0; k < blocks.size(); ++k) {
        Stream stream(spec.seed, tag, k);
        t.factors.emplace_back(HadamardFactor::sample(blocks[k], mode, stream));
      }
      break;
    }
    case Preconditioner::kron_orthogonal: {
      const auto blocks = compute_kron_shapes(padded, spec.max_block);
      for (std::size_t k = 0; k < blocks.size(); ++k) {
        Stream stream(spec.seed, StreamTag::preconditioner_factor, static_cast<std::uint64_t>(role) * 64 + k);
        t.factors.emplace_back(sample_haar_factor(blocks[k], blocks[k], stream));
      }
      break;
    }
  }
  return t;
}

std::vector<double> sample_signs(const SketchSpec& spec, std::size_t padded) {
  // The Haar preconditioner is applied without the sign diagonal.
  if (spec.preconditioner == Preconditioner::kron_orthogonal) return {};
  Stream stream(spec.seed, StreamTag::sign_diagonal);
  return stream.signs(padded);
}

SparseRows sample_sparse(const SketchSpec& spec, std::size_t padded) {
  const double log_m = std::log(static_cast<double>(spec.m));
  const double q = std::min(1.0, log_m * log_m / static_cast<double>(padded));
  const double value_scale = 1.0 / std::sqrt(q * static_cast<double>(padded));
  SparseRows s;
  s.offsets.push_back(0);
  for (std::size_t r = 0; r < spec.d; ++r) {
    Stream stream(spec.seed, StreamTag::sparse_matrix, r);
    if (q >= 1.0) {
      for (std::size_t c = 0; c < padded; ++c) {
        s.cols.push_back(static_cast<std::uint32_t>(c));
        s.values.push_back(stream.normal() * value_scale);
      }
    } else {
      // Bernoulli(q) per entry via geometric gaps.
      const double log_miss = std::log1p(-q);
      std::size_t c = 0;
      while (true) {
        const auto gap = static_cast<std::size_t>(std::floor(std::log(stream.uniform_open()) / log_miss));
        c += gap;
        if (c >= padded) break;
        s.cols.push_back(static_cast<std::uint32_t>(c));
        s.values.push_back(stream.normal() * value_scale);
        ++c;
      }
    }
    s.offsets.push_back(s.cols.size());
  }
  return s;
}

}  // namespace

struct Sketcher::Mirrors {
  std::vector<float> signs;
  std::vector<float> gaussian;
  std::vector<float> dense;
  std::vector<float> sparse_values;
  std::vector<std::vector<float>> ffd_signs;
  std::vector<std::vector<float>> ffd_gaussian;
};

Sketcher::Sketcher(const SketchSpec& spec) : spec_(spec) {
  require(spec.n >= 1, "sketch: input dimension must be positive");
  require(spec.d >= 1, "sketch: target dimension must be positive");
  require(is_pow2(spec.max_block) && spec.max_block >= 2, "sketch: max_block must be a power of two >= 2");

  auto c = std::make_shared<SketchComponents>();
  const std::size_t padded = spec.algorithm == Algorithm::dense ? spec.n : next_pow2(spec.n);
  c->padded_dim = padded;
  require(spec.d <= padded, "sketch: target dimension " + std::to_string(spec.d) + " exceeds input dimension " +
                                std::to_string(padded));
  c->sigma = std::sqrt(static_cast<double>(padded) / static_cast<double>(spec.d));
  if (spec.algorithm == Algorithm::dense || spec.algorithm == Algorithm::qk)
    require(spec.preconditioner == Preconditioner::hadamard,
            std::string(to_string(spec.algorithm)) + " takes no preconditioner");
  if (spec.preconditioner == Preconditioner::fft) require(padded >= 2, "sketch: fft needs input length >= 2");

  switch (spec.algorithm) {
    case Algorithm::dense: {
      Stream stream(spec.seed, StreamTag::dense_matrix);
      c->dense = stream.normals(spec.d * spec.n);
      const double s = 1.0 / std::sqrt(static_cast<double>(spec.d));
      for (auto& v : c->dense) v *= s;
      c->sigma = 1.0;
      break;
    }
    case Algorithm::fjl:
      require(spec.m >= 2, "fjl: sparsity parameter m must be >= 2");
      c->signs = sample_signs(spec, padded);
      c->pre = make_mixer(spec, padded, MixerRole::plain);
      c->sparse = sample_sparse(spec, padded);
      break;
    case Algorithm::ffd: {
      require(spec.preconditioner != Preconditioner::kron_orthogonal, "ffd supports hadamard or fft only");
      require(padded % spec.d == 0, "ffd: target dimension " + std::to_string(spec.d) +
                                        " does not divide padded input dimension " + std::to_string(padded));
      if (spec.preconditioner == Preconditioner::hadamard)
        require(is_pow2(spec.d), "ffd: target dimension must be a power of two");
      else
        c->ffd_fourier = std::make_shared<FourierPreconditioner>(spec.d);
      for (std::size_t b = 0; b < padded / spec.d; ++b) {
        Stream stream(spec.seed, StreamTag::ffd_block, b);
        FfdBlock block;
        block.signs = stream.signs(spec.d);
        block.permutation = stream.permutation(static_cast<std::uint32_t>(spec.d));
        block.gaussian = stream.normals(spec.d);
        c->ffd_blocks.push_back(std::move(block));
      }
      c->sigma = 1.0;
      break;
    }
    case Algorithm::affd: {
      c->signs = sample_signs(spec, padded);
      c->pre = make_mixer(spec, padded, MixerRole::pre);
      Stream stream(spec.seed, StreamTag::gaussian_diagonal);
      c->gaussian = stream.normals(padded);
      c->post = make_mixer(spec, padded, MixerRole::post);
      break;
    }
    case Algorithm::afjl: {
      c->signs = sample_signs(spec, padded);
      c->pre = make_mixer(spec, padded, MixerRole::pre);
      Stream stream(spec.seed, StreamTag::gaussian_diagonal);
      c->gaussian = stream.normals(padded);
      break;
    }
    case Algorithm::qk: {
      c->qk_shape = make_kron_shape(spec.n, spec.d, spec.max_block);
      for (std::size_t k = 0; k < c->qk_shape.factors.size(); ++k) {
        const std::size_t b = c->qk_shape.factors[k].cols;
        Stream stream(spec.seed, StreamTag::orth_factor, k);
        c->qk_factors.emplace_back(sample_haar_factor(b, b, stream));
      }
      break;
    }
  }

  auto m = std::make_shared<Mirrors>();
  m->signs.assign(c->signs.begin(), c->signs.end());
  m->gaussian.assign(c->gaussian.begin(), c->gaussian.end());
  m->dense.assign(c->dense.begin(), c->dense.end());
  m->sparse_values.assign(c->sparse.values.begin(), c->sparse.values.end());
  for (const auto& b : c->ffd_blocks) {
    m->ffd_signs.emplace_back(b.signs.begin(), b.signs.end());
    m->ffd_gaussian.emplace_back(b.gaussian.begin(), b.gaussian.end());
  }
  components_ = std::move(c);
  mirrors_ = std::move(m);
}

// ------------------------------------------------------------ application

namespace {

template <typename T>
void require_finite(std::span<const T> x, const char* what) {
  for (const T v : x)
    if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + ": non-finite input");
}

// Orthonormal H_D or Fourier map on one FFD block, in place.
template <typename T>
void ffd_mix(const SketchComponents& c, T* block, std::size_t d, bool transpose) {
  if (c.ffd_fourier) {
    std::vector<T> tmp(block, block + d);
    if (transpose)
      c.ffd_fourier->apply_transpose<T>(tmp, std::span<T>(block, d));
    else
      c.ffd_fourier->apply<T>(tmp, std::span<T>(block, d));
    return;
  }
  const auto& k = simd::active<T>();
  k.fwht(block, d);
  k.scale(block, static_cast<T>(1.0 / std::sqrt(static_cast<double>(d))), d);
}

}  // namespace

template <typename T>
std::vector<T> Sketcher::forward(std::span<const T> x) const {
  require(x.size() == spec_.n, "forward: input length " + std::to_string(x.size()) + " != " +
                                   std::to_string(spec_.n));
  require_finite(x, "forward");
  const auto& c = *components_;
  const auto& k = simd::active<T>();
  const std::size_t n = spec_.n;
  const std::size_t d = spec_.d;
  const std::size_t padded = c.padded_dim;

  auto pick = [&](const std::vector<double>& dv, const std::vector<float>& fv) -> const T* {
    if constexpr (std::is_same_v<T, double>)
      return dv.data();
    else
      return fv.data();
  };

  std::vector<T> z(padded, T{0});
  std::copy(x.begin(), x.end(), z.begin());
  std::vector<T> y(d, T{0});

  switch (spec_.algorithm) {
    case Algorithm::dense: {
      const T* g = pick(c.dense, mirrors_->dense);
      for (std::size_t r = 0; r < d; ++r) y[r] = k.dot(g + r * n, z.data(), n);
      break;
    }
    case Algorithm::fjl: {
      if (!c.signs.empty()) k.mul(z.data(), pick(c.signs, mirrors_->signs), padded);
      z = c.pre.apply<T>(z, false);
      const T* vals = pick(c.sparse.values, mirrors_->sparse_values);
      for (std::size_t r = 0; r < d; ++r) {
        T acc = 0;
        for (std::size_t e = c.sparse.offsets[r]; e < c.sparse.offsets[r + 1]; ++e) acc += vals[e] * z[c.sparse.cols[e]];
        y[r] = static_cast<T>(c.sigma) * acc;
      }
      break;
    }
    case Algorithm::ffd: {
      std::vector<T> t(d);
      std::vector<T> u(d);
      for (std::size_t b = 0; b < c.ffd_blocks.size(); ++b) {
        const auto& blk = c.ffd_blocks[b];
        std::copy(z.begin() + b * d, z.begin() + (b + 1) * d, t.begin());
        ffd_mix(c, t.data(), d, true);
        k.mul(t.data(), pick(blk.gaussian, mirrors_->ffd_gaussian[b]), d);
        for (std::size_t i = 0; i < d; ++i) u[blk.permutation[i]] = t[i];
        ffd_mix(c, u.data(), d, true);
        k.mul(u.data(), pick(blk.signs, mirrors_->ffd_signs[b]), d);
        for (std::size_t i = 0; i < d; ++i) y[i] += u[i];
      }
      break;
    }
    case Algorithm::affd: {
      if (!c.signs.empty()) k.mul(z.data(), pick(c.signs, mirrors_->signs), padded);
      z = c.pre.apply<T>(z, false);
      k.mul(z.data(), pick(c.gaussian, mirrors_->gaussian), padded);
      z = c.post.apply<T>(z, false);
      std::copy(z.begin(), z.begin() + d, y.begin());
      k.scale(y.data(), static_cast<T>(c.sigma), d);
      break;
    }
    case Algorithm::afjl: {
      if (!c.signs.empty()) k.mul(z.data(), pick(c.signs, mirrors_->signs), padded);
      z = c.pre.apply<T>(z, false);
      std::copy(z.begin(), z.begin() + d, y.begin());
      k.mul(y.data(), pick(c.gaussian, mirrors_->gaussian), d);
      k.scale(y.data(), static_cast<T>(c.sigma), d);
      break;
    }
    case Algorithm::qk: {
      z = kron_apply<T>(z, c.qk_factors);
      std::copy(z.begin(), z.begin() + d, y.begin());
      k.scale(y.data(), static_cast<T>(c.sigma), d);
      break;
    }
  }
  return y;
}

template <typename T>
std::vector<T> Sketcher::transpose(std::span<const T> v) const {
  require(v.size() == spec_.d, "transpose: input length " + std::to_string(v.size()) + " != " +
                                   std::to_string(spec_.d));
  const auto& c = *components_;
  const auto& k = simd::active<T>();
  const std::size_t n = spec_.n;
  const std::size_t d = spec_.d;
  const std::size_t padded = c.padded_dim;

  auto pick = [&](const std::vector<double>& dv, const std::vector<float>& fv) -> const T* {
    if constexpr (std::is_same_v<T, double>)
      return dv.data();
    else
      return fv.data();
  };

  std::vector<T> z(padded, T{0});

  switch (spec_.algorithm) {
    case Algorithm::dense: {
      const T* g = pick(c.dense, mirrors_->dense);
      for (std::size_t r = 0; r < d; ++r) k.axpy(z.data(), v[r], g + r * n, n);
      break;
    }
    case Algorithm::fjl: {
      const T* vals = pick(c.sparse.values, mirrors_->sparse_values);
      for (std::size_t r = 0; r < d; ++r) {
        const T coeff = static_cast<T>(c.sigma) * v[r];
        for (std::size_t e = c.sparse.offsets[r]; e < c.sparse.offsets[r + 1]; ++e) z[c.sparse.cols[e]] += coeff * vals[e];
      }
      z = c.pre.apply<T>(z, true);
      if (!c.signs.empty()) k.mul(z.data(), pick(c.signs, mirrors_->signs), padded);
      break;
    }
    case Algorithm::ffd: {
      // Fastfood feature blocks H G_b Pi_b H B_b v, concatenated.
      std::vector<T> t(d);
      for (std::size_t b = 0; b < c.ffd_blocks.size(); ++b) {
        const auto& blk = c.ffd_blocks[b];
        std::copy(v.begin(), v.end(), t.begin());
        k.mul(t.data(), pick(blk.signs, mirrors_->ffd_signs[b]), d);
        ffd_mix(c, t.data(), d, false);
        T* u = z.data() + b * d;
        for (std::size_t i = 0; i < d; ++i) u[i] = t[blk.permutation[i]];
        k.mul(u, pick(blk.gaussian, mirrors_->ffd_gaussian[b]), d);
        ffd_mix(c, u, d, false);
      }
      break;
    }
    case Algorithm::affd: {
      std::copy(v.begin(), v.end(), z.begin());
      k.scale(z.data(), static_cast<T>(c.sigma), d);
      z = c.post.apply<T>(z, true);
      k.mul(z.data(), pick(c.gaussian, mirrors_->gaussian), padded);
      z = c.pre.apply<T>(z, true);
      if (!c.signs.empty()) k.mul(z.data(), pick(c.signs, mirrors_->signs), padded);
      break;
    }
    case Algorithm::afjl: {
      std::copy(v.begin(), v.end(), z.begin());
      k.mul(z.data(), pick(c.gaussian, mirrors_->gaussian), d);
      k.scale(z.data(), static_cast<T>(c.sigma), d);
      z = c.pre.apply<T>(z, true);
      if (!c.signs.empty()) k.mul(z.data(), pick(c.signs, mirrors_->signs), padded);
      break;
    }
    case Algorithm::qk: {
      std::copy(v.begin(), v.end(), z.begin());
      k.scale(z.data(), static_cast<T>(c.sigma), d);
      z = kron_apply_transpose<T>(z, c.qk_factors);
      break;
    }
  }
  z.resize(n);
  return z;
}

template std::vector<float> Sketcher::forward<float>(std::span<const float>) const;
template std::vector<double> Sketcher::forward<double>(std::span<const double>) const;
template std::vector<float> Sketcher::transpose<float>(std::span<const float>) const;
template std::vector<double> Sketcher::transpose<double>(std::span<const double>) const;

double jl_distortion_trial(const Sketcher& sketcher, std::span<const double> x) {
  double norm2 = 0.0;
  for (double v : x) norm2 += v * v;
  require(std::abs(std::sqrt(norm2) - 1.0) <= 1e-8, "jl_distortion_trial: input must be a unit vector");
  const auto y = sketcher.forward<double>(x);
  double out2 = 0.0;
  for (double v : y) out2 += v * v;
  return std::abs(std::sqrt(out2) - 1.0);
}

std::vector<double> ffd_adversarial_input(std::size_t n, std::size_t d) {
  require(n >= 1 && d >= 1, "ffd_adversarial_input: dimensions must be positive");
  require(is_pow2(d), "ffd_adversarial_input: d must be a power of two");
  require(n % d == 0, "ffd_adversarial_input: d must divide n");
  // First column of the orthonormal H_d: every entry +1/sqrt(d).
  std::vector<double> x(n, 0.0);
  std::fill(x.begin(), x.begin() + d, 1.0 / std::sqrt(static_cast<double>(d)));
  return x;
}

std::vector<std::vector<double>> sparse_unit_vectors(std::size_t n, std::size_t count, std::size_t nonzeros,
                                                     std::uint64_t seed) {
  require(nonzeros >= 1 && nonzeros <= n, "sparse_unit_vectors: nonzeros must lie in [1, n]");
  Stream s(seed, StreamTag::test_vectors);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  std::vector<std::uint32_t> idx(n);
  for (std::size_t v = 0; v < count; ++v) {
    std::iota(idx.begin(), idx.end(), 0u);
    // Partial Fisher-Yates: the first `nonzeros` slots are a uniform subset.
    for (std::size_t i = 0; i < nonzeros; ++i) std::swap(idx[i], idx[i + s.below(n - i)]);
    std::vector<double> x(n, 0.0);
    double norm2 = 0;
    for (std::size_t i = 0; i < nonzeros; ++i) {
      const double g = s.normal();
      x[idx[i]] = g;
      norm2 += g * g;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t i = 0; i < nonzeros; ++i) x[idx[i]] *= inv;
    out.push_back(std::move(x));
  }
  return out;
}

double jl_failure_rate(const Sketcher& sketcher, std::span<const std::vector<double>> unit_vectors, double eps) {
  require(!unit_vectors.empty(), "jl_failure_rate: no vectors");
  require(eps > 0.0, "jl_failure_rate: eps must be positive");
  std::size_t fails = 0;
  for (const auto& x : unit_vectors)
    if (jl_distortion_trial(sketcher, x) >= eps) ++fails;
  return static_cast<double>(fails) / static_cast<double>(unit_vectors.size());
}

}  // namespace kronsketch
