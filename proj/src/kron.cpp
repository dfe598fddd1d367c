#include "kronsketch/kron.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "kronsketch/errors.hpp"
#include "kronsketch/simd.hpp"

namespace kronsketch {

using detail::require;

std::size_t next_pow2(std::size_t n) {
  require(n >= 1, "next_pow2: n must be positive");
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<std::size_t> compute_kron_shapes(std::size_t dimension, std::size_t max_block) {
  require(dimension >= 1, "compute_kron_shapes: dimension must be positive");
  require(is_pow2(max_block) && max_block >= 2, "compute_kron_shapes: max_block must be a power of two >= 2");
  std::vector<std::size_t> shape;
  for (std::size_t n = dimension; n > 1; n /= max_block) shape.push_back(std::min(n, max_block));
  std::reverse(shape.begin(), shape.end());
  return shape;
}

std::vector<std::size_t> KronShape::cols() const {
  std::vector<std::size_t> out;
  for (const auto& b : factors) out.push_back(b.cols);
  return out;
}

std::vector<std::size_t> KronShape::rows() const {
  std::vector<std::size_t> out;
  for (const auto& b : factors) out.push_back(b.rows);
  return out;
}

KronShape make_kron_shape(std::size_t input_dim, std::size_t output_dim, std::size_t max_block) {
  require(input_dim >= 1, "make_kron_shape: input_dim must be positive");
  KronShape shape;
  shape.padded_input_dim = next_pow2(input_dim);
  shape.max_block = max_block;
  require(output_dim >= 1 && output_dim <= shape.padded_input_dim,
          "make_kron_shape: output_dim " + std::to_string(output_dim) + " outside [1, " +
              std::to_string(shape.padded_input_dim) + "]");
  auto cols = compute_kron_shapes(shape.padded_input_dim, max_block);
  if (cols.empty()) cols.push_back(1);

  std::vector<std::size_t> rows(cols.size(), 1);
  std::size_t remaining = output_dim;
  for (std::size_t k = cols.size(); k-- > 0 && remaining > 1;) {
    if (remaining >= cols[k]) {
      require(remaining % cols[k] == 0,
              "make_kron_shape: output_dim " + std::to_string(output_dim) +
                  " does not factor against the input blocks");
      rows[k] = cols[k];
      remaining /= cols[k];
    } else {
      rows[k] = remaining;
      remaining = 1;
    }
  }
  require(remaining == 1, "make_kron_shape: output_dim does not factor against the input blocks");

  for (std::size_t k = 0; k < cols.size(); ++k) shape.factors.push_back({rows[k], cols[k]});
  shape.output_dim = output_dim;
  return shape;
}

KronShape make_square_kron_shape(std::size_t input_dim, std::size_t max_block) {
  const std::size_t padded = next_pow2(input_dim);
  return make_kron_shape(padded, padded, max_block);
}

// ------------------------------------------------------------ Hadamard

HadamardFactor::HadamardFactor(std::size_t size, PermuteMode mode, std::vector<std::uint32_t> permutation)
    : size_(size), mode_(mode), permutation_(std::move(permutation)) {
  require(is_pow2(size), "HadamardFactor: size must be a power of two");
  if (mode_ == PermuteMode::none) {
    require(permutation_.empty(), "HadamardFactor: permutation given with mode none");
    return;
  }
  require(permutation_.size() == size_, "HadamardFactor: permutation length mismatch");
  std::vector<bool> seen(size_, false);
  for (auto p : permutation_) {
    require(p < size_ && !seen[p], "HadamardFactor: permutation is not a bijection");
    seen[p] = true;
  }
}

HadamardFactor::HadamardFactor(std::size_t size) : HadamardFactor(size, PermuteMode::none, {}) {}

HadamardFactor HadamardFactor::sample(std::size_t size, PermuteMode mode, Stream& stream) {
  if (mode == PermuteMode::none) return HadamardFactor(size);
  return HadamardFactor(size, mode, stream.permutation(static_cast<std::uint32_t>(size)));
}

double HadamardFactor::scale() const { return 1.0 / std::sqrt(static_cast<double>(size_)); }

namespace {

template <typename T>
void fwht_rows(T* block, std::size_t size, std::size_t inner) {
  const auto& k = simd::active<T>();
  if (inner == 1) {
    k.fwht(block, size);
    return;
  }
  // Up to three butterfly stages per sweep over the slab, on 8 rows at a
  // time and one column tile at a time. Each element sees the same sequence
  // of operations as the stage-by-stage loop.
  constexpr std::size_t kTile = 256;
  std::size_t h = 1;
  while (h < size) {
    const std::size_t stages = std::min<std::size_t>(3, static_cast<std::size_t>(std::countr_zero(size / h)));
    const std::size_t span = h << stages;
    for (std::size_t i = 0; i < size; i += span) {
      for (std::size_t r = i; r < i + h; ++r) {
        T* rows[8];
        for (std::size_t j = 0; j < (std::size_t{1} << stages); ++j) rows[j] = block + (r + j * h) * inner;
        for (std::size_t t0 = 0; t0 < inner; t0 += kTile) {
          const std::size_t len = std::min(kTile, inner - t0);
          for (std::size_t s = 0; s < stages; ++s) {
            const std::size_t step = std::size_t{1} << s;
            for (std::size_t j = 0; j < (std::size_t{1} << stages); j += 2 * step)
              for (std::size_t q = j; q < j + step; ++q) k.butterfly(rows[q] + t0, rows[q + step] + t0, len);
          }
        }
      }
    }
    h = span;
  }
}

}  // namespace

template <typename T>
void HadamardFactor::apply(T* src, T* dst, std::size_t outer, std::size_t inner, bool transpose) const {
  const std::size_t stride = size_ * inner;
  if (mode_ == PermuteMode::none) {
    for (std::size_t o = 0; o < outer; ++o) fwht_rows(src + o * stride, size_, inner);
    std::memcpy(dst, src, outer * stride * sizeof(T));
    return;
  }
  // cols-permuted forward and rows-permuted transpose scatter their input
  // before the butterfly; the other two gather after it.
  const bool scatter_first = (mode_ == PermuteMode::cols) != transpose;
  for (std::size_t o = 0; o < outer; ++o) {
    T* s = src + o * stride;
    T* d = dst + o * stride;
    if (scatter_first) {
      if (inner == 1)
        for (std::size_t j = 0; j < size_; ++j) d[permutation_[j]] = s[j];
      else
        for (std::size_t j = 0; j < size_; ++j) std::memcpy(d + permutation_[j] * inner, s + j * inner, inner * sizeof(T));
      fwht_rows(d, size_, inner);
    } else {
      fwht_rows(s, size_, inner);
      if (inner == 1)
        for (std::size_t i = 0; i < size_; ++i) d[i] = s[permutation_[i]];
      else
        for (std::size_t i = 0; i < size_; ++i) std::memcpy(d + i * inner, s + permutation_[i] * inner, inner * sizeof(T));
    }
  }
}

template void HadamardFactor::apply<float>(float*, float*, std::size_t, std::size_t, bool) const;
template void HadamardFactor::apply<double>(double*, double*, std::size_t, std::size_t, bool) const;

// --------------------------------------------------------------- Dense

DenseFactor::DenseFactor(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  require(rows_ >= 1 && cols_ >= 1, "DenseFactor: empty shape");
  require(entries_.size() == rows_ * cols_, "DenseFactor: entry count does not match shape");
  entries_t_.resize(entries_.size());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) entries_t_[c * rows_ + r] = entries_[r * cols_ + c];
  entries_f_.assign(entries_.begin(), entries_.end());
  entries_t_f_.assign(entries_t_.begin(), entries_t_.end());
}

DenseFactor DenseFactor::restricted(std::size_t rows) const {
  require(rows >= 1 && rows <= rows_, "DenseFactor::restricted: row count out of range");
  return DenseFactor(rows, cols_, std::vector<double>(entries_.begin(), entries_.begin() + rows * cols_));
}

template <>
const std::vector<double>& DenseFactor::row_major<double>() const { return entries_; }
template <>
const std::vector<float>& DenseFactor::row_major<float>() const { return entries_f_; }
template <>
const std::vector<double>& DenseFactor::col_major<double>() const { return entries_t_; }
template <>
const std::vector<float>& DenseFactor::col_major<float>() const { return entries_t_f_; }

namespace {

// dst(o, r, :) = sum_c m(r, c) src(o, c, :) for a row-major out_dim x in_dim m.
template <typename T>
void contract(const T* m, std::size_t out_dim, std::size_t in_dim, const T* src, T* dst, std::size_t outer,
              std::size_t inner) {
  const auto& k = simd::active<T>();
  if (inner == 1) {
    constexpr std::size_t kOuterBlock = 16;
    for (std::size_t o0 = 0; o0 < outer; o0 += kOuterBlock) {
      const std::size_t o1 = std::min(outer, o0 + kOuterBlock);
      for (std::size_t r = 0; r < out_dim; ++r) {
        const T* row = m + r * in_dim;
        for (std::size_t o = o0; o < o1; ++o) dst[o * out_dim + r] = k.dot(row, src + o * in_dim, in_dim);
      }
    }
    return;
  }
  for (std::size_t o = 0; o < outer; ++o) {
    const T* s = src + o * in_dim * inner;
    T* d = dst + o * out_dim * inner;
    std::fill(d, d + out_dim * inner, T{0});
    for (std::size_t r = 0; r < out_dim; ++r) {
      for (std::size_t c = 0; c < in_dim; ++c) k.axpy(d + r * inner, m[r * in_dim + c], s + c * inner, inner);
    }
  }
}

}  // namespace

template <typename T>
void DenseFactor::apply(const T* src, T* dst, std::size_t outer, std::size_t inner, bool transpose) const {
  if (transpose)
    contract(col_major<T>().data(), cols_, rows_, src, dst, outer, inner);
  else
    contract(row_major<T>().data(), rows_, cols_, src, dst, outer, inner);
}

template void DenseFactor::apply<float>(const float*, float*, std::size_t, std::size_t, bool) const;
template void DenseFactor::apply<double>(const double*, double*, std::size_t, std::size_t, bool) const;

std::size_t factor_rows(const KronFactor& f) {
  return std::visit([](const auto& x) { return x.rows(); }, f);
}

std::size_t factor_cols(const KronFactor& f) {
  return std::visit([](const auto& x) { return x.cols(); }, f);
}

DenseFactor sample_haar_factor(std::size_t rows, std::size_t cols, Stream& stream) {
  require(rows >= 1 && rows <= cols, "sample_haar_factor: need 1 <= rows <= cols");
  const auto n = static_cast<Eigen::Index>(cols);
  Eigen::MatrixXd gaussian(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) gaussian(i, j) = stream.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;

  std::vector<double> entries(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      entries[i * cols + j] = q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return DenseFactor(rows, cols, std::move(entries));
}

// ------------------------------------------------------------ kron_apply

namespace {

template <typename T>
std::vector<T> kron_contract(std::span<const T> x, std::span<const KronFactor> factors, bool transpose) {
  std::vector<std::size_t> dims;
  std::size_t expected = 1;
  for (const auto& f : factors) {
    dims.push_back(transpose ? factor_rows(f) : factor_cols(f));
    expected *= dims.back();
  }
  require(x.size() == expected, std::string(transpose ? "kron_apply_transpose" : "kron_apply") +
                                    ": input length " + std::to_string(x.size()) + " != " +
                                    std::to_string(expected));

  // Ping-pong buffers are reused across calls: large fresh allocations come
  // straight from mmap and would page-fault on every application.
  thread_local std::vector<T> cur;
  thread_local std::vector<T> next;
  cur.assign(x.begin(), x.end());
  double total_scale = 1.0;
  for (std::size_t k = 0; k < factors.size(); ++k) {
    const auto& f = factors[k];
    const std::size_t out_dim = transpose ? factor_cols(f) : factor_rows(f);
    std::size_t outer = 1;
    std::size_t inner = 1;
    for (std::size_t j = 0; j < k; ++j) outer *= dims[j];
    for (std::size_t j = k + 1; j < dims.size(); ++j) inner *= dims[j];
    next.resize(outer * out_dim * inner);
    std::visit(
        [&](const auto& factor) {
          factor.apply(cur.data(), next.data(), outer, inner, transpose);
          total_scale *= factor.scale();
        },
        f);
    std::swap(cur, next);
    dims[k] = out_dim;
  }
  if (total_scale != 1.0) simd::active<T>().scale(cur.data(), static_cast<T>(total_scale), cur.size());
  return std::vector<T>(cur.begin(), cur.end());
}

}  // namespace

template <typename T>
std::vector<T> kron_apply(std::span<const T> x, std::span<const KronFactor> factors) {
  return kron_contract(x, factors, false);
}

template <typename T>
std::vector<T> kron_apply_transpose(std::span<const T> v, std::span<const KronFactor> factors) {
  return kron_contract(v, factors, true);
}

template std::vector<float> kron_apply<float>(std::span<const float>, std::span<const KronFactor>);
template std::vector<double> kron_apply<double>(std::span<const double>, std::span<const KronFactor>);
template std::vector<float> kron_apply_transpose<float>(std::span<const float>, std::span<const KronFactor>);
template std::vector<double> kron_apply_transpose<double>(std::span<const double>, std::span<const KronFactor>);

}  // namespace kronsketch
