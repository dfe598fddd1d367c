#pragma once

// Kronecker-structured factors and their application by iterated mode
// contraction. A vector of length prod(cols) is viewed as a row-major tensor
// whose k-th axis has extent cols[k]; factor k contracts axis k. Factor 0 acts
// on the slowest-varying axis, so the represented matrix is
// kron(F_0, kron(F_1, ...)) in the usual dense convention.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "kronsketch/rng.hpp"

namespace kronsketch {

inline constexpr std::size_t kDefaultMaxBlock = 1024;

constexpr bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Smallest power of two >= n (n >= 1).
std::size_t next_pow2(std::size_t n);

/// Greedy block decomposition: emit min(n, max_block), divide by max_block,
/// reverse. compute_kron_shapes(1, b) is empty.
std::vector<std::size_t> compute_kron_shapes(std::size_t dimension, std::size_t max_block);

struct Block {
  std::size_t rows;
  std::size_t cols;
};

struct KronShape {
  std::vector<Block> factors;
  std::size_t padded_input_dim = 1;
  std::size_t output_dim = 1;
  std::size_t max_block = kDefaultMaxBlock;

  std::vector<std::size_t> cols() const;
  std::vector<std::size_t> rows() const;
};

/// Shape for mapping an input of length input_dim (zero-padded to the next
/// power of two) onto output_dim rows. Rows are filled from the trailing
/// factor backwards, so the first output_dim coordinates of the square
/// product are exactly the product of the row-restricted factors. Throws
/// InvalidArgument when output_dim cannot be written that way.
KronShape make_kron_shape(std::size_t input_dim, std::size_t output_dim,
                          std::size_t max_block = kDefaultMaxBlock);

/// Square shape (rows == cols) for a padded input.
KronShape make_square_kron_shape(std::size_t input_dim, std::size_t max_block = kDefaultMaxBlock);

enum class PermuteMode { none, rows, cols };

/// (1/sqrt(size)) * H_size with rows or columns permuted. Applied with the
/// butterfly; the permutation is an index map on the input (cols) or output
/// (rows).
class HadamardFactor {
 public:
  HadamardFactor(std::size_t size, PermuteMode mode, std::vector<std::uint32_t> permutation);
  explicit HadamardFactor(std::size_t size);
  static HadamardFactor sample(std::size_t size, PermuteMode mode, Stream& stream);

  std::size_t rows() const { return size_; }
  std::size_t cols() const { return size_; }
  std::size_t size() const { return size_; }
  PermuteMode mode() const { return mode_; }
  std::span<const std::uint32_t> permutation() const { return permutation_; }
  double scale() const;

  /// Contract the middle axis of src (outer, size, inner) into dst. The
  /// result is unscaled; callers fold scale() in once at the end. src is
  /// used as scratch.
  template <typename T>
  void apply(T* src, T* dst, std::size_t outer, std::size_t inner, bool transpose) const;

 private:
  std::size_t size_;
  PermuteMode mode_;
  std::vector<std::uint32_t> permutation_;
};

/// General dense rows x cols factor stored row-major, with a transposed copy
/// and float mirrors for the contraction kernels.
class DenseFactor {
 public:
  DenseFactor(std::size_t rows, std::size_t cols, std::vector<double> entries);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }
  std::span<const double> entries() const { return entries_; }
  double scale() const { return 1.0; }

  /// Keep only the first `rows` rows.
  DenseFactor restricted(std::size_t rows) const;

  template <typename T>
  void apply(const T* src, T* dst, std::size_t outer, std::size_t inner, bool transpose) const;

 private:
  template <typename T>
  const std::vector<T>& row_major() const;
  template <typename T>
  const std::vector<T>& col_major() const;

  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> entries_;
  std::vector<double> entries_t_;
  std::vector<float> entries_f_;
  std::vector<float> entries_t_f_;
};

using KronFactor = std::variant<HadamardFactor, DenseFactor>;

std::size_t factor_rows(const KronFactor& f);
std::size_t factor_cols(const KronFactor& f);

/// Haar-distributed orthogonal cols x cols matrix (QR of a Gaussian matrix
/// with R's diagonal signs absorbed into Q), restricted to its first `rows`
/// rows. Requires rows <= cols.
DenseFactor sample_haar_factor(std::size_t rows, std::size_t cols, Stream& stream);

/// (F_0 kron ... kron F_{K-1}) x.
template <typename T>
std::vector<T> kron_apply(std::span<const T> x, std::span<const KronFactor> factors);

/// (F_0 kron ... kron F_{K-1})^T v.
template <typename T>
std::vector<T> kron_apply_transpose(std::span<const T> v, std::span<const KronFactor> factors);

/// Real orthogonal map built from the DFT of a real vector of even length n:
///   [Re X_0, sqrt2 Re X_1 .. sqrt2 Re X_{n/2-1}, Re X_{n/2},
///    sqrt2 Im X_1 .. sqrt2 Im X_{n/2-1}] / sqrt(n).
class FourierPreconditioner {
 public:
  explicit FourierPreconditioner(std::size_t size);
  ~FourierPreconditioner();
  FourierPreconditioner(FourierPreconditioner&&) noexcept;
  FourierPreconditioner& operator=(FourierPreconditioner&&) noexcept;
  FourierPreconditioner(const FourierPreconditioner&) = delete;
  FourierPreconditioner& operator=(const FourierPreconditioner&) = delete;

  std::size_t size() const { return size_; }

  template <typename T>
  void apply(std::span<const T> x, std::span<T> out) const;
  template <typename T>
  void apply_transpose(std::span<const T> y, std::span<T> out) const;

 private:
  struct Plans;
  std::size_t size_;
  std::unique_ptr<Plans> plans_;
};

/// Convenience wrapper for fourier_preconditioner_apply on a whole vector.
std::vector<double> fourier_preconditioner_apply(std::span<const double> x);

}  // namespace kronsketch
