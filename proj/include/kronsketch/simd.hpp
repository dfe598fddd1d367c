#pragma once

// Data-parallel inner loops shared by every transform. Each kernel has a
// portable scalar reference and, on x86-64, an AVX2 variant. The variant is
// picked once at startup from CPUID; KRONSKETCH_SIMD=scalar forces the
// reference path.
//
// butterfly/fwht/mul/scale/axpy are bitwise identical across variants (same
// per-element operation sequence, no FMA contraction). dot and signed_sum
// reassociate the reduction and agree only to rounding.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace kronsketch::simd {

template <typename T>
struct Kernels {
  std::string_view name;
  // a[i], b[i] <- a[i] + b[i], a[i] - b[i]
  void (*butterfly)(T* a, T* b, std::size_t n);
  // Unnormalized in-place Walsh-Hadamard transform, n a power of two.
  void (*fwht)(T* x, std::size_t n);
  // x[i] *= d[i]
  void (*mul)(T* x, const T* d, std::size_t n);
  // x[i] *= alpha
  void (*scale)(T* x, T alpha, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(T* y, T alpha, const T* x, std::size_t n);
  T (*dot)(const T* a, const T* b, std::size_t n);
  // sum_i (bit i of bits set ? x[i] : -x[i]); n a multiple of 64.
  T (*signed_sum)(const T* x, const std::uint64_t* bits, std::size_t n);
};

template <typename T>
const Kernels<T>& scalar_kernels();

/// nullptr when the build or the host lacks AVX2.
template <typename T>
const Kernels<T>* avx2_kernels();

/// The variant selected for this process.
template <typename T>
const Kernels<T>& active();

std::string_view active_name();

extern template const Kernels<float>& scalar_kernels<float>();
extern template const Kernels<double>& scalar_kernels<double>();
template <>
const Kernels<float>* avx2_kernels<float>();
template <>
const Kernels<double>* avx2_kernels<double>();
extern template const Kernels<float>& active<float>();
extern template const Kernels<double>& active<double>();

}  // namespace kronsketch::simd
