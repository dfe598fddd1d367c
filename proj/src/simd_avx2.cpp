// Compiled with -mavx2 -mfma -ffp-contract=off; only reached after a CPUID check.

#include <immintrin.h>

#include <cstdint>

#include "kronsketch/simd.hpp"

namespace kronsketch::simd {
namespace {

// ---------------------------------------------------------------- double

void butterfly_pd(double* a, double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(a + i);
    const __m256d y = _mm256_loadu_pd(b + i);
    _mm256_storeu_pd(a + i, _mm256_add_pd(x, y));
    _mm256_storeu_pd(b + i, _mm256_sub_pd(x, y));
  }
  for (; i < n; ++i) {
    const double x = a[i];
    const double y = b[i];
    a[i] = x + y;
    b[i] = x - y;
  }
}

void fwht_pd(double* x, std::size_t n) {
  if (n < 4) {
    scalar_kernels<double>().fwht(x, n);
    return;
  }
  // Strides 1 and 2 stay inside one register.
  for (std::size_t i = 0; i < n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    __m256d s = _mm256_permute_pd(v, 0b0101);
    v = _mm256_blend_pd(_mm256_add_pd(v, s), _mm256_sub_pd(s, v), 0b1010);
    s = _mm256_permute2f128_pd(v, v, 0x01);
    v = _mm256_blend_pd(_mm256_add_pd(v, s), _mm256_sub_pd(s, v), 0b1100);
    _mm256_storeu_pd(x + i, v);
  }
  for (std::size_t h = 4; h < n; h *= 2) {
    for (std::size_t i = 0; i < n; i += 2 * h) butterfly_pd(x + i, x + i + h, h);
  }
}

void mul_pd(double* x, const double* d, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(d + i)));
  for (; i < n; ++i) x[i] *= d[i];
}

void scale_pd(double* x, double alpha, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), a));
  for (; i < n; ++i) x[i] *= alpha;
}

void axpy_pd(double* y, double alpha, const double* x, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_mul_pd(a, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), t));
  }
  for (; i < n; ++i) {
    const double t = alpha * x[i];
    y[i] += t;
  }
}

double hsum_pd(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_pd(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum_pd(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

// Sign masks indexed by 4 (double) or 8 (float) consecutive bits: lane i
// carries -0.0 when bit i is clear.
struct SignTables {
  alignas(32) std::uint64_t pd[16][4];
  alignas(32) std::uint32_t ps[256][8];
  SignTables() {
    for (unsigned b = 0; b < 16; ++b)
      for (unsigned i = 0; i < 4; ++i) pd[b][i] = ((b >> i) & 1) ? 0 : 0x8000000000000000ull;
    for (unsigned b = 0; b < 256; ++b)
      for (unsigned i = 0; i < 8; ++i) ps[b][i] = ((b >> i) & 1) ? 0 : 0x80000000u;
  }
};
const SignTables kSigns;

double signed_sum_pd(const double* x, const std::uint64_t* bits, std::size_t n) {
  __m256d acc[4] = {_mm256_setzero_pd(), _mm256_setzero_pd(), _mm256_setzero_pd(), _mm256_setzero_pd()};
  for (std::size_t w = 0; w < n / 64; ++w) {
    const std::uint64_t word = bits[w];
    const double* xw = x + 64 * w;
    for (std::size_t j = 0; j < 64; j += 16) {
      for (std::size_t q = 0; q < 4; ++q) {
        const __m256d m = _mm256_load_pd(reinterpret_cast<const double*>(kSigns.pd[(word >> (j + 4 * q)) & 0xF]));
        acc[q] = _mm256_add_pd(acc[q], _mm256_xor_pd(_mm256_loadu_pd(xw + j + 4 * q), m));
      }
    }
  }
  return hsum_pd(_mm256_add_pd(_mm256_add_pd(acc[0], acc[1]), _mm256_add_pd(acc[2], acc[3])));
}

// ----------------------------------------------------------------- float

void butterfly_ps(float* a, float* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 x = _mm256_loadu_ps(a + i);
    const __m256 y = _mm256_loadu_ps(b + i);
    _mm256_storeu_ps(a + i, _mm256_add_ps(x, y));
    _mm256_storeu_ps(b + i, _mm256_sub_ps(x, y));
  }
  for (; i < n; ++i) {
    const float x = a[i];
    const float y = b[i];
    a[i] = x + y;
    b[i] = x - y;
  }
}

void fwht_ps(float* x, std::size_t n) {
  if (n < 8) {
    scalar_kernels<float>().fwht(x, n);
    return;
  }
  for (std::size_t i = 0; i < n; i += 8) {
    __m256 v = _mm256_loadu_ps(x + i);
    __m256 s = _mm256_permute_ps(v, 0xB1);
    v = _mm256_blend_ps(_mm256_add_ps(v, s), _mm256_sub_ps(s, v), 0b10101010);
    s = _mm256_permute_ps(v, 0x4E);
    v = _mm256_blend_ps(_mm256_add_ps(v, s), _mm256_sub_ps(s, v), 0b11001100);
    s = _mm256_permute2f128_ps(v, v, 0x01);
    v = _mm256_blend_ps(_mm256_add_ps(v, s), _mm256_sub_ps(s, v), 0b11110000);
    _mm256_storeu_ps(x + i, v);
  }
  for (std::size_t h = 8; h < n; h *= 2) {
    for (std::size_t i = 0; i < n; i += 2 * h) butterfly_ps(x + i, x + i + h, h);
  }
}

void mul_ps(float* x, const float* d, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(x + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(d + i)));
  for (; i < n; ++i) x[i] *= d[i];
}

void scale_ps(float* x, float alpha, std::size_t n) {
  const __m256 a = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(x + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), a));
  for (; i < n; ++i) x[i] *= alpha;
}

void axpy_ps(float* y, float alpha, const float* x, std::size_t n) {
  const __m256 a = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 t = _mm256_mul_ps(a, _mm256_loadu_ps(x + i));
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), t));
  }
  for (; i < n; ++i) {
    const float t = alpha * x[i];
    y[i] += t;
  }
}

float hsum_ps(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
  return _mm_cvtss_f32(s);
}

float dot_ps(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8)
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  float acc = hsum_ps(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

float signed_sum_ps(const float* x, const std::uint64_t* bits, std::size_t n) {
  __m256 acc[4] = {_mm256_setzero_ps(), _mm256_setzero_ps(), _mm256_setzero_ps(), _mm256_setzero_ps()};
  for (std::size_t w = 0; w < n / 64; ++w) {
    const std::uint64_t word = bits[w];
    const float* xw = x + 64 * w;
    for (std::size_t j = 0; j < 64; j += 32) {
      for (std::size_t q = 0; q < 4; ++q) {
        const __m256 m = _mm256_load_ps(reinterpret_cast<const float*>(kSigns.ps[(word >> (j + 8 * q)) & 0xFF]));
        acc[q] = _mm256_add_ps(acc[q], _mm256_xor_ps(_mm256_loadu_ps(xw + j + 8 * q), m));
      }
    }
  }
  return hsum_ps(_mm256_add_ps(_mm256_add_ps(acc[0], acc[1]), _mm256_add_ps(acc[2], acc[3])));
}

const Kernels<double> kAvx2Double{"avx2", &butterfly_pd, &fwht_pd, &mul_pd, &scale_pd,
                                  &axpy_pd, &dot_pd,      &signed_sum_pd};
const Kernels<float> kAvx2Float{"avx2", &butterfly_ps, &fwht_ps, &mul_ps, &scale_ps,
                                &axpy_ps, &dot_ps,      &signed_sum_ps};

}  // namespace

namespace detail {
const Kernels<double>* avx2_double_table() { return &kAvx2Double; }
const Kernels<float>* avx2_float_table() { return &kAvx2Float; }
}  // namespace detail

}  // namespace kronsketch::simd
