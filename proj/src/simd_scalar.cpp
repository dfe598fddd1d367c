#include "kronsketch/simd.hpp"

#include <bit>

namespace kronsketch::simd {
namespace {

template <typename T>
void butterfly(T* a, T* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const T x = a[i];
    const T y = b[i];
    a[i] = x + y;
    b[i] = x - y;
  }
}

template <typename T>
void fwht(T* x, std::size_t n) {
  for (std::size_t h = 1; h < n; h *= 2) {
    for (std::size_t i = 0; i < n; i += 2 * h) butterfly(x + i, x + i + h, h);
  }
}

template <typename T>
void mul(T* x, const T* d, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= d[i];
}

template <typename T>
void scale(T* x, T alpha, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

template <typename T>
void axpy(T* y, T alpha, const T* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const T t = alpha * x[i];
    y[i] += t;
  }
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
T signed_sum(const T* x, const std::uint64_t* bits, std::size_t n) {
  T acc = 0;
  for (std::size_t w = 0; w < n / 64; ++w) {
    const std::uint64_t word = bits[w];
    const T* xw = x + 64 * w;
    for (std::size_t j = 0; j < 64; ++j) acc += ((word >> j) & 1u) ? xw[j] : -xw[j];
  }
  return acc;
}

template <typename T>
const Kernels<T> kScalar{"scalar",   &butterfly<T>, &fwht<T>, &mul<T>, &scale<T>,
                         &axpy<T>,   &dot<T>,       &signed_sum<T>};

}  // namespace

template <typename T>
const Kernels<T>& scalar_kernels() {
  return kScalar<T>;
}

template const Kernels<float>& scalar_kernels<float>();
template const Kernels<double>& scalar_kernels<double>();

}  // namespace kronsketch::simd
