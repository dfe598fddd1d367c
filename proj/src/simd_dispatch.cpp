#include <cstdlib>
#include <string>

#include "kronsketch/simd.hpp"

namespace kronsketch::simd {

#if KRONSKETCH_HAVE_AVX2
namespace detail {
const Kernels<double>* avx2_double_table();
const Kernels<float>* avx2_float_table();
}  // namespace detail
#endif

namespace {

bool host_has_avx2() {
#if KRONSKETCH_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool scalar_forced() {
  const char* env = std::getenv("KRONSKETCH_SIMD");
  return env != nullptr && std::string(env) == "scalar";
}

bool use_avx2() {
  static const bool enabled = host_has_avx2() && !scalar_forced();
  return enabled;
}

}  // namespace

template <>
const Kernels<double>* avx2_kernels<double>() {
#if KRONSKETCH_HAVE_AVX2
  if (host_has_avx2()) return detail::avx2_double_table();
#endif
  return nullptr;
}

template <>
const Kernels<float>* avx2_kernels<float>() {
#if KRONSKETCH_HAVE_AVX2
  if (host_has_avx2()) return detail::avx2_float_table();
#endif
  return nullptr;
}

template <typename T>
const Kernels<T>& active() {
  static const Kernels<T>& chosen = use_avx2() ? *avx2_kernels<T>() : scalar_kernels<T>();
  return chosen;
}

template const Kernels<float>& active<float>();
template const Kernels<double>& active<double>();

std::string_view active_name() { return active<double>().name; }

}  // namespace kronsketch::simd
