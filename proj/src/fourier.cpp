#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include "kronsketch/errors.hpp"
#include "kronsketch/kron.hpp"

namespace kronsketch {

namespace {

// The FFTW planner is not reentrant; execution with new-array calls is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t bytes) : ptr(fftw_malloc(bytes)) {
    if (ptr == nullptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* ptr;
};

}  // namespace

struct FourierPreconditioner::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

FourierPreconditioner::FourierPreconditioner(std::size_t size) : size_(size) {
  detail::require(size >= 2 && size % 2 == 0, "fourier preconditioner: length must be even");
  plans_ = std::make_unique<Plans>();
  const int n = static_cast<int>(size);
  FftwBuffer real(sizeof(double) * size);
  FftwBuffer spec(sizeof(fftw_complex) * (size / 2 + 1));
  std::lock_guard lock(planner_mutex());
  plans_->forward = fftw_plan_dft_r2c_1d(n, static_cast<double*>(real.ptr),
                                         static_cast<fftw_complex*>(spec.ptr), FFTW_ESTIMATE);
  plans_->backward = fftw_plan_dft_c2r_1d(n, static_cast<fftw_complex*>(spec.ptr),
                                          static_cast<double*>(real.ptr), FFTW_ESTIMATE);
  if (!plans_->forward || !plans_->backward) throw std::runtime_error("fftw planning failed");
}

FourierPreconditioner::~FourierPreconditioner() = default;
FourierPreconditioner::FourierPreconditioner(FourierPreconditioner&&) noexcept = default;
FourierPreconditioner& FourierPreconditioner::operator=(FourierPreconditioner&&) noexcept = default;

template <typename T>
void FourierPreconditioner::apply(std::span<const T> x, std::span<T> out) const {
  detail::require(x.size() == size_ && out.size() == size_, "fourier preconditioner: length mismatch");
  const std::size_t half = size_ / 2;
  FftwBuffer real(sizeof(double) * size_);
  FftwBuffer spec(sizeof(fftw_complex) * (half + 1));
  auto* r = static_cast<double*>(real.ptr);
  auto* c = static_cast<fftw_complex*>(spec.ptr);
  for (std::size_t i = 0; i < size_; ++i) r[i] = static_cast<double>(x[i]);
  fftw_execute_dft_r2c(plans_->forward, r, c);

  const double norm = 1.0 / std::sqrt(static_cast<double>(size_));
  const double root2 = std::numbers::sqrt2 * norm;
  out[0] = static_cast<T>(c[0][0] * norm);
  out[half] = static_cast<T>(c[half][0] * norm);
  for (std::size_t k = 1; k < half; ++k) {
    out[k] = static_cast<T>(c[k][0] * root2);
    out[half + k] = static_cast<T>(c[k][1] * root2);
  }
}

template <typename T>
void FourierPreconditioner::apply_transpose(std::span<const T> y, std::span<T> out) const {
  detail::require(y.size() == size_ && out.size() == size_, "fourier preconditioner: length mismatch");
  const std::size_t half = size_ / 2;
  FftwBuffer real(sizeof(double) * size_);
  FftwBuffer spec(sizeof(fftw_complex) * (half + 1));
  auto* r = static_cast<double*>(real.ptr);
  auto* c = static_cast<fftw_complex*>(spec.ptr);
  const double inv_root2 = 1.0 / std::numbers::sqrt2;
  c[0][0] = static_cast<double>(y[0]);
  c[0][1] = 0.0;
  c[half][0] = static_cast<double>(y[half]);
  c[half][1] = 0.0;
  for (std::size_t k = 1; k < half; ++k) {
    c[k][0] = static_cast<double>(y[k]) * inv_root2;
    c[k][1] = static_cast<double>(y[half + k]) * inv_root2;
  }
  fftw_execute_dft_c2r(plans_->backward, c, r);
  const double norm = 1.0 / std::sqrt(static_cast<double>(size_));
  for (std::size_t i = 0; i < size_; ++i) out[i] = static_cast<T>(r[i] * norm);
}

template void FourierPreconditioner::apply<float>(std::span<const float>, std::span<float>) const;
template void FourierPreconditioner::apply<double>(std::span<const double>, std::span<double>) const;
template void FourierPreconditioner::apply_transpose<float>(std::span<const float>, std::span<float>) const;
template void FourierPreconditioner::apply_transpose<double>(std::span<const double>, std::span<double>) const;

std::vector<double> fourier_preconditioner_apply(std::span<const double> x) {
  detail::require(x.size() >= 2 && x.size() % 2 == 0, "fourier_preconditioner_apply: length must be even");
  FourierPreconditioner f(x.size());
  std::vector<double> out(x.size());
  f.apply<double>(x, out);
  return out;
}

}  // namespace kronsketch
