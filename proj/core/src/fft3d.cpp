#include "fft3d.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace sarreg::detail {

namespace {
// The FFTW planner is not re-entrant; plan execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct Fft3d::Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

Fft3d::Fft3d(int n0, int n1, int n2)
    : plans_(std::make_unique<Plans>()),
      real_size_(static_cast<std::size_t>(n0) * n1 * n2),
      complex_size_(static_cast<std::size_t>(n0) * n1 * (n2 / 2 + 1)) {
  std::lock_guard lock(planner_mutex());
  real_a_ = fftw_alloc_real(real_size_);
  real_b_ = fftw_alloc_real(real_size_);
  spec_a_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(complex_size_));
  spec_b_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(complex_size_));
  // FFTW_ESTIMATE keeps plan selection, and therefore results, reproducible.
  plans_->forward = fftw_plan_dft_r2c_3d(n0, n1, n2, real_a_,
                                         reinterpret_cast<fftw_complex*>(spec_a_), FFTW_ESTIMATE);
  plans_->inverse = fftw_plan_dft_c2r_3d(n0, n1, n2, reinterpret_cast<fftw_complex*>(spec_a_),
                                         real_a_, FFTW_ESTIMATE);
}

Fft3d::~Fft3d() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plans_->forward);
  fftw_destroy_plan(plans_->inverse);
  fftw_free(real_a_);
  fftw_free(real_b_);
  fftw_free(spec_a_);
  fftw_free(spec_b_);
}

Fft3d& Fft3d::for_shape(int n0, int n1, int n2) {
  thread_local std::map<std::tuple<int, int, int>, std::unique_ptr<Fft3d>> cache;
  auto& slot = cache[{n0, n1, n2}];
  if (!slot) slot = std::make_unique<Fft3d>(n0, n1, n2);
  return *slot;
}

void Fft3d::forward(double* in, std::complex<double>* out) {
  fftw_execute_dft_r2c(plans_->forward, in, reinterpret_cast<fftw_complex*>(out));
}

void Fft3d::inverse(std::complex<double>* in, double* out) {
  fftw_execute_dft_c2r(plans_->inverse, reinterpret_cast<fftw_complex*>(in), out);
}

}  // namespace sarreg::detail
