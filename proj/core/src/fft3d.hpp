#pragma once

#include <complex>
#include <cstddef>
#include <memory>

namespace sarreg::detail {

/// Real-to-complex and complex-to-real 3D transforms over an
/// (n0, n1, n2) row-major array, backed by FFTW plans created once per shape.
/// Instances are per-thread; use Fft3d::for_shape.
class Fft3d {
 public:
  Fft3d(int n0, int n1, int n2);
  ~Fft3d();
  Fft3d(const Fft3d&) = delete;
  Fft3d& operator=(const Fft3d&) = delete;

  /// Cached instance for the calling thread.
  static Fft3d& for_shape(int n0, int n1, int n2);

  std::size_t real_size() const noexcept { return real_size_; }
  std::size_t complex_size() const noexcept { return complex_size_; }

  /// Scratch buffers with FFTW alignment.
  double* real_a() noexcept { return real_a_; }
  double* real_b() noexcept { return real_b_; }
  std::complex<double>* spec_a() noexcept { return spec_a_; }
  std::complex<double>* spec_b() noexcept { return spec_b_; }

  void forward(double* in, std::complex<double>* out);
  /// Unnormalised inverse; destroys `in`.
  void inverse(std::complex<double>* in, double* out);

 private:
  struct Plans;
  std::unique_ptr<Plans> plans_;
  std::size_t real_size_;
  std::size_t complex_size_;
  double* real_a_ = nullptr;
  double* real_b_ = nullptr;
  std::complex<double>* spec_a_ = nullptr;
  std::complex<double>* spec_b_ = nullptr;
};

}  // namespace sarreg::detail
