#ifndef WAVELEARN_COMMON_HPP
#define WAVELEARN_COMMON_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace wavelearn {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

using cplx = std::complex<double>;

/// Raised by linear-algebra and training code when a computation leaves the
/// representable/stable regime (indefinite matrix, non-finite loss, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised by config parsing/validation. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// sinc(x) = sin(pi x) / (pi x), sinc(0) = 1.
inline double sinc(double x) {
  const double px = kPi * x;
  if (std::abs(px) < 1e-4) {
    const double p2 = px * px;
    return 1.0 - p2 / 6.0 * (1.0 - p2 / 20.0);
  }
  return std::sin(px) / px;
}

inline double to_db(double x) { return 10.0 * std::log10(x); }
inline double from_db(double x_db) { return std::pow(10.0, x_db / 10.0); }

inline double sq(double x) { return x * x; }

// sin(pi k delta) for integer k, evaluated through delta - 1 so that the
// result is exactly zero at delta == 1 (and stays accurate nearby).
inline double sin_pi_int_times(int k, double delta) {
  const double r = std::sin(kPi * k * (delta - 1.0));
  return (k % 2 == 0) ? r : -r;
}

// Simple dense complex square matrix, row-major.
struct CMat {
  int n = 0;
  std::vector<cplx> a;

  CMat() = default;
  explicit CMat(int size) : n(size), a(static_cast<std::size_t>(size) * size) {}

  cplx& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  const cplx& at(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
};

// Dense real square matrix, row-major.
struct RMat {
  int n = 0;
  std::vector<double> a;

  RMat() = default;
  explicit RMat(int size) : n(size), a(static_cast<std::size_t>(size) * size) {}

  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
};

}  // namespace wavelearn

#endif  // WAVELEARN_COMMON_HPP
