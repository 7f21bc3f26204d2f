#ifndef WAVELEARN_LINALG_HPP
#define WAVELEARN_LINALG_HPP

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "wavelearn/common.hpp"

namespace wavelearn {

inline constexpr std::array<double, 4> kCholJitterSchedule = {0.0, 1e-12, 1e-10, 1e-8};

struct CholResult {
  std::vector<cplx> lower;  // n x n row-major, strictly upper part zero
  double jitter = 0.0;
};

namespace detail {

// Lower Cholesky of a Hermitian PSD matrix (reads the lower triangle only).
// Vanishing pivots produce zero columns (semidefinite input); a negative
// pivot beyond tolerance signals failure.
inline bool try_cholesky(std::span<const cplx> herm, int n, double jitter,
                         std::vector<cplx>& lower) {
  lower.assign(static_cast<std::size_t>(n) * n, cplx{0.0, 0.0});
  double max_diag = 0.0;
  for (int i = 0; i < n; ++i) {
    max_diag = std::max(max_diag, std::abs(herm[static_cast<std::size_t>(i) * n + i].real()));
  }
  const double tol = std::max(max_diag, 1.0e-300) * 1e-14;
  const auto l = [&](int i, int j) -> cplx& {
    return lower[static_cast<std::size_t>(i) * n + j];
  };
  for (int j = 0; j < n; ++j) {
    double acc = herm[static_cast<std::size_t>(j) * n + j].real() + jitter;
    for (int k = 0; k < j; ++k) acc -= std::norm(l(j, k));
    if (acc < -tol) return false;
    const double d = acc > tol ? std::sqrt(acc) : 0.0;
    l(j, j) = d;
    if (d == 0.0) continue;
    for (int i = j + 1; i < n; ++i) {
      cplx s = herm[static_cast<std::size_t>(i) * n + j];
      for (int k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
      l(i, j) = s / d;
    }
  }
  return true;
}

}  // namespace detail

// PSD Cholesky with an escalating jitter schedule on the diagonal.
inline CholResult cholesky_psd(std::span<const cplx> herm, int n,
                               std::span<const double> jitter_schedule = kCholJitterSchedule) {
  CholResult r;
  for (double j : jitter_schedule) {
    if (detail::try_cholesky(herm, n, j, r.lower)) {
      r.jitter = j;
      return r;
    }
  }
  throw NumericalError("cholesky_psd: matrix indefinite after jitter escalation");
}

inline std::vector<cplx> lower_tri_matvec(std::span<const cplx> lower, int n,
                                          std::span<const cplx> x) {
  std::vector<cplx> y(static_cast<std::size_t>(n), cplx{0.0, 0.0});
  for (int i = 0; i < n; ++i) {
    cplx acc{0.0, 0.0};
    const std::size_t row = static_cast<std::size_t>(i) * n;
    for (int j = 0; j <= i; ++j) acc += lower[row + j] * x[static_cast<std::size_t>(j)];
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

// Hermitian Toeplitz matrix from one-sided lags c_0 .. c_{L-1}:
// entry (i, j) = c_{j-i} for j >= i, conj(c_{i-j}) otherwise; zero beyond L-1.
inline std::vector<cplx> toeplitz_from_lags(std::span<const cplx> lags, std::size_t n) {
  std::vector<cplx> m(n * n, cplx{0.0, 0.0});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t d = i > j ? i - j : j - i;
      if (d >= lags.size()) continue;
      m[i * n + j] = (j >= i) ? lags[d] : std::conj(lags[d]);
    }
  }
  return m;
}

}  // namespace wavelearn

#endif  // WAVELEARN_LINALG_HPP
