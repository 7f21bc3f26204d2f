#ifndef WAVELEARN_CHANNEL_HPP
#define WAVELEARN_CHANNEL_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "wavelearn/linalg.hpp"
#include "wavelearn/sinc_filter.hpp"

// Discrete-equivalent AWGN link: symbol-spaced ISI taps from the tx/rx filter
// convolution, plus additive Gaussian noise whose Toeplitz covariance follows
// from the receive filter. Noise is realized as L * z with L the (jittered)
// Cholesky factor and z a standard circularly-symmetric draw, so the same
// draws can be reused across parameter values.

namespace wavelearn {

struct DiscreteChannel {
  std::vector<cplx> taps;        // alpha(lT), l = -(L-1) .. L-1
  int tap_center = 0;
  std::vector<cplx> noise_chol;  // n x n lower factor of the noise covariance
  std::size_t block_len = 0;
  double noise_density = 0.0;
  double jitter = 0.0;
};

inline DiscreteChannel make_channel(const FilterParams& tx, const FilterParams& rx,
                                    std::size_t block_len, double noise_density) {
  DiscreteChannel ch;
  ch.block_len = block_len;
  ch.noise_density = noise_density;
  const int span = static_cast<int>(tx.duration);  // D in symbol periods
  ch.tap_center = span - 1;
  ch.taps.resize(static_cast<std::size_t>(2 * span - 1));
  for (int l = -(span - 1); l <= span - 1; ++l) {
    ch.taps[static_cast<std::size_t>(l + span - 1)] =
        effective_channel(tx, rx, static_cast<double>(l));
  }
  std::vector<cplx> lags(static_cast<std::size_t>(span));
  for (int l = 0; l < span; ++l) {
    lags[static_cast<std::size_t>(l)] =
        noise_covariance(rx, static_cast<double>(l), noise_density);
  }
  const std::vector<cplx> cov = toeplitz_from_lags(lags, block_len);
  CholResult chol = cholesky_psd(cov, static_cast<int>(block_len));
  ch.noise_chol = std::move(chol.lower);
  ch.jitter = chol.jitter;
  return ch;
}

// r = conv(s, taps) + L z, linear convolution with zero padding at the edges.
inline std::vector<cplx> transmit(std::span<const cplx> symbols, const DiscreteChannel& ch,
                                  std::span<const cplx> noise_draw) {
  if (symbols.size() != ch.block_len || noise_draw.size() != ch.block_len) {
    throw std::invalid_argument("transmit: block length mismatch");
  }
  const std::size_t n = ch.block_len;
  std::vector<cplx> r =
      lower_tri_matvec(ch.noise_chol, static_cast<int>(n), noise_draw);
  for (std::size_t m = 0; m < n; ++m) {
    cplx acc{0.0, 0.0};
    for (int l = -ch.tap_center; l <= ch.tap_center; ++l) {
      const long src = static_cast<long>(m) - l;
      if (src < 0 || src >= static_cast<long>(n)) continue;
      acc += ch.taps[static_cast<std::size_t>(l + ch.tap_center)] *
             symbols[static_cast<std::size_t>(src)];
    }
    r[m] += acc;
  }
  return r;
}

}  // namespace wavelearn

#endif  // WAVELEARN_CHANNEL_HPP
