#ifndef WAVELEARN_RRC_BASELINE_HPP
#define WAVELEARN_RRC_BASELINE_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "wavelearn/constellation.hpp"
#include "wavelearn/linalg.hpp"
#include "wavelearn/quadrature.hpp"
#include "wavelearn/rng.hpp"

// Benchmark link: Blackman-windowed root-raised-cosine filters, Gray QAM and
// the exact AWGN LLR demapper. Everything here is computed numerically from
// densely sampled pulses, independent of the sinc-basis machinery.

namespace wavelearn {

// Unit-energy RRC impulse response (T = 1). Removable singularities at t = 0
// and |t| = 1/(4 beta) are evaluated by their analytic limits.
inline double rrc_time(double t, double beta) {
  if (beta < 0.0 || beta >= 1.0) throw std::invalid_argument("rrc_time: beta in [0,1)");
  if (beta == 0.0) return sinc(t);
  const double x = 4.0 * beta * t;
  if (std::abs(t) < 1e-10) {
    return 1.0 + beta * (4.0 / kPi - 1.0);
  }
  if (std::abs(std::abs(x) - 1.0) < 1e-8) {
    const double a = (1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * beta));
    const double b = (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * beta));
    return beta / std::sqrt(2.0) * (a + b);
  }
  const double num = std::sin(kPi * t * (1.0 - beta)) + x * std::cos(kPi * t * (1.0 + beta));
  return num / (kPi * t * (1.0 - x * x));
}

// Blackman window on (-1/2, 1/2).
inline double blackman(double u) {
  if (!(std::abs(u) < 0.5)) return 0.0;
  return 0.42 + 0.5 * std::cos(2.0 * kPi * u) + 0.08 * std::cos(4.0 * kPi * u);
}

struct RrcSpec {
  double rolloff = 0.0;    // beta in [0, 1)
  double duration = 32.0;  // D, in symbol periods
  bool windowed = true;

  RrcSpec() = default;
  RrcSpec(double beta, double dur, bool win = true)
      : rolloff(beta), duration(dur), windowed(win) {
    if (beta < 0.0 || beta >= 1.0) throw std::invalid_argument("RrcSpec: beta in [0,1)");
    if (!(dur > 0.0)) throw std::invalid_argument("RrcSpec: duration must be positive");
  }
};

// Windowed RRC pulse, renormalized to unit energy over its support. The
// unwindowed variant is the plain (already unit-energy) RRC.
class BaselineFilter {
 public:
  explicit BaselineFilter(const RrcSpec& spec) : spec_(spec) {
    if (spec_.windowed) {
      const auto f = [this](double t) { return sq(raw(t)); };
      const double energy = simpson(f, -0.5 * spec_.duration, 0.5 * spec_.duration, 1 << 16);
      scale_ = 1.0 / std::sqrt(energy);
    }
  }

  const RrcSpec& spec() const { return spec_; }

  double operator()(double t) const { return scale_ * raw(t); }

 private:
  double raw(double t) const {
    if (!spec_.windowed) return rrc_time(t, spec_.rolloff);
    if (!(std::abs(t) < 0.5 * spec_.duration)) return 0.0;
    return rrc_time(t, spec_.rolloff) * blackman(t / spec_.duration);
  }

  RrcSpec spec_;
  double scale_ = 1.0;
};

// Discrete-equivalent quantities of the baseline link, from dense sampling.
struct BaselineLink {
  std::vector<double> taps;        // alpha(lT), l = -(L-1) .. L-1 (real pulse)
  int tap_center = 0;
  std::vector<double> noise_lags;  // E[n_m n_{m+l}^*] / N0, l = 0 .. L-1
  double aclr = 0.0;               // linear
};

inline int baseline_oversampling() { return 64; }

// Builds taps, noise correlation and ACLR for matched tx = rx baseline pulses.
inline BaselineLink baseline_link_quantities(const RrcSpec& spec) {
  BaselineLink link;
  const BaselineFilter g(spec);
  const int ovs = baseline_oversampling();
  const double dt = 1.0 / ovs;
  // Sample over the window support for windowed pulses; truncate the
  // unwindowed RRC far out so its tails are negligible.
  const double half = spec.windowed ? 0.5 * spec.duration : std::max(64.0, spec.duration);
  const long n = static_cast<long>(half * ovs);
  std::vector<double> samp(static_cast<std::size_t>(2 * n + 1));
  for (long i = -n; i <= n; ++i) {
    samp[static_cast<std::size_t>(i + n)] = g(static_cast<double>(i) * dt);
  }

  // alpha(l) = integral g(z) g(l - z) dz = integral g(z) g(z - l) dz for the
  // symmetric pulse; the same correlation gives the noise lags.
  const int l_max = static_cast<int>(std::ceil(2.0 * half)) - 1;
  const auto corr_at = [&](int lag) {
    const long shift = static_cast<long>(lag) * ovs;
    double acc = 0.0;
    for (long i = -n; i <= n; ++i) {
      const long j = i - shift;
      if (j < -n || j > n) continue;
      acc += samp[static_cast<std::size_t>(i + n)] * samp[static_cast<std::size_t>(j + n)];
    }
    return acc * dt;
  };
  link.tap_center = l_max;
  link.taps.resize(static_cast<std::size_t>(2 * l_max + 1));
  for (int l = -l_max; l <= l_max; ++l) {
    link.taps[static_cast<std::size_t>(l + l_max)] = corr_at(l);
  }
  link.noise_lags.resize(static_cast<std::size_t>(l_max + 1));
  for (int l = 0; l <= l_max; ++l) {
    link.noise_lags[static_cast<std::size_t>(l)] = link.taps[static_cast<std::size_t>(l + l_max)];
  }

  // ACLR from in-band spectral integration; total energy from the time domain.
  double total = 0.0;
  for (double v : samp) total += v * v;
  total *= dt;
  const auto spectrum = [&](double f) {
    cplx acc{0.0, 0.0};
    for (long i = -n; i <= n; ++i) {
      acc += samp[static_cast<std::size_t>(i + n)] *
             std::polar(1.0, -2.0 * kPi * f * static_cast<double>(i) * dt);
    }
    return std::norm(acc * dt);
  };
  const double e_in = simpson(spectrum, -0.5, 0.5, 4096);
  link.aclr = std::max(0.0, (total - e_in) / e_in);
  return link;
}

// Exact AWGN LLRs, one per bit: ln sum_{c in C(k,0)} exp(-|r-c|^2/N0)
//                             - ln sum_{c in C(k,1)} exp(-|r-c|^2/N0).
// Positive values favor bit 0 (max-subtraction for stability).
inline std::vector<double> awgn_llr(cplx r, const Constellation& c, double n0) {
  if (!(n0 > 0.0)) throw std::invalid_argument("awgn_llr: N0 must be positive");
  const int k_bits = c.bits_per_symbol;
  std::vector<double> metric(c.points.size());
  double best = -1e300;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    metric[i] = -std::norm(r - c.points[i]) / n0;
    best = std::max(best, metric[i]);
  }
  std::vector<double> llr(static_cast<std::size_t>(k_bits));
  for (int k = 0; k < k_bits; ++k) {
    double s0 = 0.0;
    double s1 = 0.0;
    const std::size_t bit_mask = std::size_t{1} << (k_bits - 1 - k);
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      const double e = std::exp(metric[i] - best);
      if (i & bit_mask) {
        s1 += e;
      } else {
        s0 += e;
      }
    }
    llr[static_cast<std::size_t>(k)] = std::log(s0) - std::log(s1);
  }
  return llr;
}

struct RateEstimate {
  double rate = 0.0;    // bits per channel use
  double stderr_ = 0.0;
  int blocks = 0;
};

namespace detail {

// -log2 Q(b | r) from an LLR in the bit-0-numerator orientation.
inline double bit_logloss(double llr_bit0, std::uint8_t bit) {
  // Q(b=0) = sigmoid(llr), so -ln Q(b) = softplus(-llr) or softplus(+llr).
  const double z = (bit == 0) ? -llr_bit0 : llr_bit0;
  const double sp = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return sp / std::log(2.0);
}

}  // namespace detail

// Monte-Carlo estimate of the baseline's bit-metric rate K - L, where L is the
// total binary cross-entropy of the symbol-wise AWGN demapper on the actual
// ISI + correlated-noise link. Explicit taps/noise-lags overload so ideal
// (ISI-free, white) references can reuse the estimator.
inline RateEstimate estimate_rate(std::span<const double> taps, int tap_center,
                                  std::span<const double> noise_lags, const Constellation& c,
                                  double n0, int num_blocks, std::size_t block_len,
                                  CounterRng& rng) {
  const int k_bits = c.bits_per_symbol;
  std::vector<cplx> lags(noise_lags.size());
  for (std::size_t i = 0; i < noise_lags.size(); ++i) lags[i] = n0 * noise_lags[i];
  const std::vector<cplx> cov = toeplitz_from_lags(lags, block_len);
  const CholResult chol = cholesky_psd(cov, static_cast<int>(block_len));

  std::vector<std::uint8_t> bits(block_len * static_cast<std::size_t>(k_bits));
  std::vector<cplx> z(block_len);
  std::vector<double> block_rates;
  block_rates.reserve(static_cast<std::size_t>(num_blocks));
  for (int b = 0; b < num_blocks; ++b) {
    for (auto& bit : bits) bit = rng.bit() ? 1 : 0;
    const std::vector<cplx> s = modulate(bits, c);
    for (auto& v : z) v = rng.cgaussian();
    const std::vector<cplx> noise = lower_tri_matvec(chol.lower, static_cast<int>(block_len), z);
    double loss = 0.0;
    for (std::size_t m = 0; m < block_len; ++m) {
      cplx r = noise[m];
      for (int l = -tap_center; l <= tap_center; ++l) {
        const long idx = static_cast<long>(m) - l;
        if (idx < 0 || idx >= static_cast<long>(block_len)) continue;
        r += taps[static_cast<std::size_t>(l + tap_center)] * s[static_cast<std::size_t>(idx)];
      }
      const std::vector<double> llr = awgn_llr(r, c, n0);
      for (int k = 0; k < k_bits; ++k) {
        loss += detail::bit_logloss(llr[static_cast<std::size_t>(k)],
                                    bits[m * static_cast<std::size_t>(k_bits) +
                                         static_cast<std::size_t>(k)]);
      }
    }
    block_rates.push_back(static_cast<double>(k_bits) - loss / static_cast<double>(block_len));
  }
  RateEstimate est;
  est.blocks = num_blocks;
  for (double r : block_rates) est.rate += r;
  est.rate /= static_cast<double>(num_blocks);
  double var = 0.0;
  for (double r : block_rates) var += sq(r - est.rate);
  if (num_blocks > 1) {
    var /= static_cast<double>(num_blocks - 1);
    est.stderr_ = std::sqrt(var / static_cast<double>(num_blocks));
  }
  return est;
}

inline RateEstimate baseline_rate(const BaselineLink& link, const Constellation& c, double n0,
                                  int num_blocks, std::size_t block_len, CounterRng& rng) {
  return estimate_rate(link.taps, link.tap_center, link.noise_lags, c, n0, num_blocks,
                       block_len, rng);
}

}  // namespace wavelearn

#endif  // WAVELEARN_RRC_BASELINE_HPP
