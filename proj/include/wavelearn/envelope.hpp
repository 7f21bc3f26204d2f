#ifndef WAVELEARN_ENVELOPE_HPP
#define WAVELEARN_ENVELOPE_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "wavelearn/constellation.hpp"
#include "wavelearn/sinc_filter.hpp"

// Power-envelope statistics of the transmitted signal x(t): the pointwise
// variance of p(t) = |x(t)|^2 under i.i.d. symbols, its average over one
// symbol period, oversampled waveform rendering, NPD, PAPR and PSD.

namespace wavelearn {

// Var(p(t)) for i.i.d. symbols drawn uniformly from the constellation:
//   (mu4 - mu2^2) sum_l a_l^2
// + mu2^2 (sum_l a_l)^2 - mu2^2 sum_l a_l^2
// + mu2_tilde (|sum_l g_l^2|^2 - sum_l a_l^2),     a_l = |g(t - lT)|^2.
// The lag sum runs over every integer l with |t - lT| < D/2 (an infinite
// symbol stream; finite because the filter is time-limited).
inline double ped_variance_at(const FilterParams& tx, const Constellation& c, double t) {
  const Moments m = moments(c);
  const double half = 0.5 * tx.duration;
  const long l_lo = static_cast<long>(std::ceil(t - half));
  const long l_hi = static_cast<long>(std::floor(t + half));
  double sum_a = 0.0;
  double sum_a2 = 0.0;
  cplx sum_g2{0.0, 0.0};
  for (long l = l_lo; l <= l_hi; ++l) {
    const cplx g = eval_filter_time(tx, t - static_cast<double>(l));
    const double a = std::norm(g);
    sum_a += a;
    sum_a2 += a * a;
    sum_g2 += g * g;
  }
  const double mu2sq = m.mu2 * m.mu2;
  const double v = (m.mu4 - mu2sq) * sum_a2 + mu2sq * (sum_a * sum_a - sum_a2) +
                   m.mu2_tilde * (std::norm(sum_g2) - sum_a2);
  return std::max(0.0, v);
}

// V(theta, C): midpoint average of Var(p(t)) over one symbol period.
inline double avg_ped_variance(const FilterParams& tx, const Constellation& c,
                               int grid_points = 129) {
  if (grid_points < 1) throw std::invalid_argument("avg_ped_variance: grid_points < 1");
  double acc = 0.0;
  for (int k = 0; k < grid_points; ++k) {
    const double t = -0.5 + (k + 0.5) / static_cast<double>(grid_points);
    acc += ped_variance_at(tx, c, t);
  }
  return acc / static_cast<double>(grid_points);
}

struct RenderedSignal {
  std::vector<cplx> samples;  // x(t) on t = t_start + i/O
  double t_start = 0.0;
  int oversampling = 0;
  std::size_t n_symbols = 0;
  double filter_duration = 0.0;

  double time_at(std::size_t i) const {
    return t_start + static_cast<double>(i) / oversampling;
  }

  // Steady-state sample range: at least D/2 away from the first/last symbol,
  // so every contributing symbol slot is populated and statistics are
  // shift-invariant. The first/last D/2 are transients.
  std::pair<std::size_t, std::size_t> steady_range() const {
    const double lo = 0.5 * filter_duration;
    const double hi = static_cast<double>(n_symbols - 1) - 0.5 * filter_duration;
    if (hi <= lo) throw std::domain_error("steady_range: block too short for filter");
    const auto first = static_cast<std::size_t>(std::ceil((lo - t_start) * oversampling));
    const auto last = static_cast<std::size_t>(std::floor((hi - t_start) * oversampling));
    return {first, last + 1};
  }
};

// Superpose shifted pulses on a grid with `oversampling` samples per symbol
// period, covering the full signal support (edge transients included). The
// pulse is given by its samples at the same grid spacing, centered at index
// (pulse.size()-1)/2, and must span the filter duration.
inline RenderedSignal render_signal_sampled(std::span<const cplx> symbols,
                                            std::span<const cplx> pulse, double duration,
                                            int oversampling) {
  if (oversampling < 4) throw std::invalid_argument("render_signal: oversampling must be >= 4");
  if (symbols.empty()) throw std::invalid_argument("render_signal: no symbols");
  if (pulse.size() % 2 == 0) throw std::invalid_argument("render_signal: pulse must be odd-length");
  RenderedSignal sig;
  sig.oversampling = oversampling;
  sig.n_symbols = symbols.size();
  sig.filter_duration = duration;
  const double half = 0.5 * duration;
  sig.t_start = -half;
  const double t_end = static_cast<double>(symbols.size() - 1) + half;
  const std::size_t n = static_cast<std::size_t>((t_end - sig.t_start) * oversampling) + 1;
  sig.samples.assign(n, cplx{0.0, 0.0});
  const int span = static_cast<int>(pulse.size() / 2);
  for (std::size_t m = 0; m < symbols.size(); ++m) {
    const long center =
        static_cast<long>((static_cast<double>(m) - sig.t_start) * oversampling + 0.5);
    const cplx s = symbols[m];
    for (int i = -span; i <= span; ++i) {
      const long idx = center + i;
      if (idx < 0 || idx >= static_cast<long>(n)) continue;
      sig.samples[static_cast<std::size_t>(idx)] += s * pulse[static_cast<std::size_t>(i + span)];
    }
  }
  return sig;
}

inline RenderedSignal render_signal(std::span<const cplx> symbols, const FilterParams& tx,
                                    int oversampling) {
  if (oversampling < 4) throw std::invalid_argument("render_signal: oversampling must be >= 4");
  const int span = static_cast<int>(tx.duration * oversampling);
  std::vector<cplx> pulse(2 * static_cast<std::size_t>(span) + 1);
  for (int i = -span; i <= span; ++i) {
    pulse[static_cast<std::size_t>(i + span)] =
        eval_filter_time(tx, static_cast<double>(i) / oversampling);
  }
  return render_signal_sampled(symbols, pulse, tx.duration, oversampling);
}

// Real sampled-pulse variant (for the windowed-RRC baseline).
template <typename PulseFn>
inline RenderedSignal render_signal_pulse_fn(std::span<const cplx> symbols, PulseFn&& g,
                                             double duration, int oversampling) {
  if (oversampling < 4) throw std::invalid_argument("render_signal: oversampling must be >= 4");
  const int span = static_cast<int>(duration * oversampling);
  std::vector<cplx> pulse(2 * static_cast<std::size_t>(span) + 1);
  for (int i = -span; i <= span; ++i) {
    pulse[static_cast<std::size_t>(i + span)] = cplx{g(static_cast<double>(i) / oversampling), 0.0};
  }
  return render_signal_sampled(symbols, pulse, duration, oversampling);
}

// Normalized power deviation samples |p - mean(p)| / mean(p) over a sample span.
inline std::vector<double> npd_samples(std::span<const cplx> samples) {
  if (samples.empty()) throw std::domain_error("npd_samples: empty steady-state region");
  double mean_p = 0.0;
  for (const cplx& x : samples) mean_p += std::norm(x);
  mean_p /= static_cast<double>(samples.size());
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out[i] = std::abs(std::norm(samples[i]) - mean_p) / mean_p;
  }
  return out;
}

inline std::vector<double> npd_samples(const RenderedSignal& sig) {
  const auto [lo, hi] = sig.steady_range();
  return npd_samples(std::span<const cplx>(sig.samples).subspan(lo, hi - lo));
}

struct CcdfPoint {
  double threshold = 0.0;
  double probability = 0.0;
};

// Empirical CCDF of nonnegative samples on an even threshold grid.
inline std::vector<CcdfPoint> ccdf(std::vector<double> samples, int n_thresholds = 256) {
  if (samples.empty()) throw std::domain_error("ccdf: no samples");
  std::sort(samples.begin(), samples.end());
  const double max_v = samples.back();
  std::vector<CcdfPoint> out(static_cast<std::size_t>(n_thresholds));
  const double n = static_cast<double>(samples.size());
  for (int i = 0; i < n_thresholds; ++i) {
    const double thr = max_v * static_cast<double>(i) / (n_thresholds - 1);
    const auto it = std::upper_bound(samples.begin(), samples.end(), thr);
    out[static_cast<std::size_t>(i)] = {thr, static_cast<double>(samples.end() - it) / n};
  }
  return out;
}

// Fraction of samples strictly above a threshold.
inline double ccdf_at(std::span<const double> sorted_samples, double threshold) {
  const auto it = std::upper_bound(sorted_samples.begin(), sorted_samples.end(), threshold);
  return static_cast<double>(sorted_samples.end() - it) /
         static_cast<double>(sorted_samples.size());
}

inline double papr_db(std::span<const cplx> samples) {
  if (samples.empty()) throw std::domain_error("papr_db: empty steady-state region");
  double mean_p = 0.0;
  double max_p = 0.0;
  for (const cplx& x : samples) {
    const double p = std::norm(x);
    mean_p += p;
    max_p = std::max(max_p, p);
  }
  mean_p /= static_cast<double>(samples.size());
  return to_db(max_p / mean_p);
}

inline double papr_db(const RenderedSignal& sig) {
  const auto [lo, hi] = sig.steady_range();
  return papr_db(std::span<const cplx>(sig.samples).subspan(lo, hi - lo));
}

struct PsdPoint {
  double frequency = 0.0;  // in units of W = 1/T
  double power_db = 0.0;
};

namespace detail {

inline std::vector<PsdPoint> normalize_psd(std::vector<double> freq, std::vector<double> s) {
  // Scale so the trapezoid integral of the density is exactly 1.
  double integral = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    integral += 0.5 * (s[i] + s[i - 1]) * (freq[i] - freq[i - 1]);
  }
  std::vector<PsdPoint> out(s.size());
  const double floor_v = 1e-300;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i] = {freq[i], to_db(std::max(s[i] / integral, floor_v))};
  }
  return out;
}

}  // namespace detail

// Analytic PSD |g_hat(f)|^2 of a sinc-basis filter, density normalized to
// unit total power.
inline std::vector<PsdPoint> psd_sinc_filter(const FilterParams& tx, int grid_points = 2049,
                                             double f_max = 4.0) {
  std::vector<double> freq(static_cast<std::size_t>(grid_points));
  std::vector<double> s(static_cast<std::size_t>(grid_points));
  for (int i = 0; i < grid_points; ++i) {
    const double f = -f_max + 2.0 * f_max * i / (grid_points - 1);
    freq[static_cast<std::size_t>(i)] = f;
    s[static_cast<std::size_t>(i)] = std::norm(eval_filter_freq(tx, f));
  }
  return detail::normalize_psd(std::move(freq), std::move(s));
}

// PSD of a sampled (real or complex) pulse via direct Fourier quadrature.
inline std::vector<PsdPoint> psd_sampled_filter(std::span<const double> g, double t_start,
                                                double dt, int grid_points = 2049,
                                                double f_max = 4.0) {
  std::vector<double> freq(static_cast<std::size_t>(grid_points));
  std::vector<double> s(static_cast<std::size_t>(grid_points));
  for (int i = 0; i < grid_points; ++i) {
    const double f = -f_max + 2.0 * f_max * i / (grid_points - 1);
    cplx acc{0.0, 0.0};
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double t = t_start + dt * static_cast<double>(k);
      acc += g[k] * std::polar(1.0, -2.0 * kPi * f * t);
    }
    freq[static_cast<std::size_t>(i)] = f;
    s[static_cast<std::size_t>(i)] = std::norm(acc * dt);
  }
  return detail::normalize_psd(std::move(freq), std::move(s));
}

}  // namespace wavelearn

#endif  // WAVELEARN_ENVELOPE_HPP
