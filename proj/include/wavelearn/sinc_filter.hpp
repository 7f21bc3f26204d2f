#ifndef WAVELEARN_SINC_FILTER_HPP
#define WAVELEARN_SINC_FILTER_HPP

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavelearn/common.hpp"
#include "wavelearn/quadrature.hpp"

// Closed-form algebra for filters that are time-limited to (-D/2, D/2) and
// expressed in the shifted-sinc frequency basis
//
//   g_hat(f) = sum_s  c_s * sinc(D f - s),   s = -S .. S.
//
// All quantities a link simulation needs (filter values, effective channel,
// noise correlation, in-band energy) reduce to small dense quadratic or
// bilinear forms in the coefficient vector; this header provides them.
// Time is measured in symbol periods throughout (T = 1, W = 1/T = 1).

namespace wavelearn {

enum class FilterRole { kTx, kRx };

struct BandSpec {
  double bandwidth = 1.0;      // W
  double symbol_period = 1.0;  // T, with W * T == 1

  BandSpec() = default;
  BandSpec(double w, double t) : bandwidth(w), symbol_period(t) {
    if (std::abs(w * t - 1.0) > 1e-12) {
      throw std::invalid_argument("BandSpec: bandwidth * symbol_period must equal 1");
    }
  }
};

struct FilterParams {
  std::vector<cplx> coeffs;  // 2S+1 entries, index s+S holds coefficient s
  double duration = 0.0;     // D, in symbol periods
  int half_size = 0;         // S
  FilterRole role = FilterRole::kTx;

  FilterParams() = default;
  FilterParams(std::vector<cplx> c, double dur, FilterRole r)
      : coeffs(std::move(c)), duration(dur), role(r) {
    if (coeffs.empty() || coeffs.size() % 2 == 0) {
      throw std::invalid_argument("FilterParams: coefficient count must be odd (2S+1)");
    }
    half_size = static_cast<int>(coeffs.size() / 2);
    if (!(duration > 0.0)) {
      throw std::invalid_argument("FilterParams: duration must be positive");
    }
  }

  const cplx& coeff(int s) const { return coeffs[static_cast<std::size_t>(s + half_size)]; }
};

inline double coeff_energy(std::span<const cplx> coeffs) {
  double e = 0.0;
  for (const cplx& c : coeffs) e += std::norm(c);
  return e;
}

// Normalization constant C = D / (c^H c); the transmit filter scaled by
// sqrt(C)/D has exactly unit energy.
inline double tx_norm_const(std::span<const cplx> coeffs, double duration) {
  const double e = coeff_energy(coeffs);
  if (e == 0.0) throw std::domain_error("tx_norm_const: zero coefficient vector");
  return duration / e;
}

inline double tx_norm_const(const FilterParams& p) {
  return tx_norm_const(p.coeffs, p.duration);
}

// Filter value at time t. Zero outside (-D/2, D/2). For tx filters the
// sqrt(C)/D unit-energy prefactor is applied when `normalized` is true;
// rx filters always carry the 1/D prefactor.
inline cplx eval_filter_time(const FilterParams& p, double t, bool normalized = true) {
  const double d = p.duration;
  if (!(std::abs(t) < 0.5 * d)) return {0.0, 0.0};
  cplx acc{0.0, 0.0};
  const double w = 2.0 * kPi * t / d;
  for (int s = -p.half_size; s <= p.half_size; ++s) {
    acc += p.coeff(s) * std::polar(1.0, w * s);
  }
  double scale = 1.0 / d;
  if (p.role == FilterRole::kTx && normalized) {
    scale = std::sqrt(tx_norm_const(p)) / d;
  }
  return acc * scale;
}

// Frequency response at f. Tx filters include the sqrt(C) factor.
inline cplx eval_filter_freq(const FilterParams& p, double f) {
  cplx acc{0.0, 0.0};
  for (int s = -p.half_size; s <= p.half_size; ++s) {
    acc += p.coeff(s) * sinc(p.duration * f - s);
  }
  if (p.role == FilterRole::kTx) acc *= std::sqrt(tx_norm_const(p));
  return acc;
}

namespace detail {

struct OverlapWindow {
  double delta;    // L_max - L_min, overlap length in units of D
  double ssum;     // L_max + L_min
  bool empty;
};

inline OverlapWindow overlap_window(double t_over_d) {
  const double lmax = std::min(0.5, t_over_d + 0.5);
  const double lmin = std::max(-0.5, t_over_d - 0.5);
  OverlapWindow w;
  w.delta = lmax - lmin;
  w.ssum = lmax + lmin;
  w.empty = !(w.delta > 0.0);
  return w;
}

}  // namespace detail

// Gram matrix of the exponential basis against itself shifted by t, pairing
// row coefficients with un-conjugated column coefficients:
//   a^T conv_gram(t) b  ~  integral of a-filter(z) * b-filter(t - z) dz.
// conv_gram(0) is exactly the identity; the matrix vanishes for |t| >= D.
inline CMat conv_gram(double t, int half_size, double duration) {
  const int n = 2 * half_size + 1;
  CMat m(n);
  const auto w = detail::overlap_window(t / duration);
  if (w.empty) return m;
  const double base = 2.0 * kPi * t / duration;
  for (int s1 = -half_size; s1 <= half_size; ++s1) {
    for (int s2 = -half_size; s2 <= half_size; ++s2) {
      cplx v;
      if (s1 == s2) {
        v = std::polar(w.delta, base * s1);
      } else {
        const int k = s2 - s1;
        const double mag = sin_pi_int_times(k, w.delta) / (kPi * k);
        const double phase = base * s1 + kPi * k * w.ssum;
        v = std::polar(mag, phase);
      }
      m.at(s1 + half_size, s2 + half_size) = v;
    }
  }
  return m;
}

// Gram matrix for the conjugated pairing, used for the noise correlation:
//   a^T corr_gram(t) conj(a)  ~  integral of a-filter(z) * conj(a-filter(z - t)) dz.
inline CMat corr_gram(double t, int half_size, double duration) {
  const int n = 2 * half_size + 1;
  CMat m(n);
  const auto w = detail::overlap_window(-t / duration);
  if (w.empty) return m;
  const double base = 2.0 * kPi * t / duration;
  for (int s1 = -half_size; s1 <= half_size; ++s1) {
    for (int s2 = -half_size; s2 <= half_size; ++s2) {
      cplx v;
      if (s1 == s2) {
        v = std::polar(w.delta, base * s1);
      } else {
        const int k = s1 - s2;
        const double mag = sin_pi_int_times(k, w.delta) / (kPi * k);
        const double phase = base * s1 + kPi * k * w.ssum;
        v = std::polar(mag, phase);
      }
      m.at(s1 + half_size, s2 + half_size) = v;
    }
  }
  return m;
}

// Effective channel alpha(t): the tx/rx filter convolution, evaluated through
// the Gram form. Zero outside (-D, D). Both filters must share S and D.
inline cplx effective_channel(const FilterParams& tx, const FilterParams& rx, double t) {
  if (tx.half_size != rx.half_size || tx.duration != rx.duration) {
    throw std::invalid_argument("effective_channel: filters must share S and D");
  }
  const double d = tx.duration;
  if (!(std::abs(t) < d)) return {0.0, 0.0};
  const double c = tx_norm_const(tx);
  const CMat a = conv_gram(t, tx.half_size, d);
  cplx acc{0.0, 0.0};
  const int n = 2 * tx.half_size + 1;
  for (int i = 0; i < n; ++i) {
    cplx row{0.0, 0.0};
    for (int j = 0; j < n; ++j) row += a.at(i, j) * rx.coeffs[j];
    acc += tx.coeffs[i] * row;
  }
  return acc * (std::sqrt(c) / d);
}

// Noise sample correlation at lag t = l*T for a receive filter applied to
// white noise of density n0:  E[n_m conj(n_{m+l})] = (n0/D) psi^T A'(lT) conj(psi).
inline cplx noise_covariance(const FilterParams& rx, double lag_t, double n0) {
  if (n0 < 0.0) throw std::invalid_argument("noise_covariance: negative noise density");
  const double d = rx.duration;
  if (!(std::abs(lag_t) < d)) return {0.0, 0.0};
  const CMat a = corr_gram(lag_t, rx.half_size, d);
  const int n = 2 * rx.half_size + 1;
  cplx acc{0.0, 0.0};
  for (int i = 0; i < n; ++i) {
    cplx row{0.0, 0.0};
    for (int j = 0; j < n; ++j) row += a.at(i, j) * std::conj(rx.coeffs[j]);
    acc += rx.coeffs[i] * row;
  }
  return acc * (n0 / d);
}

// ---------------------------------------------------------------------------
// In-band energy Gram matrix
//   E_{s1,s2} = integral over (-W/2, W/2) of sinc(D f - s1) sinc(D f - s2) df
// Real, symmetric, positive semidefinite; precomputed once per (S, D, W) and
// optionally cached on disk.
// ---------------------------------------------------------------------------

inline constexpr double kInbandGramTol = 1e-12;  // absolute, per entry

inline RMat build_inband_gram(int half_size, double duration,
                              const BandSpec& band = BandSpec()) {
  const int n = 2 * half_size + 1;
  RMat e(n);
  const double a = 0.5 * duration * band.bandwidth;  // integration bound in v = D f
  const double tol = kInbandGramTol * duration;      // entries carry a 1/D factor
  for (int s1 = -half_size; s1 <= half_size; ++s1) {
    for (int s2 = s1; s2 <= half_size; ++s2) {
      const auto f = [s1, s2](double v) { return sinc(v - s1) * sinc(v - s2); };
      const double val = adaptive_quadrature(f, -a, a, tol) / duration;
      e.at(s1 + half_size, s2 + half_size) = val;
      e.at(s2 + half_size, s1 + half_size) = val;
    }
  }
  return e;
}

namespace detail {

inline std::string inband_cache_name(int half_size, double duration, const BandSpec& band) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "inband_gram_S%d_D%g_WT%g.json", half_size,
                duration / band.symbol_period, band.bandwidth * band.symbol_period);
  return buf;
}

}  // namespace detail

// Cached variant: loads (or writes) a JSON file keyed by (S, D/T, W*T).
inline RMat build_inband_gram_cached(int half_size, double duration,
                                     const std::filesystem::path& cache_dir,
                                     const BandSpec& band = BandSpec()) {
  namespace fs = std::filesystem;
  const fs::path file = cache_dir / detail::inband_cache_name(half_size, duration, band);
  const int n = 2 * half_size + 1;
  if (fs::exists(file)) {
    std::ifstream in(file);
    nlohmann::json j;
    in >> j;
    if (j.value("half_size", -1) == half_size &&
        std::abs(j.value("duration_over_t", 0.0) - duration / band.symbol_period) < 1e-9 &&
        j["entries"].size() == static_cast<std::size_t>(n) * n) {
      RMat e(n);
      std::size_t k = 0;
      for (const auto& v : j["entries"]) e.a[k++] = v.get<double>();
      return e;
    }
    // Stale or corrupt header: fall through and regenerate.
  }
  RMat e = build_inband_gram(half_size, duration, band);
  fs::create_directories(cache_dir);
  nlohmann::json j;
  j["half_size"] = half_size;
  j["duration_over_t"] = duration / band.symbol_period;
  j["bandwidth_t"] = band.bandwidth * band.symbol_period;
  j["tolerance"] = kInbandGramTol;
  j["entries"] = e.a;
  std::ofstream out(file);
  out << j.dump() << "\n";
  return e;
}

// Process-wide memoized access (read-mostly map, exclusive insertion).
inline const RMat& inband_gram_shared(int half_size, double duration) {
  static std::mutex mu;
  static std::map<std::pair<int, long long>, RMat> cache;
  std::scoped_lock lock(mu);
  const auto key = std::make_pair(half_size, static_cast<long long>(duration * 1024));
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, build_inband_gram(half_size, duration)).first;
  }
  return it->second;
}

// Fraction of transmit energy inside (-W/2, W/2): E_I = C * theta^H E theta.
inline double in_band_energy(std::span<const cplx> coeffs, const RMat& inband, double duration) {
  const double c = tx_norm_const(coeffs, duration);
  const int n = inband.n;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      acc += inband.at(i, j) *
             (coeffs[i].real() * coeffs[j].real() + coeffs[i].imag() * coeffs[j].imag());
    }
  }
  return c * acc;
}

// ACLR = E_out / E_in = 1/E_I - 1; invariant under scaling of the coefficients.
inline double aclr_linear(std::span<const cplx> coeffs, const RMat& inband, double duration) {
  const double ei = in_band_energy(coeffs, inband, duration);
  return std::max(0.0, 1.0 / ei - 1.0);
}

inline double aclr_linear(const FilterParams& tx, const RMat& inband) {
  return aclr_linear(tx.coeffs, inband, tx.duration);
}

}  // namespace wavelearn

#endif  // WAVELEARN_SINC_FILTER_HPP
