#ifndef WAVELEARN_CONSTELLATION_HPP
#define WAVELEARN_CONSTELLATION_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavelearn/common.hpp"

namespace wavelearn {

// 2^K complex points. Point i carries the K-bit label given by the binary
// expansion of i, bit k of the label being bit k of i counted from the MSB.
struct Constellation {
  std::vector<cplx> points;
  int bits_per_symbol = 0;

  std::size_t size() const { return points.size(); }
};

struct Moments {
  double mu4 = 0.0;       // E[|c|^4]
  double mu2 = 0.0;       // E[|c|^2]
  double mu2_tilde = 0.0; // E[c^2] * E[(c*)^2] = |E[c^2]|^2
};

// Scale a raw point set to unit mean energy. Idempotent; preserves directions.
inline Constellation normalize(std::vector<cplx> raw) {
  if (raw.empty()) throw std::domain_error("normalize: empty point set");
  int k = 0;
  while ((std::size_t{1} << k) < raw.size()) ++k;
  if ((std::size_t{1} << k) != raw.size()) {
    throw std::invalid_argument("normalize: point count must be a power of two");
  }
  double e = 0.0;
  for (const cplx& c : raw) e += std::norm(c);
  e /= static_cast<double>(raw.size());
  if (e == 0.0) throw std::domain_error("normalize: all points are zero");
  const double s = 1.0 / std::sqrt(e);
  for (cplx& c : raw) c *= s;
  return Constellation{std::move(raw), k};
}

namespace detail {

inline unsigned gray_to_binary(unsigned g) {
  for (unsigned shift = 1; shift < 16; shift <<= 1) g ^= g >> shift;
  return g;
}

}  // namespace detail

// Square QAM with per-axis Gray labeling, unit mean energy. The first K/2
// label bits select the in-phase level, the rest the quadrature level.
inline Constellation gray_qam(int bits_per_symbol) {
  if (bits_per_symbol < 2 || bits_per_symbol % 2 != 0 || bits_per_symbol > 8) {
    throw std::invalid_argument("gray_qam: K must be even (square QAM)");
  }
  const int half = bits_per_symbol / 2;
  const unsigned levels = 1u << half;
  std::vector<cplx> pts(std::size_t{1} << bits_per_symbol);
  for (unsigned i = 0; i < pts.size(); ++i) {
    const unsigned gi = i >> half;
    const unsigned gq = i & (levels - 1);
    const double ai = 2.0 * detail::gray_to_binary(gi) - (levels - 1.0);
    const double aq = 2.0 * detail::gray_to_binary(gq) - (levels - 1.0);
    pts[i] = {ai, aq};
  }
  return normalize(std::move(pts));
}

inline Moments moments(const Constellation& c) {
  Moments m;
  cplx mean_sq{0.0, 0.0};
  for (const cplx& p : c.points) {
    const double a2 = std::norm(p);
    m.mu2 += a2;
    m.mu4 += a2 * a2;
    mean_sq += p * p;
  }
  const double n = static_cast<double>(c.points.size());
  m.mu2 /= n;
  m.mu4 /= n;
  mean_sq /= n;
  m.mu2_tilde = std::norm(mean_sq);
  return m;
}

// Map bit rows to point indices (MSB-first labeling).
inline std::size_t bits_to_index(std::span<const std::uint8_t> bits) {
  std::size_t idx = 0;
  for (std::uint8_t b : bits) {
    if (b > 1) throw std::invalid_argument("bits_to_index: entries must be 0/1");
    idx = (idx << 1) | b;
  }
  return idx;
}

// Modulate an N x K bit matrix (row-major) onto constellation points.
inline std::vector<cplx> modulate(std::span<const std::uint8_t> bits,
                                  const Constellation& c) {
  const std::size_t k = static_cast<std::size_t>(c.bits_per_symbol);
  if (k == 0 || bits.size() % k != 0) {
    throw std::invalid_argument("modulate: bit count not a multiple of K");
  }
  const std::size_t n = bits.size() / k;
  std::vector<cplx> out(n);
  for (std::size_t m = 0; m < n; ++m) {
    out[m] = c.points[bits_to_index(bits.subspan(m * k, k))];
  }
  return out;
}

inline std::size_t nearest_point(const Constellation& c, cplx r) {
  std::size_t best = 0;
  double best_d = std::norm(r - c.points[0]);
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    const double d = std::norm(r - c.points[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

inline nlohmann::json constellation_to_json(const Constellation& c) {
  nlohmann::json j;
  j["K"] = c.bits_per_symbol;
  auto& pts = j["points"] = nlohmann::json::array();
  for (const cplx& p : c.points) pts.push_back({p.real(), p.imag()});
  return j;
}

inline Constellation constellation_from_json(const nlohmann::json& j) {
  Constellation c;
  c.bits_per_symbol = j.at("K").get<int>();
  for (const auto& p : j.at("points")) {
    c.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  }
  if (c.points.size() != (std::size_t{1} << c.bits_per_symbol)) {
    throw std::invalid_argument("constellation_from_json: point count mismatch");
  }
  return c;
}

}  // namespace wavelearn

#endif  // WAVELEARN_CONSTELLATION_HPP
