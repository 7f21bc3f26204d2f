#ifndef WAVELEARN_RNG_HPP
#define WAVELEARN_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>

#include "wavelearn/common.hpp"

namespace wavelearn {

// Counter-based generator (Philox4x32-10). A single 64-bit seed is fanned out
// to independent streams; draws depend only on (seed, stream, counter), so
// runs are reproducible across platforms and thread schedules.
class CounterRng {
 public:
  enum Stream : std::uint32_t { kBits = 0, kNoise = 1, kInit = 2, kEval = 3, kOracle = 7 };

  CounterRng(std::uint64_t seed, std::uint32_t stream) : seed_(seed), stream_(stream) {}

  static constexpr const char* name() { return "philox4x32-10"; }

  std::uint64_t seed() const { return seed_; }
  std::uint32_t stream() const { return stream_; }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    const std::uint64_t r = next64();
    return static_cast<double>(r >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; values are produced in pairs.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));  // u1 in [0,1) -> 1-u1 in (0,1]
    spare_ = r * std::sin(2.0 * kPi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

  // Circularly-symmetric complex normal with E|z|^2 = 1.
  cplx cgaussian() {
    const double s = 1.0 / std::sqrt(2.0);
    const double re = gaussian();
    const double im = gaussian();
    return {s * re, s * im};
  }

  std::uint64_t next64() {
    if (have_word_) {
      have_word_ = false;
      return pack(buf_[2], buf_[3]);
    }
    buf_ = block(counter_++);
    have_word_ = true;
    return pack(buf_[0], buf_[1]);
  }

  bool bit() { return uniform() < 0.5; }

 private:
  static std::uint64_t pack(std::uint32_t hi, std::uint32_t lo) {
    return (static_cast<std::uint64_t>(hi) << 32) | lo;
  }

  static void round(std::array<std::uint32_t, 4>& c, std::uint32_t k0, std::uint32_t k1) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * c[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
  }

  std::array<std::uint32_t, 4> block(std::uint64_t ctr) const {
    std::array<std::uint32_t, 4> c = {
        static_cast<std::uint32_t>(ctr), static_cast<std::uint32_t>(ctr >> 32), stream_, 0u};
    std::uint32_t k0 = static_cast<std::uint32_t>(seed_);
    std::uint32_t k1 = static_cast<std::uint32_t>(seed_ >> 32);
    for (int r = 0; r < 10; ++r) {
      round(c, k0, k1);
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    return c;
  }

  std::uint64_t seed_;
  std::uint32_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  bool have_word_ = false;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace wavelearn

#endif  // WAVELEARN_RNG_HPP
