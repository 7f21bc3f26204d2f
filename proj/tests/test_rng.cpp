#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "wavelearn/rng.hpp"

using wavelearn::CounterRng;

TEST_CASE("streams with the same seed are decorrelated and reproducible") {
  CounterRng a(42, CounterRng::kBits);
  CounterRng b(42, CounterRng::kBits);
  CounterRng c(42, CounterRng::kNoise);
  bool any_diff = false;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t va = a.next64();
    REQUIRE(va == b.next64());
    any_diff = any_diff || (va != c.next64());
  }
  REQUIRE(any_diff);
}

TEST_CASE("uniform moments") {
  CounterRng rng(7, CounterRng::kOracle);
  const int n = 200000;
  double mean = 0.0, var = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    mean += u;
    var += (u - 0.5) * (u - 0.5);
  }
  mean /= n;
  var /= n;
  REQUIRE_THAT(mean, Catch::Matchers::WithinAbs(0.5, 0.005));
  REQUIRE_THAT(var, Catch::Matchers::WithinAbs(1.0 / 12.0, 0.002));
}

TEST_CASE("gaussian moments and complex normalization") {
  CounterRng rng(9, CounterRng::kOracle);
  const int n = 200000;
  double mean = 0.0, var = 0.0, cvar = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    mean += g;
    var += g * g;
    cvar += std::norm(rng.cgaussian());
  }
  mean /= n;
  var /= n;
  cvar /= n;
  REQUIRE_THAT(mean, Catch::Matchers::WithinAbs(0.0, 0.01));
  REQUIRE_THAT(var, Catch::Matchers::WithinAbs(1.0, 0.02));
  REQUIRE_THAT(cvar, Catch::Matchers::WithinAbs(1.0, 0.02));
}
