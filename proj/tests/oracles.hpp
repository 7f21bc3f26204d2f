#ifndef WAVELEARN_TESTS_ORACLES_HPP
#define WAVELEARN_TESTS_ORACLES_HPP

// Independent numerical oracles used by the test suites: brute-force
// quadrature, Monte-Carlo estimators, finite differences and a reference
// Adam. These deliberately avoid the library's closed-form code paths.

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "wavelearn/common.hpp"
#include "wavelearn/rng.hpp"

namespace oracles {

using wavelearn::cplx;
using wavelearn::kPi;

// Midpoint Riemann sum.
template <typename F>
double riemann(const F& f, double a, double b, std::size_t n) {
  const double h = (b - a) / static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += f(a + h * (static_cast<double>(i) + 0.5));
  }
  return acc * h;
}

template <typename F>
cplx riemann_c(const F& f, double a, double b, std::size_t n) {
  const double h = (b - a) / static_cast<double>(n);
  cplx acc{0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    acc += f(a + h * (static_cast<double>(i) + 0.5));
  }
  return acc * h;
}

// sinc pair evaluated through the shared sin(pi v) factor; fast enough for
// 1e7-point sums.
inline double sinc_pair(double v, int s1, int s2) {
  const double d1 = v - s1;
  const double d2 = v - s2;
  if (std::abs(d1) < 1e-8 || std::abs(d2) < 1e-8) {
    return wavelearn::sinc(d1) * wavelearn::sinc(d2);
  }
  const double sv = std::sin(kPi * v);
  const double sign = ((s1 + s2) % 2 == 0) ? 1.0 : -1.0;
  return sign * sv * sv / (kPi * kPi * d1 * d2);
}

// Sample mean with its standard error.
struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline MeanStderr mean_stderr(std::span<const double> xs) {
  MeanStderr r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - r.mean) * (x - r.mean);
  var /= static_cast<double>(xs.size() - 1);
  r.stderr_ = std::sqrt(var / static_cast<double>(xs.size()));
  return r;
}

// Sample variance of xs together with the standard error of that variance
// (via the fourth central moment).
struct VarStderr {
  double variance = 0.0;
  double stderr_ = 0.0;
};

inline VarStderr variance_stderr(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m4 /= n;
  VarStderr r;
  r.variance = m2 * n / (n - 1.0);
  r.stderr_ = std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
  return r;
}

// Central finite difference of a scalar function of a parameter vector.
inline std::vector<double> finite_difference(
    const std::function<double(std::span<const double>)>& f, std::vector<double> x,
    double step = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x[i]));
    const double saved = x[i];
    x[i] = saved + h;
    const double fp = f(x);
    x[i] = saved - h;
    const double fm = f(x);
    x[i] = saved;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Largest relative deviation between analytic and FD gradients, with a floor
// tied to the gradient magnitude so near-zero components do not blow up.
inline double max_rel_error(std::span<const double> analytic, std::span<const double> fd) {
  double scale = 1e-8;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    scale = std::max({scale, std::abs(analytic[i]), std::abs(fd[i])});
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max(std::max(std::abs(analytic[i]), std::abs(fd[i])), 1e-4 * scale);
    worst = std::max(worst, std::abs(analytic[i] - fd[i]) / denom);
  }
  return worst;
}

// Reference Adam, written independently of the library implementation.
struct RefAdam {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<double> m, v;
  long long t = 0;

  void step(std::span<double> x, std::span<const double> g) {
    if (m.empty()) {
      m.assign(x.size(), 0.0);
      v.assign(x.size(), 0.0);
    }
    ++t;
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      const double mh = m[i] / (1.0 - std::pow(beta1, static_cast<double>(t)));
      const double vh = v[i] / (1.0 - std::pow(beta2, static_cast<double>(t)));
      x[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
};

// Gauss-Hermite nodes/weights by Newton iteration on the Hermite recurrence;
// used for the exact BICM rate of a QAM constellation on ideal AWGN.
inline void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  const double tol = 1e-14;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Initial guesses (Abramowitz & Stegun style).
    double x;
    if (i == 0) {
      x = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      x = nodes[0] - 1.14 * std::pow(static_cast<double>(n), 0.426) / nodes[0];
    } else if (i == 2) {
      x = 1.86 * nodes[1] - 0.86 * nodes[0];
    } else if (i == 3) {
      x = 1.91 * nodes[2] - 0.91 * nodes[1];
    } else {
      x = 2.0 * nodes[static_cast<std::size_t>(i - 1)] - nodes[static_cast<std::size_t>(i - 2)];
    }
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = std::pow(kPi, -0.25);
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = x * std::sqrt(2.0 / (j + 1.0)) * p2 -
             std::sqrt(static_cast<double>(j) / (j + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < tol) break;
    }
    nodes[static_cast<std::size_t>(i)] = x;
    nodes[static_cast<std::size_t>(n - 1 - i)] = -x;
    weights[static_cast<std::size_t>(i)] = 2.0 / (pp * pp);
    weights[static_cast<std::size_t>(n - 1 - i)] = weights[static_cast<std::size_t>(i)];
  }
}

// Exact BICM rate (bits/channel use) of a constellation on ISI-free AWGN with
// noise density n0, by 2-D Gauss-Hermite quadrature over the noise.
inline double bicm_rate_gauss_hermite(const std::vector<cplx>& points, int k_bits, double n0,
                                      int gh_nodes = 48) {
  std::vector<double> xs, ws;
  gauss_hermite(gh_nodes, xs, ws);
  // Noise n = sigma (u + j v), u,v ~ N(0, 1/2) per real dim via GH with
  // weight e^{-t^2}: u = t * sqrt(n0/2) ... combined below.
  const double sigma = std::sqrt(0.5 * n0);
  const std::size_t m = points.size();
  double sum_h = 0.0;  // sum over bits of conditional entropies
  for (std::size_t ci = 0; ci < m; ++ci) {
    for (int a = 0; a < gh_nodes; ++a) {
      for (int b = 0; b < gh_nodes; ++b) {
        const cplx y = points[ci] + cplx{std::sqrt(2.0) * sigma * xs[static_cast<std::size_t>(a)],
                                         std::sqrt(2.0) * sigma * xs[static_cast<std::size_t>(b)]};
        // Metrics to every point.
        double best = -1e300;
        std::vector<double> metric(m);
        for (std::size_t cj = 0; cj < m; ++cj) {
          metric[cj] = -std::norm(y - points[cj]) / n0;
          best = std::max(best, metric[cj]);
        }
        double total = 0.0;
        for (std::size_t cj = 0; cj < m; ++cj) total += std::exp(metric[cj] - best);
        const double w2 = ws[static_cast<std::size_t>(a)] * ws[static_cast<std::size_t>(b)] /
                          kPi;  // 2-D GH normalization
        for (int k = 0; k < k_bits; ++k) {
          const std::size_t mask = std::size_t{1} << (k_bits - 1 - k);
          double same = 0.0;
          for (std::size_t cj = 0; cj < m; ++cj) {
            if ((cj & mask) == (ci & mask)) same += std::exp(metric[cj] - best);
          }
          sum_h += w2 * (-std::log2(same / total)) / static_cast<double>(m);
        }
      }
    }
  }
  return static_cast<double>(k_bits) - sum_h;
}

}  // namespace oracles

#endif  // WAVELEARN_TESTS_ORACLES_HPP
