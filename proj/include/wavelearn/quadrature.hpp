#ifndef WAVELEARN_QUADRATURE_HPP
#define WAVELEARN_QUADRATURE_HPP

#include <cmath>
#include <cstddef>

#include "wavelearn/common.hpp"

namespace wavelearn {

namespace detail {

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
inline constexpr double kGk15Nodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kGk15Weights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kG7Weights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename F>
void gk15(const F& f, double a, double b, double& kronrod, double& err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double fk = 0.0;  // 15-point Kronrod
  double fg = 0.0;  // 7-point Gauss
  const double fc = f(c);
  fk += kGk15Weights[7] * fc;
  fg += kG7Weights[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double x = h * kGk15Nodes[i];
    const double fsum = f(c - x) + f(c + x);
    fk += kGk15Weights[i] * fsum;
    if (i % 2 == 1) fg += kG7Weights[i / 2] * fsum;
  }
  kronrod = fk * h;
  err = std::abs((fk - fg) * h);
}

template <typename F>
double adaptive_gk_impl(const F& f, double a, double b, double tol, int depth) {
  double v, e;
  gk15(f, a, b, v, e);
  if (e <= tol || depth >= 48) return v;
  const double c = 0.5 * (a + b);
  return adaptive_gk_impl(f, a, c, 0.5 * tol, depth + 1) +
         adaptive_gk_impl(f, c, b, 0.5 * tol, depth + 1);
}

}  // namespace detail

// Adaptive Gauss-Kronrod quadrature to an absolute tolerance.
template <typename F>
double adaptive_quadrature(const F& f, double a, double b, double abs_tol) {
  // Seed the subdivision with unit-length panels so oscillatory integrands on
  // wide intervals are resolved before the error estimate is trusted.
  const double span = b - a;
  int panels = static_cast<int>(std::ceil(span));
  if (panels < 1) panels = 1;
  if (panels > 4096) panels = 4096;
  double total = 0.0;
  const double tol_per = abs_tol / panels;
  for (int p = 0; p < panels; ++p) {
    const double pa = a + span * p / panels;
    const double pb = a + span * (p + 1) / panels;
    total += detail::adaptive_gk_impl(f, pa, pb, tol_per, 0);
  }
  return total;
}

// Composite Simpson rule with n subintervals (n made even internally).
template <typename F>
double simpson(const F& f, double a, double b, std::size_t n) {
  if (n % 2 == 1) ++n;
  const double h = (b - a) / static_cast<double>(n);
  double s = f(a) + f(b);
  for (std::size_t i = 1; i < n; ++i) {
    s += f(a + h * static_cast<double>(i)) * ((i % 2 == 1) ? 4.0 : 2.0);
  }
  return s * h / 3.0;
}

// Midpoint (rectangle) rule with n points.
template <typename F>
double midpoint(const F& f, double a, double b, std::size_t n) {
  const double h = (b - a) / static_cast<double>(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += f(a + h * (static_cast<double>(i) + 0.5));
  }
  return s * h;
}

}  // namespace wavelearn

#endif  // WAVELEARN_QUADRATURE_HPP
