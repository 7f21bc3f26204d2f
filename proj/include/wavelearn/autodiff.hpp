#ifndef WAVELEARN_AUTODIFF_HPP
#define WAVELEARN_AUTODIFF_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wavelearn/common.hpp"
#include "wavelearn/thread_pool.hpp"

// Minimal reverse-mode differentiation over real tensors. Complex values are
// carried as (re, im) pairs in a trailing dimension of size 2, with explicit
// complex primitives. One Tape records one forward pass; backward() walks the
// record once in reverse. Repeated backward calls accumulate gradients.

namespace wavelearn::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

struct Tensor {
  Shape shape;
  std::vector<double> v;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> data) : shape(std::move(s)), v(std::move(data)) {
    if (numel(shape) != v.size()) throw std::invalid_argument("Tensor: shape/data mismatch");
  }
  static Tensor zeros(Shape s) {
    std::vector<double> d(numel(s), 0.0);
    return Tensor(std::move(s), std::move(d));
  }
  static Tensor scalar(double x) { return Tensor({1}, {x}); }

  std::size_t size() const { return v.size(); }
  double* data() { return v.data(); }
  const double* data() const { return v.data(); }
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int idx = -1;

  bool valid() const { return tape != nullptr && idx >= 0; }
  const Tensor& val() const;
  const Shape& shape() const;
  std::span<const double> grad() const;
};

class Tape {
 public:
  struct Node {
    Tensor value;
    std::vector<double> grad;  // empty until touched by backward
    bool requires_grad = false;
    std::function<void()> backprop;  // empty for leaves/constants
  };

  // --- buffer management (reused across steps via clear()) ---

  std::vector<double> take_raw(std::size_t n) {
    auto it = pool_.find(n);
    if (it != pool_.end() && !it->second.empty()) {
      std::vector<double> v = std::move(it->second.back());
      it->second.pop_back();
      return v;
    }
    return std::vector<double>(n);
  }

  std::vector<double> take_zero(std::size_t n) {
    std::vector<double> v = take_raw(n);
    std::fill(v.begin(), v.end(), 0.0);
    return v;
  }

  void clear() {
    for (Node& nd : nodes_) {
      if (nd.value.v.capacity() > 0) pool_[nd.value.v.size()].push_back(std::move(nd.value.v));
      if (nd.grad.capacity() > 0) pool_[nd.grad.size()].push_back(std::move(nd.grad));
    }
    nodes_.clear();
  }

  // --- node construction ---

  Var leaf(Tensor t, bool requires_grad = true) {
    return emplace(std::move(t), requires_grad, nullptr);
  }

  Var constant(Tensor t) { return emplace(std::move(t), false, nullptr); }

  Var constant_scalar(double x) { return constant(Tensor::scalar(x)); }

  Var emplace(Tensor value, bool requires_grad, std::function<void()> backprop) {
    nodes_.push_back(Node{std::move(value), {}, requires_grad, std::move(backprop)});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  Node& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return nodes_.size(); }

  const Tensor& val(int i) const { return nodes_[static_cast<std::size_t>(i)].value; }

  bool needs(int i) const { return nodes_[static_cast<std::size_t>(i)].requires_grad; }

  std::vector<double>& grad_ensure(int i) {
    Node& nd = nodes_[static_cast<std::size_t>(i)];
    if (nd.grad.empty()) nd.grad = take_zero(nd.value.size());
    return nd.grad;
  }

  std::span<const double> grad_of(int i) const {
    const Node& nd = nodes_[static_cast<std::size_t>(i)];
    return nd.grad;
  }

  // Reverse sweep from a scalar root. Visits each recorded node once.
  void backward(Var root) {
    if (root.tape != this) throw std::invalid_argument("backward: root from another tape");
    Node& r = nodes_[static_cast<std::size_t>(root.idx)];
    if (r.value.size() != 1) throw std::invalid_argument("backward: root must be scalar");
    grad_ensure(root.idx)[0] += 1.0;
    for (int i = root.idx; i >= 0; --i) {
      Node& nd = nodes_[static_cast<std::size_t>(i)];
      if (nd.grad.empty() || !nd.backprop) continue;
      nd.backprop();
    }
  }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<std::size_t, std::vector<std::vector<double>>> pool_;
};

inline const Tensor& Var::val() const { return tape->val(idx); }
inline const Shape& Var::shape() const { return tape->val(idx).shape; }
inline std::span<const double> Var::grad() const { return tape->grad_of(idx); }

namespace detail {

inline void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.val().shape != b.val().shape) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

inline bool is_pair_tensor(const Shape& s) { return !s.empty() && s.back() == 2; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and reduction primitives
// ---------------------------------------------------------------------------

inline Var add(Var a, Var b) {
  detail::check_same_shape(a, b, "add");
  Tape& t = *a.tape;
  const std::size_t n = a.val().size();
  Tensor out(a.val().shape, t.take_raw(n));
  const double* pa = a.val().data();
  const double* pb = b.val().data();
  for (std::size_t i = 0; i < n; ++i) out.v[i] = pa[i] + pb[i];
  const bool rg = t.needs(a.idx) || t.needs(b.idx);
  if (!rg) return t.emplace(std::move(out), false, nullptr);
  const int ai = a.idx, bi = b.idx;
  Tape* tp = &t;
  Var o = t.emplace(std::move(out), true, nullptr);
  const int oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, bi, n] {
    const double* g = tp->grad_of(oi).data();
    if (tp->needs(ai)) {
      double* ga = tp->grad_ensure(ai).data();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
    }
    if (tp->needs(bi)) {
      double* gb = tp->grad_ensure(bi).data();
      for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
    }
  };
  return o;
}

inline Var sub(Var a, Var b) {
  detail::check_same_shape(a, b, "sub");
  Tape& t = *a.tape;
  const std::size_t n = a.val().size();
  Tensor out(a.val().shape, t.take_raw(n));
  for (std::size_t i = 0; i < n; ++i) out.v[i] = a.val().v[i] - b.val().v[i];
  const bool rg = t.needs(a.idx) || t.needs(b.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, bi = b.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, bi, n] {
    const double* g = tp->grad_of(oi).data();
    if (tp->needs(ai)) {
      double* ga = tp->grad_ensure(ai).data();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
    }
    if (tp->needs(bi)) {
      double* gb = tp->grad_ensure(bi).data();
      for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
    }
  };
  return o;
}

inline Var mul(Var a, Var b) {
  detail::check_same_shape(a, b, "mul");
  Tape& t = *a.tape;
  const std::size_t n = a.val().size();
  Tensor out(a.val().shape, t.take_raw(n));
  for (std::size_t i = 0; i < n; ++i) out.v[i] = a.val().v[i] * b.val().v[i];
  const bool rg = t.needs(a.idx) || t.needs(b.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, bi = b.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, bi, n] {
    const double* g = tp->grad_of(oi).data();
    const double* va = tp->val(ai).data();
    const double* vb = tp->val(bi).data();
    if (tp->needs(ai)) {
      double* ga = tp->grad_ensure(ai).data();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * vb[i];
    }
    if (tp->needs(bi)) {
      double* gb = tp->grad_ensure(bi).data();
      for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * va[i];
    }
  };
  return o;
}

inline Var div(Var a, Var b) {
  detail::check_same_shape(a, b, "div");
  Tape& t = *a.tape;
  const std::size_t n = a.val().size();
  Tensor out(a.val().shape, t.take_raw(n));
  for (std::size_t i = 0; i < n; ++i) out.v[i] = a.val().v[i] / b.val().v[i];
  const bool rg = t.needs(a.idx) || t.needs(b.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, bi = b.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, bi, n] {
    const double* g = tp->grad_of(oi).data();
    const double* vb = tp->val(bi).data();
    const double* vo = tp->val(oi).data();
    if (tp->needs(ai)) {
      double* ga = tp->grad_ensure(ai).data();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] / vb[i];
    }
    if (tp->needs(bi)) {
      double* gb = tp->grad_ensure(bi).data();
      for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i] * vo[i] / vb[i];
    }
  };
  return o;
}

inline Var scale(Var a, double c) {
  Tape& t = *a.tape;
  const std::size_t n = a.val().size();
  Tensor out(a.val().shape, t.take_raw(n));
  for (std::size_t i = 0; i < n; ++i) out.v[i] = c * a.val().v[i];
  const bool rg = t.needs(a.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, c, n] {
    const double* g = tp->grad_of(oi).data();
    double* ga = tp->grad_ensure(ai).data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += c * g[i];
  };
  return o;
}

inline Var neg(Var a) { return scale(a, -1.0); }

inline Var add_scalar(Var a, double c) {
  Tape& t = *a.tape;
  const std::size_t n = a.val().size();
  Tensor out(a.val().shape, t.take_raw(n));
  for (std::size_t i = 0; i < n; ++i) out.v[i] = a.val().v[i] + c;
  const bool rg = t.needs(a.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, n] {
    const double* g = tp->grad_of(oi).data();
    double* ga = tp->grad_ensure(ai).data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
  };
  return o;
}

// Broadcast-multiply by a scalar node (shape {1}).
inline Var bmul(Var a, Var s) {
  if (s.val().size() != 1) throw std::invalid_argument("bmul: scalar operand must have size 1");
  Tape& t = *a.tape;
  const std::size_t n = a.val().size();
  const double sv = s.val().v[0];
  Tensor out(a.val().shape, t.take_raw(n));
  for (std::size_t i = 0; i < n; ++i) out.v[i] = sv * a.val().v[i];
  const bool rg = t.needs(a.idx) || t.needs(s.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, si = s.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, si, n] {
    const double* g = tp->grad_of(oi).data();
    const double sv2 = tp->val(si).v[0];
    const double* va = tp->val(ai).data();
    if (tp->needs(ai)) {
      double* ga = tp->grad_ensure(ai).data();
      for (std::size_t i = 0; i < n; ++i) ga[i] += sv2 * g[i];
    }
    if (tp->needs(si)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += g[i] * va[i];
      tp->grad_ensure(si)[0] += acc;
    }
  };
  return o;
}

inline Var sqrt_v(Var a) {
  Tape& t = *a.tape;
  const std::size_t n = a.val().size();
  Tensor out(a.val().shape, t.take_raw(n));
  for (std::size_t i = 0; i < n; ++i) out.v[i] = std::sqrt(a.val().v[i]);
  const bool rg = t.needs(a.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, n] {
    const double* g = tp->grad_of(oi).data();
    const double* vo = tp->val(oi).data();
    double* ga = tp->grad_ensure(ai).data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += 0.5 * g[i] / vo[i];
  };
  return o;
}

inline Var relu(Var a) {
  Tape& t = *a.tape;
  const std::size_t n = a.val().size();
  Tensor out(a.val().shape, t.take_raw(n));
  for (std::size_t i = 0; i < n; ++i) out.v[i] = a.val().v[i] > 0.0 ? a.val().v[i] : 0.0;
  const bool rg = t.needs(a.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, n] {
    const double* g = tp->grad_of(oi).data();
    const double* va = tp->val(ai).data();
    double* ga = tp->grad_ensure(ai).data();
    for (std::size_t i = 0; i < n; ++i) {
      if (va[i] > 0.0) ga[i] += g[i];
    }
  };
  return o;
}

inline Var sigmoid(Var a) {
  Tape& t = *a.tape;
  const std::size_t n = a.val().size();
  Tensor out(a.val().shape, t.take_raw(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.val().v[i];
    out.v[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  const bool rg = t.needs(a.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, n] {
    const double* g = tp->grad_of(oi).data();
    const double* vo = tp->val(oi).data();
    double* ga = tp->grad_ensure(ai).data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * vo[i] * (1.0 - vo[i]);
  };
  return o;
}

// log(sigmoid(x)), evaluated stably.
inline Var log_sigmoid(Var a) {
  Tape& t = *a.tape;
  const std::size_t n = a.val().size();
  Tensor out(a.val().shape, t.take_raw(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.val().v[i];
    out.v[i] = x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
  }
  const bool rg = t.needs(a.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, n] {
    const double* g = tp->grad_of(oi).data();
    const double* va = tp->val(ai).data();
    double* ga = tp->grad_ensure(ai).data();
    for (std::size_t i = 0; i < n; ++i) {
      const double x = va[i];
      const double sm = x >= 0.0 ? std::exp(-x) / (1.0 + std::exp(-x))
                                 : 1.0 / (1.0 + std::exp(x));  // sigmoid(-x)
      ga[i] += g[i] * sm;
    }
  };
  return o;
}

inline Var sum(Var a) {
  Tape& t = *a.tape;
  const std::size_t n = a.val().size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a.val().v[i];
  const bool rg = t.needs(a.idx);
  Var o = t.emplace(Tensor::scalar(acc), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, n] {
    const double g = tp->grad_of(oi)[0];
    double* ga = tp->grad_ensure(ai).data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g;
  };
  return o;
}

inline Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.val().size())); }

inline Var sumsq(Var a) {
  Tape& t = *a.tape;
  const std::size_t n = a.val().size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += sq(a.val().v[i]);
  const bool rg = t.needs(a.idx);
  Var o = t.emplace(Tensor::scalar(acc), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, n] {
    const double g = tp->grad_of(oi)[0];
    const double* va = tp->val(ai).data();
    double* ga = tp->grad_ensure(ai).data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += 2.0 * g * va[i];
  };
  return o;
}

// Sum over one axis; the output drops that axis.
inline Var sum_axis(Var a, std::size_t axis) {
  const Shape& s = a.val().shape;
  if (axis >= s.size()) throw std::invalid_argument("sum_axis: axis out of range");
  std::size_t pre = 1, post = 1;
  for (std::size_t i = 0; i < axis; ++i) pre *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) post *= s[i];
  const std::size_t mid = s[axis];
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != axis) out_shape.push_back(s[i]);
  }
  if (out_shape.empty()) out_shape = {1};
  Tape& t = *a.tape;
  Tensor out(out_shape, t.take_zero(pre * post));
  const double* va = a.val().data();
  for (std::size_t p = 0; p < pre; ++p) {
    for (std::size_t k = 0; k < mid; ++k) {
      const double* src = va + (p * mid + k) * post;
      double* dst = out.v.data() + p * post;
      for (std::size_t q = 0; q < post; ++q) dst[q] += src[q];
    }
  }
  const bool rg = t.needs(a.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, pre, mid, post] {
    const double* g = tp->grad_of(oi).data();
    double* ga = tp->grad_ensure(ai).data();
    for (std::size_t p = 0; p < pre; ++p) {
      for (std::size_t k = 0; k < mid; ++k) {
        double* dst = ga + (p * mid + k) * post;
        const double* src = g + p * post;
        for (std::size_t q = 0; q < post; ++q) dst[q] += src[q];
      }
    }
  };
  return o;
}

inline Var reshape(Var a, Shape new_shape) {
  if (numel(new_shape) != a.val().size()) throw std::invalid_argument("reshape: size mismatch");
  Tape& t = *a.tape;
  const std::size_t n = a.val().size();
  Tensor out(std::move(new_shape), t.take_raw(n));
  std::copy(a.val().v.begin(), a.val().v.end(), out.v.begin());
  const bool rg = t.needs(a.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, n] {
    const double* g = tp->grad_of(oi).data();
    double* ga = tp->grad_ensure(ai).data();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
  };
  return o;
}

inline Var matmul(Var a, Var b) {
  const Shape& sa = a.val().shape;
  const Shape& sb = b.val().shape;
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw std::invalid_argument("matmul: need (m,k) x (k,n)");
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Tape& t = *a.tape;
  Tensor out({m, n}, t.take_zero(m * n));
  const double* pa = a.val().data();
  const double* pb = b.val().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      const double* brow = pb + p * n;
      double* orow = out.v.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  const bool rg = t.needs(a.idx) || t.needs(b.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, bi = b.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, bi, m, k, n] {
    const double* g = tp->grad_of(oi).data();
    const double* pa = tp->val(ai).data();
    const double* pb = tp->val(bi).data();
    if (tp->needs(ai)) {
      double* ga = tp->grad_ensure(ai).data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * pb[p * n + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (tp->needs(bi)) {
      double* gb = tp->grad_ensure(bi).data();
      for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t i = 0; i < m; ++i) {
          const double av = pa[i * k + p];
          const double* grow = g + i * n;
          double* brow = gb + p * n;
          for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
        }
      }
    }
  };
  return o;
}

// Quadratic form x^H M x for a paired-complex vector and a constant real
// symmetric matrix: sum_ij M_ij (re_i re_j + im_i im_j).
inline Var quad_form_paired(Var z, std::shared_ptr<const RMat> m) {
  const Shape& s = z.val().shape;
  if (s.size() != 2 || s[1] != 2 || static_cast<int>(s[0]) != m->n) {
    throw std::invalid_argument("quad_form_paired: need (n,2) against n x n matrix");
  }
  const std::size_t n = s[0];
  Tape& t = *z.tape;
  const double* pz = z.val().data();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      acc += m->a[i * n + j] * (pz[2 * i] * pz[2 * j] + pz[2 * i + 1] * pz[2 * j + 1]);
    }
  }
  const bool rg = t.needs(z.idx);
  Var o = t.emplace(Tensor::scalar(acc), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int zi = z.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, zi, m, n] {
    const double g = tp->grad_of(oi)[0];
    const double* pz = tp->val(zi).data();
    double* gz = tp->grad_ensure(zi).data();
    for (std::size_t i = 0; i < n; ++i) {
      double accr = 0.0, acci = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        accr += m->a[i * n + j] * pz[2 * j];
        acci += m->a[i * n + j] * pz[2 * j + 1];
      }
      gz[2 * i] += 2.0 * g * accr;  // M symmetric
      gz[2 * i + 1] += 2.0 * g * acci;
    }
  };
  return o;
}

// ---------------------------------------------------------------------------
// Complex primitives (trailing dimension of 2 holds re/im)
// ---------------------------------------------------------------------------

inline Var cmul(Var a, Var b) {
  detail::check_same_shape(a, b, "cmul");
  if (!detail::is_pair_tensor(a.val().shape)) throw std::invalid_argument("cmul: not a pair tensor");
  Tape& t = *a.tape;
  const std::size_t n = a.val().size() / 2;
  Tensor out(a.val().shape, t.take_raw(2 * n));
  const double* pa = a.val().data();
  const double* pb = b.val().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double ar = pa[2 * i], ai_ = pa[2 * i + 1];
    const double br = pb[2 * i], bi_ = pb[2 * i + 1];
    out.v[2 * i] = ar * br - ai_ * bi_;
    out.v[2 * i + 1] = ar * bi_ + ai_ * br;
  }
  const bool rg = t.needs(a.idx) || t.needs(b.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, bi = b.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, bi, n] {
    const double* g = tp->grad_of(oi).data();
    const double* pa = tp->val(ai).data();
    const double* pb = tp->val(bi).data();
    if (tp->needs(ai)) {
      double* ga = tp->grad_ensure(ai).data();
      for (std::size_t i = 0; i < n; ++i) {
        const double gr = g[2 * i], gi = g[2 * i + 1];
        const double br = pb[2 * i], bim = pb[2 * i + 1];
        ga[2 * i] += gr * br + gi * bim;      // gbar * conj(b)
        ga[2 * i + 1] += gi * br - gr * bim;
      }
    }
    if (tp->needs(bi)) {
      double* gb = tp->grad_ensure(bi).data();
      for (std::size_t i = 0; i < n; ++i) {
        const double gr = g[2 * i], gi = g[2 * i + 1];
        const double ar = pa[2 * i], aim = pa[2 * i + 1];
        gb[2 * i] += gr * ar + gi * aim;
        gb[2 * i + 1] += gi * ar - gr * aim;
      }
    }
  };
  return o;
}

inline Var conj_c(Var a) {
  if (!detail::is_pair_tensor(a.val().shape)) throw std::invalid_argument("conj_c: not a pair tensor");
  Tape& t = *a.tape;
  const std::size_t n = a.val().size() / 2;
  Tensor out(a.val().shape, t.take_raw(2 * n));
  const double* pa = a.val().data();
  for (std::size_t i = 0; i < n; ++i) {
    out.v[2 * i] = pa[2 * i];
    out.v[2 * i + 1] = -pa[2 * i + 1];
  }
  const bool rg = t.needs(a.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, n] {
    const double* g = tp->grad_of(oi).data();
    double* ga = tp->grad_ensure(ai).data();
    for (std::size_t i = 0; i < n; ++i) {
      ga[2 * i] += g[2 * i];
      ga[2 * i + 1] -= g[2 * i + 1];
    }
  };
  return o;
}

// |z|^2 elementwise: (..., 2) -> (...).
inline Var abs2(Var a) {
  const Shape& s = a.val().shape;
  if (!detail::is_pair_tensor(s)) throw std::invalid_argument("abs2: not a pair tensor");
  Shape out_shape(s.begin(), s.end() - 1);
  if (out_shape.empty()) out_shape = {1};
  Tape& t = *a.tape;
  const std::size_t n = a.val().size() / 2;
  Tensor out(out_shape, t.take_raw(n));
  const double* pa = a.val().data();
  for (std::size_t i = 0; i < n; ++i) out.v[i] = sq(pa[2 * i]) + sq(pa[2 * i + 1]);
  const bool rg = t.needs(a.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, n] {
    const double* g = tp->grad_of(oi).data();
    const double* pa = tp->val(ai).data();
    double* ga = tp->grad_ensure(ai).data();
    for (std::size_t i = 0; i < n; ++i) {
      ga[2 * i] += 2.0 * g[i] * pa[2 * i];
      ga[2 * i + 1] += 2.0 * g[i] * pa[2 * i + 1];
    }
  };
  return o;
}

// Unconjugated complex dot product: (n,2) x (n,2) -> (2,).
inline Var cdotu(Var a, Var b) {
  detail::check_same_shape(a, b, "cdotu");
  Tape& t = *a.tape;
  const std::size_t n = a.val().size() / 2;
  const double* pa = a.val().data();
  const double* pb = b.val().data();
  double wr = 0.0, wi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    wr += pa[2 * i] * pb[2 * i] - pa[2 * i + 1] * pb[2 * i + 1];
    wi += pa[2 * i] * pb[2 * i + 1] + pa[2 * i + 1] * pb[2 * i];
  }
  Tensor out({2}, {wr, wi});
  const bool rg = t.needs(a.idx) || t.needs(b.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = a.idx, bi = b.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, bi, n] {
    const double gr = tp->grad_of(oi)[0];
    const double gi = tp->grad_of(oi)[1];
    const double* pa = tp->val(ai).data();
    const double* pb = tp->val(bi).data();
    if (tp->needs(ai)) {
      double* ga = tp->grad_ensure(ai).data();
      for (std::size_t i = 0; i < n; ++i) {
        ga[2 * i] += gr * pb[2 * i] + gi * pb[2 * i + 1];
        ga[2 * i + 1] += gi * pb[2 * i] - gr * pb[2 * i + 1];
      }
    }
    if (tp->needs(bi)) {
      double* gb = tp->grad_ensure(bi).data();
      for (std::size_t i = 0; i < n; ++i) {
        gb[2 * i] += gr * pa[2 * i] + gi * pa[2 * i + 1];
        gb[2 * i + 1] += gi * pa[2 * i] - gr * pa[2 * i + 1];
      }
    }
  };
  return o;
}

// Complex matrix-vector product: (n,m,2) x (m,2) -> (n,2).
inline Var cmatvec(Var m, Var x) {
  const Shape& sm = m.val().shape;
  const Shape& sx = x.val().shape;
  if (sm.size() != 3 || sm[2] != 2 || sx.size() != 2 || sx[1] != 2 || sm[1] != sx[0]) {
    throw std::invalid_argument("cmatvec: need (n,m,2) x (m,2)");
  }
  const std::size_t rows = sm[0], cols = sm[1];
  Tape& t = *m.tape;
  Tensor out({rows, 2}, t.take_raw(rows * 2));
  const double* pm = m.val().data();
  const double* px = x.val().data();
  for (std::size_t i = 0; i < rows; ++i) {
    double accr = 0.0, acci = 0.0;
    const double* row = pm + i * cols * 2;
    for (std::size_t j = 0; j < cols; ++j) {
      const double mr = row[2 * j], mi = row[2 * j + 1];
      const double xr = px[2 * j], xi = px[2 * j + 1];
      accr += mr * xr - mi * xi;
      acci += mr * xi + mi * xr;
    }
    out.v[2 * i] = accr;
    out.v[2 * i + 1] = acci;
  }
  const bool rg = t.needs(m.idx) || t.needs(x.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int mi_ = m.idx, xi_ = x.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, mi_, xi_, rows, cols] {
    const double* g = tp->grad_of(oi).data();
    const double* pm = tp->val(mi_).data();
    const double* px = tp->val(xi_).data();
    if (tp->needs(mi_)) {
      double* gm = tp->grad_ensure(mi_).data();
      for (std::size_t i = 0; i < rows; ++i) {
        const double gr = g[2 * i], gi = g[2 * i + 1];
        double* grow = gm + i * cols * 2;
        for (std::size_t j = 0; j < cols; ++j) {
          const double xr = px[2 * j], xi = px[2 * j + 1];
          grow[2 * j] += gr * xr + gi * xi;      // gbar_i * conj(x_j)
          grow[2 * j + 1] += gi * xr - gr * xi;
        }
      }
    }
    if (tp->needs(xi_)) {
      double* gx = tp->grad_ensure(xi_).data();
      for (std::size_t i = 0; i < rows; ++i) {
        const double gr = g[2 * i], gi = g[2 * i + 1];
        const double* row = pm + i * cols * 2;
        for (std::size_t j = 0; j < cols; ++j) {
          const double mr = row[2 * j], mim = row[2 * j + 1];
          gx[2 * j] += mr * gr + mim * gi;       // conj(M_ij) * gbar_i
          gx[2 * j + 1] += mr * gi - mim * gr;
        }
      }
    }
  };
  return o;
}

// cmatvec against a shared constant matrix (kept out of the tape so large
// precomputed operands are not copied every step).
inline Var cmatvec_const(std::shared_ptr<const Tensor> m, Var x, Shape out_shape = {}) {
  const Shape& sm = m->shape;
  const Shape& sx = x.val().shape;
  if (sm.size() != 3 || sm[2] != 2 || sx.size() != 2 || sx[1] != 2 || sm[1] != sx[0]) {
    throw std::invalid_argument("cmatvec_const: need (n,m,2) x (m,2)");
  }
  const std::size_t rows = sm[0], cols = sm[1];
  if (out_shape.empty()) out_shape = {rows, 2};
  if (numel(out_shape) != rows * 2) throw std::invalid_argument("cmatvec_const: bad out shape");
  Tape& t = *x.tape;
  Tensor out(std::move(out_shape), t.take_raw(rows * 2));
  const double* pm = m->data();
  const double* px = x.val().data();
  for (std::size_t i = 0; i < rows; ++i) {
    double accr = 0.0, acci = 0.0;
    const double* row = pm + i * cols * 2;
    for (std::size_t j = 0; j < cols; ++j) {
      const double mr = row[2 * j], mi = row[2 * j + 1];
      const double xr = px[2 * j], xi = px[2 * j + 1];
      accr += mr * xr - mi * xi;
      acci += mr * xi + mi * xr;
    }
    out.v[2 * i] = accr;
    out.v[2 * i + 1] = acci;
  }
  const bool rg = t.needs(x.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int xi_ = x.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, xi_, m, rows, cols] {
    const double* g = tp->grad_of(oi).data();
    const double* pm = m->data();
    double* gx = tp->grad_ensure(xi_).data();
    for (std::size_t i = 0; i < rows; ++i) {
      const double gr = g[2 * i], gi = g[2 * i + 1];
      if (gr == 0.0 && gi == 0.0) continue;
      const double* row = pm + i * cols * 2;
      for (std::size_t j = 0; j < cols; ++j) {
        const double mr = row[2 * j], mim = row[2 * j + 1];
        gx[2 * j] += mr * gr + mim * gi;
        gx[2 * j + 1] += mr * gi - mim * gr;
      }
    }
  };
  return o;
}

// Batched complex matrix application: (n,n,2) x (B,n,2) -> (B,n,2).
inline Var cmat_apply_batch(Var m, Var z) {
  const Shape& sm = m.val().shape;
  const Shape& sz = z.val().shape;
  if (sm.size() != 3 || sm[0] != sm[1] || sm[2] != 2 || sz.size() != 3 || sz[2] != 2 ||
      sz[1] != sm[0]) {
    throw std::invalid_argument("cmat_apply_batch: need (n,n,2) x (B,n,2)");
  }
  const std::size_t n = sm[0], batch = sz[0];
  Tape& t = *m.tape;
  Tensor out({batch, n, 2}, t.take_raw(batch * n * 2));
  const double* pm = m.val().data();
  const double* pz = z.val().data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* zb = pz + b * n * 2;
    double* ob = out.v.data() + b * n * 2;
    for (std::size_t i = 0; i < n; ++i) {
      double accr = 0.0, acci = 0.0;
      const double* row = pm + i * n * 2;
      for (std::size_t j = 0; j < n; ++j) {
        const double mr = row[2 * j], mi = row[2 * j + 1];
        const double zr = zb[2 * j], zi = zb[2 * j + 1];
        accr += mr * zr - mi * zi;
        acci += mr * zi + mi * zr;
      }
      ob[2 * i] = accr;
      ob[2 * i + 1] = acci;
    }
  }
  const bool rg = t.needs(m.idx) || t.needs(z.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int mi_ = m.idx, zi_ = z.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, mi_, zi_, n, batch] {
    const double* g = tp->grad_of(oi).data();
    const double* pm = tp->val(mi_).data();
    const double* pz = tp->val(zi_).data();
    if (tp->needs(mi_)) {
      double* gm = tp->grad_ensure(mi_).data();
      for (std::size_t b = 0; b < batch; ++b) {
        const double* zb = pz + b * n * 2;
        const double* gb = g + b * n * 2;
        for (std::size_t i = 0; i < n; ++i) {
          const double gr = gb[2 * i], gi = gb[2 * i + 1];
          double* grow = gm + i * n * 2;
          for (std::size_t j = 0; j < n; ++j) {
            const double zr = zb[2 * j], zi = zb[2 * j + 1];
            grow[2 * j] += gr * zr + gi * zi;
            grow[2 * j + 1] += gi * zr - gr * zi;
          }
        }
      }
    }
    if (tp->needs(zi_)) {
      double* gz = tp->grad_ensure(zi_).data();
      for (std::size_t b = 0; b < batch; ++b) {
        double* gzb = gz + b * n * 2;
        const double* gb = g + b * n * 2;
        for (std::size_t i = 0; i < n; ++i) {
          const double gr = gb[2 * i], gi = gb[2 * i + 1];
          const double* row = pm + i * n * 2;
          for (std::size_t j = 0; j < n; ++j) {
            const double mr = row[2 * j], mim = row[2 * j + 1];
            gzb[2 * j] += mr * gr + mim * gi;
            gzb[2 * j + 1] += mr * gi - mim * gr;
          }
        }
      }
    }
  };
  return o;
}

// Zero-padded complex convolution of batched signals with a short kernel:
// out[b][n] = sum_l ker[l] * sig[b][n - (l - center)].
inline Var cconv1d(Var sig, Var ker, std::size_t center) {
  const Shape& ss = sig.val().shape;
  const Shape& sk = ker.val().shape;
  if (ss.size() != 3 || ss[2] != 2 || sk.size() != 2 || sk[1] != 2) {
    throw std::invalid_argument("cconv1d: need (B,N,2) signal and (L,2) kernel");
  }
  const std::size_t batch = ss[0], len = ss[1], taps = sk[0];
  if (center >= taps) throw std::invalid_argument("cconv1d: center out of range");
  Tape& t = *sig.tape;
  Tensor out({batch, len, 2}, t.take_zero(batch * len * 2));
  const double* ps = sig.val().data();
  const double* pk = ker.val().data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* sb = ps + b * len * 2;
    double* ob = out.v.data() + b * len * 2;
    for (std::size_t l = 0; l < taps; ++l) {
      const double kr = pk[2 * l], ki = pk[2 * l + 1];
      if (kr == 0.0 && ki == 0.0) continue;
      const long off = static_cast<long>(l) - static_cast<long>(center);
      const long n_lo = std::max<long>(0, off);
      const long n_hi = std::min<long>(static_cast<long>(len), static_cast<long>(len) + off);
      for (long n = n_lo; n < n_hi; ++n) {
        const long src = n - off;
        const double sr = sb[2 * src], si = sb[2 * src + 1];
        ob[2 * n] += kr * sr - ki * si;
        ob[2 * n + 1] += kr * si + ki * sr;
      }
    }
  }
  const bool rg = t.needs(sig.idx) || t.needs(ker.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int si_ = sig.idx, ki_ = ker.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, si_, ki_, batch, len, taps, center] {
    const double* g = tp->grad_of(oi).data();
    const double* ps = tp->val(si_).data();
    const double* pk = tp->val(ki_).data();
    const bool need_sig = tp->needs(si_);
    const bool need_ker = tp->needs(ki_);
    double* gs = need_sig ? tp->grad_ensure(si_).data() : nullptr;
    double* gk = need_ker ? tp->grad_ensure(ki_).data() : nullptr;
    for (std::size_t b = 0; b < batch; ++b) {
      const double* sb = ps + b * len * 2;
      const double* gb = g + b * len * 2;
      double* gsb = need_sig ? gs + b * len * 2 : nullptr;
      for (std::size_t l = 0; l < taps; ++l) {
        const double kr = pk[2 * l], ki = pk[2 * l + 1];
        const long off = static_cast<long>(l) - static_cast<long>(center);
        const long n_lo = std::max<long>(0, off);
        const long n_hi = std::min<long>(static_cast<long>(len), static_cast<long>(len) + off);
        double gkr = 0.0, gki = 0.0;
        for (long n = n_lo; n < n_hi; ++n) {
          const long src = n - off;
          const double gr = gb[2 * n], gi = gb[2 * n + 1];
          if (need_sig) {
            gsb[2 * src] += gr * kr + gi * ki;      // gbar * conj(ker)
            gsb[2 * src + 1] += gi * kr - gr * ki;
          }
          if (need_ker) {
            const double sr = sb[2 * src], si = sb[2 * src + 1];
            gkr += gr * sr + gi * si;               // gbar * conj(sig)
            gki += gi * sr - gr * si;
          }
        }
        if (need_ker) {
          gk[2 * l] += gkr;
          gk[2 * l + 1] += gki;
        }
      }
    }
  };
  return o;
}

// Row gather: out[r] = points[indices[r]], points (P,2) -> out shape (.., 2).
inline Var gather_pairs(Var points, std::shared_ptr<const std::vector<std::size_t>> indices,
                        Shape out_shape) {
  const Shape& sp = points.val().shape;
  if (sp.size() != 2 || sp[1] != 2) throw std::invalid_argument("gather_pairs: points must be (P,2)");
  if (numel(out_shape) != indices->size() * 2) {
    throw std::invalid_argument("gather_pairs: output shape mismatch");
  }
  Tape& t = *points.tape;
  const std::size_t r = indices->size();
  Tensor out(std::move(out_shape), t.take_raw(2 * r));
  const double* pp = points.val().data();
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t p = (*indices)[i];
    out.v[2 * i] = pp[2 * p];
    out.v[2 * i + 1] = pp[2 * p + 1];
  }
  const bool rg = t.needs(points.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int pi = points.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, pi, indices, r] {
    const double* g = tp->grad_of(oi).data();
    double* gp = tp->grad_ensure(pi).data();
    for (std::size_t i = 0; i < r; ++i) {
      const std::size_t p = (*indices)[i];
      gp[2 * p] += g[2 * i];
      gp[2 * p + 1] += g[2 * i + 1];
    }
  };
  return o;
}

// Stack equal-shaped parts along a new leading axis.
inline Var stack0(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("stack0: no parts");
  Tape& t = *parts[0].tape;
  const Shape inner = parts[0].val().shape;
  const std::size_t step = numel(inner);
  Shape out_shape;
  out_shape.push_back(parts.size());
  for (std::size_t d : inner) out_shape.push_back(d);
  Tensor out(out_shape, t.take_raw(step * parts.size()));
  bool rg = false;
  std::vector<int> idxs(parts.size());
  for (std::size_t p = 0; p < parts.size(); ++p) {
    if (parts[p].val().shape != inner) throw std::invalid_argument("stack0: shape mismatch");
    std::copy(parts[p].val().v.begin(), parts[p].val().v.end(), out.v.begin() + p * step);
    rg = rg || t.needs(parts[p].idx);
    idxs[p] = parts[p].idx;
  }
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int oi = o.idx;
  tp->node(oi).backprop = [tp, oi, idxs, step] {
    const double* g = tp->grad_of(oi).data();
    for (std::size_t p = 0; p < idxs.size(); ++p) {
      if (!tp->needs(idxs[p])) continue;
      double* gp = tp->grad_ensure(idxs[p]).data();
      const double* src = g + p * step;
      for (std::size_t i = 0; i < step; ++i) gp[i] += src[i];
    }
  };
  return o;
}

// Hermitian Toeplitz lower triangle from one-sided lags: for i >= j and
// i - j < L, out[i][j] = conj(lags[i-j]); the strict upper part stays zero.
inline Var toeplitz_lower(Var lags, std::size_t n) {
  const Shape& sl = lags.val().shape;
  if (sl.size() != 2 || sl[1] != 2) throw std::invalid_argument("toeplitz_lower: lags must be (L,2)");
  const std::size_t taps = sl[0];
  Tape& t = *lags.tape;
  Tensor out({n, n, 2}, t.take_zero(n * n * 2));
  const double* pl = lags.val().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d <= i && d < taps; ++d) {
      const std::size_t j = i - d;
      out.v[(i * n + j) * 2] = pl[2 * d];
      out.v[(i * n + j) * 2 + 1] = -pl[2 * d + 1];
    }
  }
  const bool rg = t.needs(lags.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int li = lags.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, li, n, taps] {
    const double* g = tp->grad_of(oi).data();
    double* gl = tp->grad_ensure(li).data();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d <= i && d < taps; ++d) {
        const std::size_t j = i - d;
        gl[2 * d] += g[(i * n + j) * 2];
        gl[2 * d + 1] -= g[(i * n + j) * 2 + 1];
      }
    }
  };
  return o;
}

// ---------------------------------------------------------------------------
// Cholesky factorization of a Hermitian PSD pair tensor (n,n,2), reading the
// lower triangle only. Backward reverses the factorization recurrence.
// ---------------------------------------------------------------------------

inline Var cholesky_pairs(Var sigma, double jitter = 0.0) {
  const Shape& s = sigma.val().shape;
  if (s.size() != 3 || s[0] != s[1] || s[2] != 2) {
    throw std::invalid_argument("cholesky_pairs: need (n,n,2)");
  }
  const std::size_t n = s[0];
  Tape& t = *sigma.tape;
  Tensor out({n, n, 2}, t.take_zero(n * n * 2));
  const double* pa = sigma.val().data();
  double* pl = out.v.data();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    max_diag = std::max(max_diag, std::abs(pa[(i * n + i) * 2]));
  }
  const double tol = std::max(max_diag, 1e-300) * 1e-14;
  for (std::size_t j = 0; j < n; ++j) {
    double acc = pa[(j * n + j) * 2] + jitter;
    for (std::size_t k = 0; k < j; ++k) {
      acc -= sq(pl[(j * n + k) * 2]) + sq(pl[(j * n + k) * 2 + 1]);
    }
    if (acc < -tol) throw NumericalError("cholesky_pairs: indefinite matrix");
    const double d = acc > tol ? std::sqrt(acc) : 0.0;
    pl[(j * n + j) * 2] = d;
    if (d == 0.0) continue;
    for (std::size_t i = j + 1; i < n; ++i) {
      double sr = pa[(i * n + j) * 2];
      double si = pa[(i * n + j) * 2 + 1];
      for (std::size_t k = 0; k < j; ++k) {
        const double lr = pl[(i * n + k) * 2], li = pl[(i * n + k) * 2 + 1];
        const double mr = pl[(j * n + k) * 2], mi = pl[(j * n + k) * 2 + 1];
        sr -= lr * mr + li * mi;   // L_ik * conj(L_jk)
        si -= li * mr - lr * mi;
      }
      pl[(i * n + j) * 2] = sr / d;
      pl[(i * n + j) * 2 + 1] = si / d;
    }
  }
  const bool rg = t.needs(sigma.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int ai = sigma.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, ai, n] {
    // Work on a copy of the output adjoint; entries of L keep receiving
    // contributions from later columns as the recurrence unwinds.
    const std::vector<double>& gout = tp->grad_ensure(oi);
    std::vector<double> lb(gout.begin(), gout.end());
    const double* pl = tp->val(oi).data();
    double* ga = tp->grad_ensure(ai).data();
    for (std::size_t jj = n; jj-- > 0;) {
      const double d = pl[(jj * n + jj) * 2];
      if (d == 0.0) continue;  // semidefinite zero column: no gradient path
      double dbar = lb[(jj * n + jj) * 2];
      for (std::size_t i = n; i-- > jj + 1;) {
        const double wr = lb[(i * n + jj) * 2];
        const double wi = lb[(i * n + jj) * 2 + 1];
        if (wr == 0.0 && wi == 0.0) continue;
        const double ur = wr / d, ui = wi / d;  // adjoint of pre-division sum
        ga[(i * n + jj) * 2] += ur;
        ga[(i * n + jj) * 2 + 1] += ui;
        dbar -= (wr * pl[(i * n + jj) * 2] + wi * pl[(i * n + jj) * 2 + 1]) / d;
        for (std::size_t k = 0; k < jj; ++k) {
          const double mr = pl[(jj * n + k) * 2], mi = pl[(jj * n + k) * 2 + 1];
          const double lr = pl[(i * n + k) * 2], li = pl[(i * n + k) * 2 + 1];
          // L_ik adjoint: -u * L_jk ; L_jk adjoint: -conj(u) * L_ik
          lb[(i * n + k) * 2] += -(ur * mr - ui * mi);
          lb[(i * n + k) * 2 + 1] += -(ur * mi + ui * mr);
          lb[(jj * n + k) * 2] += -(ur * lr + ui * li);
          lb[(jj * n + k) * 2 + 1] += -(ur * li - ui * lr);
        }
      }
      const double sbar = 0.5 * dbar / d;
      ga[(jj * n + jj) * 2] += sbar;
      for (std::size_t k = 0; k < jj; ++k) {
        lb[(jj * n + k) * 2] += -2.0 * sbar * pl[(jj * n + k) * 2];
        lb[(jj * n + k) * 2 + 1] += -2.0 * sbar * pl[(jj * n + k) * 2 + 1];
      }
    }
  };
  return o;
}

// ---------------------------------------------------------------------------
// Convolutional layers for the detector
// ---------------------------------------------------------------------------

// 1x1 convolution over channels: x (B,N,Ci), w (Co,Ci), b (Co) -> (B,N,Co).
// Rows (batch x position) are processed in fixed chunks; weight/bias
// gradients are reduced over the per-chunk partials in chunk order, so
// results do not depend on the worker count.
inline Var pointwise_conv(Var x, Var w, Var b) {
  const Shape& sx = x.val().shape;
  const Shape& sw = w.val().shape;
  const Shape& sb = b.val().shape;
  if (sx.size() != 3 || sw.size() != 2 || sb.size() != 1 || sw[1] != sx[2] || sb[0] != sw[0]) {
    throw std::invalid_argument("pointwise_conv: shape mismatch");
  }
  const std::size_t rows = sx[0] * sx[1], ci = sx[2], co = sw[0];
  Tape& t = *x.tape;
  Tensor out({sx[0], sx[1], co}, t.take_raw(rows * co));
  {
    const double* px = x.val().data();
    const double* pw = w.val().data();
    const double* pb = b.val().data();
    double* po = out.v.data();
    parallel_chunks(rows, [&](int, std::size_t lo, std::size_t hi) {
      for (std::size_t r = lo; r < hi; ++r) {
        const double* xr = px + r * ci;
        double* orow = po + r * co;
        for (std::size_t o_ = 0; o_ < co; ++o_) {
          const double* wrow = pw + o_ * ci;
          double acc = pb[o_];
          for (std::size_t i = 0; i < ci; ++i) acc += wrow[i] * xr[i];
          orow[o_] = acc;
        }
      }
    });
  }
  const bool rg = t.needs(x.idx) || t.needs(w.idx) || t.needs(b.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int xi = x.idx, wi = w.idx, bi = b.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, xi, wi, bi, rows, ci, co] {
    const double* g = tp->grad_of(oi).data();
    const double* px = tp->val(xi).data();
    const double* pw = tp->val(wi).data();
    const bool nx = tp->needs(xi), nw = tp->needs(wi), nb = tp->needs(bi);
    double* gx = nx ? tp->grad_ensure(xi).data() : nullptr;
    std::vector<std::vector<double>> gw_parts;
    std::vector<std::vector<double>> gb_parts;
    if (nw) gw_parts.assign(kParallelChunks, std::vector<double>(co * ci, 0.0));
    if (nb) gb_parts.assign(kParallelChunks, std::vector<double>(co, 0.0));
    parallel_chunks(rows, [&](int chunk, std::size_t lo, std::size_t hi) {
      double* gw_c = nw ? gw_parts[static_cast<std::size_t>(chunk)].data() : nullptr;
      double* gb_c = nb ? gb_parts[static_cast<std::size_t>(chunk)].data() : nullptr;
      for (std::size_t r = lo; r < hi; ++r) {
        const double* grow = g + r * co;
        const double* xr = px + r * ci;
        double* gxr = nx ? gx + r * ci : nullptr;
        for (std::size_t o_ = 0; o_ < co; ++o_) {
          const double go = grow[o_];
          if (go == 0.0) continue;
          const double* wrow = pw + o_ * ci;
          if (nx) {
            for (std::size_t i = 0; i < ci; ++i) gxr[i] += go * wrow[i];
          }
          if (nw) {
            double* gwrow = gw_c + o_ * ci;
            for (std::size_t i = 0; i < ci; ++i) gwrow[i] += go * xr[i];
          }
          if (nb) gb_c[o_] += go;
        }
      }
    });
    if (nw) {
      double* gw = tp->grad_ensure(wi).data();
      for (const auto& part : gw_parts) {
        for (std::size_t i = 0; i < co * ci; ++i) gw[i] += part[i];
      }
    }
    if (nb) {
      double* gb = tp->grad_ensure(bi).data();
      for (const auto& part : gb_parts) {
        for (std::size_t i = 0; i < co; ++i) gb[i] += part[i];
      }
    }
  };
  return o;
}

// Depthwise dilated 1-D convolution, zero padded to preserve length:
// x (B,N,C), w (C,K), b (C); out[b][n][c] = b[c] + sum_q w[c][q] x[b][n+(q-K/2)d][c].
inline Var depthwise_conv(Var x, Var w, Var b, std::size_t dilation) {
  const Shape& sx = x.val().shape;
  const Shape& sw = w.val().shape;
  const Shape& sb = b.val().shape;
  if (sx.size() != 3 || sw.size() != 2 || sb.size() != 1 || sw[0] != sx[2] || sb[0] != sx[2]) {
    throw std::invalid_argument("depthwise_conv: shape mismatch");
  }
  if (dilation == 0) throw std::invalid_argument("depthwise_conv: dilation must be >= 1");
  const std::size_t batch = sx[0], len = sx[1], ch = sx[2], k = sw[1];
  const long q0 = static_cast<long>(k / 2);
  Tape& t = *x.tape;
  Tensor out({batch, len, ch}, t.take_raw(batch * len * ch));
  const double* px = x.val().data();
  const double* pw = w.val().data();
  const double* pb = b.val().data();
  for (std::size_t bi_ = 0; bi_ < batch; ++bi_) {
    const double* xb = px + bi_ * len * ch;
    double* ob = out.v.data() + bi_ * len * ch;
    for (std::size_t n = 0; n < len; ++n) {
      double* orow = ob + n * ch;
      for (std::size_t c = 0; c < ch; ++c) orow[c] = pb[c];
      for (std::size_t q = 0; q < k; ++q) {
        const long src = static_cast<long>(n) + (static_cast<long>(q) - q0) *
                                                    static_cast<long>(dilation);
        if (src < 0 || src >= static_cast<long>(len)) continue;
        const double* xrow = xb + static_cast<std::size_t>(src) * ch;
        for (std::size_t c = 0; c < ch; ++c) orow[c] += pw[c * k + q] * xrow[c];
      }
    }
  }
  const bool rg = t.needs(x.idx) || t.needs(w.idx) || t.needs(b.idx);
  Var o = t.emplace(std::move(out), rg, nullptr);
  if (!rg) return o;
  Tape* tp = &t;
  const int xi = x.idx, wi = w.idx, bidx = b.idx, oi = o.idx;
  tp->node(oi).backprop = [tp, oi, xi, wi, bidx, batch, len, ch, k, q0, dilation] {
    const double* g = tp->grad_of(oi).data();
    const double* px = tp->val(xi).data();
    const double* pw = tp->val(wi).data();
    const bool nx = tp->needs(xi), nw = tp->needs(wi), nb = tp->needs(bidx);
    double* gx = nx ? tp->grad_ensure(xi).data() : nullptr;
    double* gw = nw ? tp->grad_ensure(wi).data() : nullptr;
    double* gb = nb ? tp->grad_ensure(bidx).data() : nullptr;
    for (std::size_t bi_ = 0; bi_ < batch; ++bi_) {
      const double* xb = px + bi_ * len * ch;
      const double* gob = g + bi_ * len * ch;
      double* gxb = nx ? gx + bi_ * len * ch : nullptr;
      for (std::size_t n = 0; n < len; ++n) {
        const double* grow = gob + n * ch;
        if (nb) {
          for (std::size_t c = 0; c < ch; ++c) gb[c] += grow[c];
        }
        for (std::size_t q = 0; q < k; ++q) {
          const long src = static_cast<long>(n) + (static_cast<long>(q) - q0) *
                                                      static_cast<long>(dilation);
          if (src < 0 || src >= static_cast<long>(len)) continue;
          const double* xrow = xb + static_cast<std::size_t>(src) * ch;
          double* gxrow = nx ? gxb + static_cast<std::size_t>(src) * ch : nullptr;
          for (std::size_t c = 0; c < ch; ++c) {
            const double go = grow[c];
            if (nx) gxrow[c] += go * pw[c * k + q];
            if (nw) gw[c * k + q] += go * xrow[c];
          }
        }
      }
    }
  };
  return o;
}

}  // namespace wavelearn::ad

#endif  // WAVELEARN_AUTODIFF_HPP
