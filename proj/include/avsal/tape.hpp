#ifndef AVSAL_TAPE_HPP
#define AVSAL_TAPE_HPP

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include "avsal/gemm.hpp"
#include "avsal/tensor.hpp"

namespace avsal {

template <typename S>
class Tape;

namespace detail {

template <typename S>
struct Node {
  Tensor<S> value;
  Tensor<S> grad;  // allocated only when requires_grad
  bool requires_grad = false;
  std::size_t index = 0;
  std::function<void()> backprop;  // may be empty (leaves, constants)
};

}  // namespace detail

// Handle into a Tape. Cheap to copy; valid for the tape's lifetime.
template <typename S>
class Var {
 public:
  Var() = default;

  const Tensor<S>& value() const { return node_->value; }
  const Tensor<S>& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  std::int64_t numel() const { return node_->value.numel(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool valid() const { return node_ != nullptr; }

  detail::Node<S>* node_ = nullptr;
};

// Reverse-mode tape. Nodes are appended in forward order; backward() replays
// the recorded closures in reverse. Single-threaded by construction, which is
// what makes training runs bit-reproducible.
template <typename S>
class Tape {
 public:
  Var<S> leaf(Tensor<S> value, bool requires_grad = false) {
    detail::Node<S>& n = emplace(std::move(value), requires_grad);
    return wrap(n);
  }

  Var<S> constant(Tensor<S> value) { return leaf(std::move(value), false); }

  detail::Node<S>& emplace(Tensor<S>&& value, bool requires_grad) {
    nodes_.emplace_back();
    detail::Node<S>& n = nodes_.back();
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.index = nodes_.size() - 1;
    if (requires_grad) n.grad = Tensor<S>(n.value.shape());
    return n;
  }

  static Var<S> wrap(detail::Node<S>& n) {
    Var<S> v;
    v.node_ = &n;
    return v;
  }

  // Seeds d(root)/d(root) = 1 and accumulates gradients into every node with
  // requires_grad. root must be scalar.
  void backward(Var<S> root) {
    if (root.numel() != 1) throw ShapeError("backward: root must be a scalar");
    if (!root.requires_grad()) return;
    root.node_->grad[0] = S(1);
    const std::size_t stop = root.node_->index;
    for (std::size_t i = stop + 1; i-- > 0;) {
      detail::Node<S>& n = nodes_[i];
      if (n.requires_grad && n.backprop) n.backprop();
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::deque<detail::Node<S>> nodes_;
};

// ---- op helpers -----------------------------------------------------------

namespace ops {

template <typename S>
Var<S> make(Tape<S>& tape, Tensor<S> value, bool requires_grad) {
  detail::Node<S>& n = tape.emplace(std::move(value), requires_grad);
  return Tape<S>::wrap(n);
}

template <typename S>
void check_same_shape(const Var<S>& a, const Var<S>& b, const char* what) {
  if (!a.value().same_shape(b.value()))
    throw ShapeError(cat(what, ": shape mismatch ", shape_str(a.shape()), " vs ", shape_str(b.shape())));
}

}  // namespace ops

// ---- elementwise ------------------------------------------------------------

template <typename S>
Var<S> add(Tape<S>& tape, Var<S> a, Var<S> b) {
  ops::check_same_shape(a, b, "add");
  Tensor<S> out(a.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a.value()[i] + b.value()[i];
  const bool rg = a.requires_grad() || b.requires_grad();
  Var<S> o = ops::make(tape, std::move(out), rg);
  if (rg) {
    auto *an = a.node_, *bn = b.node_, *on = o.node_;
    on->backprop = [an, bn, on, n] {
      if (an->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
      if (bn->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) bn->grad[i] += on->grad[i];
    };
  }
  return o;
}

template <typename S>
Var<S> sub(Tape<S>& tape, Var<S> a, Var<S> b) {
  ops::check_same_shape(a, b, "sub");
  Tensor<S> out(a.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a.value()[i] - b.value()[i];
  const bool rg = a.requires_grad() || b.requires_grad();
  Var<S> o = ops::make(tape, std::move(out), rg);
  if (rg) {
    auto *an = a.node_, *bn = b.node_, *on = o.node_;
    on->backprop = [an, bn, on, n] {
      if (an->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
      if (bn->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) bn->grad[i] -= on->grad[i];
    };
  }
  return o;
}

template <typename S>
Var<S> mul(Tape<S>& tape, Var<S> a, Var<S> b) {
  ops::check_same_shape(a, b, "mul");
  Tensor<S> out(a.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a.value()[i] * b.value()[i];
  const bool rg = a.requires_grad() || b.requires_grad();
  Var<S> o = ops::make(tape, std::move(out), rg);
  if (rg) {
    auto *an = a.node_, *bn = b.node_, *on = o.node_;
    on->backprop = [an, bn, on, n] {
      if (an->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i] * bn->value[i];
      if (bn->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) bn->grad[i] += on->grad[i] * an->value[i];
    };
  }
  return o;
}

template <typename S>
Var<S> scale(Tape<S>& tape, Var<S> a, S k) {
  Tensor<S> out(a.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a.value()[i] * k;
  Var<S> o = ops::make(tape, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    auto *an = a.node_, *on = o.node_;
    on->backprop = [an, on, n, k] {
      for (std::int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i] * k;
    };
  }
  return o;
}

template <typename S>
Var<S> offset(Tape<S>& tape, Var<S> a, S c) {
  Tensor<S> out(a.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a.value()[i] + c;
  Var<S> o = ops::make(tape, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    auto *an = a.node_, *on = o.node_;
    on->backprop = [an, on, n] {
      for (std::int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
    };
  }
  return o;
}

template <typename S>
Var<S> neg(Tape<S>& tape, Var<S> a) {
  return scale(tape, a, S(-1));
}

template <typename S>
Var<S> relu(Tape<S>& tape, Var<S> a) {
  Tensor<S> out(a.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a.value()[i] > S(0) ? a.value()[i] : S(0);
  Var<S> o = ops::make(tape, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    auto *an = a.node_, *on = o.node_;
    on->backprop = [an, on, n] {
      for (std::int64_t i = 0; i < n; ++i)
        if (an->value[i] > S(0)) an->grad[i] += on->grad[i];
    };
  }
  return o;
}

template <typename S>
Var<S> sigmoid(Tape<S>& tape, Var<S> a) {
  Tensor<S> out(a.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(a.value()[i]);
    out[i] = static_cast<S>(1.0 / (1.0 + std::exp(-x)));
  }
  Var<S> o = ops::make(tape, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    auto *an = a.node_, *on = o.node_;
    on->backprop = [an, on, n] {
      for (std::int64_t i = 0; i < n; ++i) {
        const S y = on->value[i];
        an->grad[i] += on->grad[i] * y * (S(1) - y);
      }
    };
  }
  return o;
}

// log(1 + e^x), computed to avoid overflow for large |x|.
template <typename S>
Var<S> softplus(Tape<S>& tape, Var<S> a) {
  Tensor<S> out(a.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(a.value()[i]);
    out[i] = static_cast<S>(x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)));
  }
  Var<S> o = ops::make(tape, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    auto *an = a.node_, *on = o.node_;
    on->backprop = [an, on, n] {
      for (std::int64_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(an->value[i]);
        an->grad[i] += on->grad[i] * static_cast<S>(1.0 / (1.0 + std::exp(-x)));
      }
    };
  }
  return o;
}

// Softmax over the whole tensor, keeping its shape.
template <typename S>
Var<S> softmax_flat(Tape<S>& tape, Var<S> a) {
  const std::int64_t n = a.numel();
  Tensor<S> out(a.shape());
  const S m = a.value().max();
  double z = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double e = std::exp(static_cast<double>(a.value()[i] - m));
    out[i] = static_cast<S>(e);
    z += e;
  }
  const S inv = static_cast<S>(1.0 / z);
  for (std::int64_t i = 0; i < n; ++i) out[i] *= inv;
  Var<S> o = ops::make(tape, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    auto *an = a.node_, *on = o.node_;
    on->backprop = [an, on, n] {
      double dot = 0.0;
      for (std::int64_t i = 0; i < n; ++i) dot += static_cast<double>(on->grad[i]) * static_cast<double>(on->value[i]);
      for (std::int64_t i = 0; i < n; ++i)
        an->grad[i] += on->value[i] * (on->grad[i] - static_cast<S>(dot));
    };
  }
  return o;
}

// x / sum(x). The caller guarantees a positive sum (maps are softplus'd or
// softmax'd first). Sum is accumulated in double so the output really is a
// distribution to ~1e-7 even in float.
template <typename S>
Var<S> normalize_sum1(Tape<S>& tape, Var<S> a) {
  const std::int64_t n = a.numel();
  const double z = a.value().sum();
  if (!(z > 0.0)) throw ArgumentError(cat("normalize_sum1: non-positive mass ", z));
  Tensor<S> out(a.shape());
  const S inv = static_cast<S>(1.0 / z);
  for (std::int64_t i = 0; i < n; ++i) out[i] = a.value()[i] * inv;
  Var<S> o = ops::make(tape, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    auto *an = a.node_, *on = o.node_;
    on->backprop = [an, on, n, inv] {
      double dot = 0.0;
      for (std::int64_t i = 0; i < n; ++i) dot += static_cast<double>(on->grad[i]) * static_cast<double>(on->value[i]);
      for (std::int64_t i = 0; i < n; ++i)
        an->grad[i] += inv * (on->grad[i] - static_cast<S>(dot));
    };
  }
  return o;
}

// ---- shape ops --------------------------------------------------------------

template <typename S>
Var<S> reshape(Tape<S>& tape, Var<S> a, Shape s) {
  Tensor<S> out = a.value().reshaped(std::move(s));
  Var<S> o = ops::make(tape, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    auto *an = a.node_, *on = o.node_;
    const std::int64_t n = a.numel();
    on->backprop = [an, on, n] {
      for (std::int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
    };
  }
  return o;
}

// Rows [begin, end) along axis 0.
template <typename S>
Var<S> slice_axis0(Tape<S>& tape, Var<S> a, int begin, int end) {
  const Shape& s = a.shape();
  if (s.empty() || begin < 0 || end > s[0] || begin >= end)
    throw ShapeError(cat("slice_axis0: bad range [", begin, ",", end, ") for ", shape_str(s)));
  Shape os = s;
  os[0] = end - begin;
  const std::int64_t row = a.numel() / s[0];
  Tensor<S> out(os);
  const std::int64_t cnt = out.numel();
  for (std::int64_t i = 0; i < cnt; ++i) out[i] = a.value()[begin * row + i];
  Var<S> o = ops::make(tape, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    auto *an = a.node_, *on = o.node_;
    const std::int64_t base = begin * row;
    on->backprop = [an, on, cnt, base] {
      for (std::int64_t i = 0; i < cnt; ++i) an->grad[base + i] += on->grad[i];
    };
  }
  return o;
}

// Concatenation along axis 0; trailing dims must agree.
template <typename S>
Var<S> concat_axis0(Tape<S>& tape, const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw ArgumentError("concat_axis0: no inputs");
  Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  int d0 = 0;
  bool rg = false;
  for (const auto& p : parts) {
    Shape t(p.shape().begin() + 1, p.shape().end());
    if (t != tail || p.shape().size() != parts[0].shape().size())
      throw ShapeError(cat("concat_axis0: incompatible part ", shape_str(p.shape()), " vs ",
                           shape_str(parts[0].shape())));
    d0 += p.shape()[0];
    rg = rg || p.requires_grad();
  }
  Shape os = parts[0].shape();
  os[0] = d0;
  Tensor<S> out(os);
  std::int64_t off = 0;
  for (const auto& p : parts) {
    for (std::int64_t i = 0; i < p.numel(); ++i) out[off + i] = p.value()[i];
    off += p.numel();
  }
  Var<S> o = ops::make(tape, std::move(out), rg);
  if (rg) {
    std::vector<detail::Node<S>*> pn;
    for (const auto& p : parts) pn.push_back(p.node_);
    auto* on = o.node_;
    o.node_->backprop = [pn, on] {
      std::int64_t off2 = 0;
      for (auto* p : pn) {
        const std::int64_t n = p->value.numel();
        if (p->requires_grad)
          for (std::int64_t i = 0; i < n; ++i) p->grad[i] += on->grad[off2 + i];
        off2 += n;
      }
    };
  }
  return o;
}

// ---- reductions --------------------------------------------------------------

namespace ops {

// Decompose shape around `axis` into (outer, mid, inner) strides.
inline void axis_split(const Shape& s, int axis, std::int64_t& outer, std::int64_t& mid, std::int64_t& inner) {
  if (axis < 0 || axis >= static_cast<int>(s.size()))
    throw ShapeError(cat("reduction axis ", axis, " out of range for ", shape_str(s)));
  outer = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  mid = s[axis];
  inner = 1;
  for (int i = axis + 1; i < static_cast<int>(s.size()); ++i) inner *= s[i];
}

inline Shape drop_axis(const Shape& s, int axis) {
  Shape r;
  for (int i = 0; i < static_cast<int>(s.size()); ++i)
    if (i != axis) r.push_back(s[i]);
  if (r.empty()) r.push_back(1);
  return r;
}

}  // namespace ops

template <typename S>
Var<S> sum_axis(Tape<S>& tape, Var<S> a, int axis) {
  std::int64_t outer, mid, inner;
  ops::axis_split(a.shape(), axis, outer, mid, inner);
  Tensor<S> out(ops::drop_axis(a.shape(), axis));
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t i = 0; i < inner; ++i) {
      double acc = 0.0;
      for (std::int64_t m = 0; m < mid; ++m) acc += static_cast<double>(a.value()[(o * mid + m) * inner + i]);
      out[o * inner + i] = static_cast<S>(acc);
    }
  Var<S> v = ops::make(tape, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    auto *an = a.node_, *on = v.node_;
    on->backprop = [an, on, outer, mid, inner] {
      for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t m = 0; m < mid; ++m)
          for (std::int64_t i = 0; i < inner; ++i)
            an->grad[(o * mid + m) * inner + i] += on->grad[o * inner + i];
    };
  }
  return v;
}

template <typename S>
Var<S> mean_axis(Tape<S>& tape, Var<S> a, int axis) {
  const int d = a.shape().at(static_cast<std::size_t>(axis));
  return scale(tape, sum_axis(tape, a, axis), static_cast<S>(1.0 / d));
}

// Max over `axis`; gradient routed to the first maximizing element.
template <typename S>
Var<S> max_axis(Tape<S>& tape, Var<S> a, int axis) {
  std::int64_t outer, mid, inner;
  ops::axis_split(a.shape(), axis, outer, mid, inner);
  Tensor<S> out(ops::drop_axis(a.shape(), axis));
  std::vector<std::int64_t> arg(static_cast<std::size_t>(outer * inner));
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t i = 0; i < inner; ++i) {
      S best = a.value()[(o * mid) * inner + i];
      std::int64_t bm = 0;
      for (std::int64_t m = 1; m < mid; ++m) {
        const S x = a.value()[(o * mid + m) * inner + i];
        if (x > best) {
          best = x;
          bm = m;
        }
      }
      out[o * inner + i] = best;
      arg[static_cast<std::size_t>(o * inner + i)] = (o * mid + bm) * inner + i;
    }
  Var<S> v = ops::make(tape, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    auto *an = a.node_, *on = v.node_;
    on->backprop = [an, on, arg = std::move(arg)] {
      for (std::size_t j = 0; j < arg.size(); ++j) an->grad[arg[j]] += on->grad[static_cast<std::int64_t>(j)];
    };
  }
  return v;
}

template <typename S>
Var<S> sum_all(Tape<S>& tape, Var<S> a) {
  Tensor<S> out = Tensor<S>::scalar(static_cast<S>(a.value().sum()));
  Var<S> v = ops::make(tape, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    auto *an = a.node_, *on = v.node_;
    const std::int64_t n = a.numel();
    on->backprop = [an, on, n] {
      const S g = on->grad[0];
      for (std::int64_t i = 0; i < n; ++i) an->grad[i] += g;
    };
  }
  return v;
}

// ---- linear algebra ----------------------------------------------------------

template <typename S>
Var<S> matmul(Tape<S>& tape, Var<S> a, Var<S> b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
    throw ShapeError(cat("matmul: ", shape_str(a.shape()), " x ", shape_str(b.shape())));
  const std::int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor<S> out({static_cast<int>(m), static_cast<int>(n)});
  gemm_nn<S>(m, n, k, a.value().data(), b.value().data(), out.data(), false);
  const bool rg = a.requires_grad() || b.requires_grad();
  Var<S> v = ops::make(tape, std::move(out), rg);
  if (rg) {
    auto *an = a.node_, *bn = b.node_, *on = v.node_;
    on->backprop = [an, bn, on, m, n, k] {
      if (an->requires_grad) gemm_nt<S>(m, k, n, on->grad.data(), bn->value.data(), an->grad.data(), true);
      if (bn->requires_grad) gemm_tn<S>(k, n, m, an->value.data(), on->grad.data(), bn->grad.data(), true);
    };
  }
  return v;
}

template <typename S>
Var<S> transpose2d(Tape<S>& tape, Var<S> a) {
  if (a.shape().size() != 2) throw ShapeError(cat("transpose2d: rank must be 2, got ", shape_str(a.shape())));
  const int r = a.shape()[0], c = a.shape()[1];
  Tensor<S> out({c, r});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[static_cast<std::int64_t>(j) * r + i] = a.value()[static_cast<std::int64_t>(i) * c + j];
  Var<S> v = ops::make(tape, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    auto *an = a.node_, *on = v.node_;
    on->backprop = [an, on, r, c] {
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          an->grad[static_cast<std::int64_t>(i) * c + j] += on->grad[static_cast<std::int64_t>(j) * r + i];
    };
  }
  return v;
}

// y = W x + b for a vector x. W: [out,in], x: [in], b: [out] (optional).
template <typename S>
Var<S> linear(Tape<S>& tape, Var<S> x, Var<S> W, Var<S> b = Var<S>{}) {
  if (x.shape().size() != 1 || W.shape().size() != 2 || W.shape()[1] != x.shape()[0])
    throw ShapeError(cat("linear: W ", shape_str(W.shape()), " x ", shape_str(x.shape())));
  Var<S> y = matmul(tape, W, reshape(tape, x, {x.shape()[0], 1}));
  y = reshape(tape, y, {W.shape()[0]});
  if (b.valid()) y = add(tape, y, b);
  return y;
}

// ---- broadcast products --------------------------------------------------------

// out[c, ...] = x[c, ...] * g[c]
template <typename S>
Var<S> channel_scale(Tape<S>& tape, Var<S> x, Var<S> g) {
  const Shape& s = x.shape();
  if (s.empty() || g.shape().size() != 1 || g.shape()[0] != s[0])
    throw ShapeError(cat("channel_scale: ", shape_str(s), " vs ", shape_str(g.shape())));
  const std::int64_t c = s[0], inner = x.numel() / c;
  Tensor<S> out(s);
  for (std::int64_t ci = 0; ci < c; ++ci)
    for (std::int64_t i = 0; i < inner; ++i) out[ci * inner + i] = x.value()[ci * inner + i] * g.value()[ci];
  const bool rg = x.requires_grad() || g.requires_grad();
  Var<S> v = ops::make(tape, std::move(out), rg);
  if (rg) {
    auto *xn = x.node_, *gn = g.node_, *on = v.node_;
    on->backprop = [xn, gn, on, c, inner] {
      for (std::int64_t ci = 0; ci < c; ++ci) {
        if (xn->requires_grad)
          for (std::int64_t i = 0; i < inner; ++i) xn->grad[ci * inner + i] += on->grad[ci * inner + i] * gn->value[ci];
        if (gn->requires_grad) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < inner; ++i)
            acc += static_cast<double>(on->grad[ci * inner + i]) * static_cast<double>(xn->value[ci * inner + i]);
          gn->grad[ci] += static_cast<S>(acc);
        }
      }
    };
  }
  return v;
}

// out[c, ...] = x[c, ...] * gamma[c] + beta[c]. This is batch-norm in
// inference form with frozen statistics (mean 0, variance 1); gamma/beta stay
// trainable.
template <typename S>
Var<S> channel_affine(Tape<S>& tape, Var<S> x, Var<S> gamma, Var<S> beta) {
  const Shape& s = x.shape();
  if (s.empty() || gamma.shape() != Shape{s[0]} || beta.shape() != Shape{s[0]})
    throw ShapeError(cat("channel_affine: ", shape_str(s), " vs ", shape_str(gamma.shape())));
  const std::int64_t c = s[0], inner = x.numel() / c;
  Tensor<S> out(s);
  for (std::int64_t ci = 0; ci < c; ++ci)
    for (std::int64_t i = 0; i < inner; ++i)
      out[ci * inner + i] = x.value()[ci * inner + i] * gamma.value()[ci] + beta.value()[ci];
  const bool rg = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  Var<S> v = ops::make(tape, std::move(out), rg);
  if (rg) {
    auto *xn = x.node_, *gn = gamma.node_, *bn = beta.node_, *on = v.node_;
    on->backprop = [xn, gn, bn, on, c, inner] {
      for (std::int64_t ci = 0; ci < c; ++ci) {
        if (xn->requires_grad)
          for (std::int64_t i = 0; i < inner; ++i) xn->grad[ci * inner + i] += on->grad[ci * inner + i] * gn->value[ci];
        if (gn->requires_grad) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < inner; ++i)
            acc += static_cast<double>(on->grad[ci * inner + i]) * static_cast<double>(xn->value[ci * inner + i]);
          gn->grad[ci] += static_cast<S>(acc);
        }
        if (bn->requires_grad) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < inner; ++i) acc += static_cast<double>(on->grad[ci * inner + i]);
          bn->grad[ci] += static_cast<S>(acc);
        }
      }
    };
  }
  return v;
}

// out[c,h,w] = x[c,h,w] * w[h,w]
template <typename S>
Var<S> spatial_scale(Tape<S>& tape, Var<S> x, Var<S> wmap) {
  const Shape& s = x.shape();
  if (s.size() != 3 || wmap.shape() != Shape{s[1], s[2]})
    throw ShapeError(cat("spatial_scale: ", shape_str(s), " vs ", shape_str(wmap.shape())));
  const std::int64_t c = s[0], hw = static_cast<std::int64_t>(s[1]) * s[2];
  Tensor<S> out(s);
  for (std::int64_t ci = 0; ci < c; ++ci)
    for (std::int64_t i = 0; i < hw; ++i) out[ci * hw + i] = x.value()[ci * hw + i] * wmap.value()[i];
  const bool rg = x.requires_grad() || wmap.requires_grad();
  Var<S> v = ops::make(tape, std::move(out), rg);
  if (rg) {
    auto *xn = x.node_, *wn = wmap.node_, *on = v.node_;
    on->backprop = [xn, wn, on, c, hw] {
      for (std::int64_t ci = 0; ci < c; ++ci)
        for (std::int64_t i = 0; i < hw; ++i) {
          if (xn->requires_grad) xn->grad[ci * hw + i] += on->grad[ci * hw + i] * wn->value[i];
          if (wn->requires_grad) wn->grad[i] += on->grad[ci * hw + i] * xn->value[ci * hw + i];
        }
    };
  }
  return v;
}

// ---- distances ----------------------------------------------------------------

// Euclidean distance between two equal-length vectors.
template <typename S>
Var<S> l2_distance(Tape<S>& tape, Var<S> a, Var<S> b) {
  ops::check_same_shape(a, b, "l2_distance");
  const std::int64_t n = a.numel();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a.value()[i]) - static_cast<double>(b.value()[i]);
    acc += d * d;
  }
  const double norm = std::sqrt(acc);
  const bool rg = a.requires_grad() || b.requires_grad();
  Var<S> v = ops::make(tape, Tensor<S>::scalar(static_cast<S>(norm)), rg);
  if (rg) {
    auto *an = a.node_, *bn = b.node_, *on = v.node_;
    on->backprop = [an, bn, on, n, norm] {
      const double inv = norm > 1e-12 ? 1.0 / norm : 0.0;
      const double g = static_cast<double>(on->grad[0]) * inv;
      for (std::int64_t i = 0; i < n; ++i) {
        const S d = static_cast<S>(g * (static_cast<double>(an->value[i]) - static_cast<double>(bn->value[i])));
        if (an->requires_grad) an->grad[i] += d;
        if (bn->requires_grad) bn->grad[i] -= d;
      }
    };
  }
  return v;
}

// Regularized KL divergence sum(y * log(y/(f+eps) + eps)) with 0*log(.) = 0.
// y is ground truth (constant); the gradient flows into f only.
template <typename S>
Var<S> kl_term(Tape<S>& tape, Var<S> f, const Tensor<S>& y, S eps) {
  if (!f.value().same_shape(y))
    throw ShapeError(cat("kl_term: shape mismatch ", shape_str(f.shape()), " vs ", shape_str(y.shape())));
  const std::int64_t n = f.numel();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double yi = static_cast<double>(y[i]);
    if (yi == 0.0) continue;
    const double fi = static_cast<double>(f.value()[i]) + static_cast<double>(eps);
    acc += yi * std::log(yi / fi + static_cast<double>(eps));
  }
  Var<S> v = ops::make(tape, Tensor<S>::scalar(static_cast<S>(acc)), f.requires_grad());
  if (f.requires_grad()) {
    auto *fn = f.node_, *on = v.node_;
    Tensor<S> yc = y;
    on->backprop = [fn, on, n, eps, yc = std::move(yc)] {
      const double g = static_cast<double>(on->grad[0]);
      const double e = static_cast<double>(eps);
      for (std::int64_t i = 0; i < n; ++i) {
        const double yi = static_cast<double>(yc[i]);
        if (yi == 0.0) continue;
        const double fi = static_cast<double>(fn->value[i]) + e;
        // d/df [ y*log(y/f' + eps) ] = -y^2 / (f'^2 * (y/f' + eps))
        fn->grad[i] += static_cast<S>(g * (-yi * yi / (fi * fi * (yi / fi + e))));
      }
    };
  }
  return v;
}

// ---- resizing -------------------------------------------------------------------

// Nearest-neighbour resize of [C,H,W] (or [H,W]) to (ho, wo). Handles both
// up- and down-scaling; source index = floor(i * in / out).
template <typename S>
Var<S> resize_nearest(Tape<S>& tape, Var<S> x, int ho, int wo) {
  Shape s = x.shape();
  const bool rank2 = s.size() == 2;
  if (rank2) s = {1, s[0], s[1]};
  if (s.size() != 3) throw ShapeError(cat("resize_nearest: rank must be 2 or 3, got ", shape_str(x.shape())));
  const int c = s[0], hi = s[1], wi = s[2];
  if (ho <= 0 || wo <= 0) throw ArgumentError("resize_nearest: non-positive target size");
  Shape os = rank2 ? Shape{ho, wo} : Shape{c, ho, wo};
  Tensor<S> out(os);
  std::vector<std::int64_t> src(static_cast<std::size_t>(ho) * wo);
  for (int r = 0; r < ho; ++r) {
    const int sr = static_cast<int>((static_cast<std::int64_t>(r) * hi) / ho);
    for (int cc = 0; cc < wo; ++cc) {
      const int sc = static_cast<int>((static_cast<std::int64_t>(cc) * wi) / wo);
      src[static_cast<std::size_t>(r) * wo + cc] = static_cast<std::int64_t>(sr) * wi + sc;
    }
  }
  const std::int64_t in_hw = static_cast<std::int64_t>(hi) * wi;
  const std::int64_t out_hw = static_cast<std::int64_t>(ho) * wo;
  for (int ci = 0; ci < c; ++ci)
    for (std::int64_t i = 0; i < out_hw; ++i) out[ci * out_hw + i] = x.value()[ci * in_hw + src[static_cast<std::size_t>(i)]];
  Var<S> v = ops::make(tape, std::move(out), x.requires_grad());
  if (x.requires_grad()) {
    auto *xn = x.node_, *on = v.node_;
    on->backprop = [xn, on, c, in_hw, out_hw, src = std::move(src)] {
      for (int ci = 0; ci < c; ++ci)
        for (std::int64_t i = 0; i < out_hw; ++i)
          xn->grad[ci * in_hw + src[static_cast<std::size_t>(i)]] += on->grad[ci * out_hw + i];
    };
  }
  return v;
}

// ---- center-bias surface ----------------------------------------------------------

// Gaussian prior surface over an (h, w) pixel grid centred at the geometric
// center, parameterized by log standard deviations so positivity is free.
// Returns the unnormalized surface including the 1/(2 pi sx sy) factor.
template <typename S>
Var<S> center_surface(Tape<S>& tape, Var<S> rho_x, Var<S> rho_y, int h, int w) {
  if (rho_x.numel() != 1 || rho_y.numel() != 1) throw ShapeError("center_surface: rho must be scalar");
  const double sx = std::exp(static_cast<double>(rho_x.value()[0]));
  const double sy = std::exp(static_cast<double>(rho_y.value()[0]));
  const double x0 = (w - 1) / 2.0, y0 = (h - 1) / 2.0;
  const double norm = 1.0 / (2.0 * 3.14159265358979323846 * sx * sy);
  Tensor<S> out({h, w});
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double dx = c - x0, dy = r - y0;
      out[static_cast<std::int64_t>(r) * w + c] =
          static_cast<S>(norm * std::exp(-(dx * dx / (2.0 * sx * sx) + dy * dy / (2.0 * sy * sy))));
    }
  const bool rg = rho_x.requires_grad() || rho_y.requires_grad();
  Var<S> v = ops::make(tape, std::move(out), rg);
  if (rg) {
    auto *xn = rho_x.node_, *yn = rho_y.node_, *on = v.node_;
    on->backprop = [xn, yn, on, h, w, sx, sy, x0, y0] {
      // d/d rho_x of norm * exp(...): the prefactor contributes -1, the
      // exponent contributes +dx^2/sx^2 (chain rule through sx = e^rho).
      double gx = 0.0, gy = 0.0;
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          const std::int64_t i = static_cast<std::int64_t>(r) * w + c;
          const double g = static_cast<double>(on->grad[i]) * static_cast<double>(on->value[i]);
          const double dx = c - x0, dy = r - y0;
          gx += g * (dx * dx / (sx * sx) - 1.0);
          gy += g * (dy * dy / (sy * sy) - 1.0);
        }
      if (xn->requires_grad) xn->grad[0] += static_cast<S>(gx);
      if (yn->requires_grad) yn->grad[0] += static_cast<S>(gy);
    };
  }
  return v;
}

}  // namespace avsal

#endif  // AVSAL_TAPE_HPP
