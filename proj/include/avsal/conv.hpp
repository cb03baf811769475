#ifndef AVSAL_CONV_HPP
#define AVSAL_CONV_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "avsal/tape.hpp"

namespace avsal {

enum class PadMode { kZero, kClamp };

namespace detail {

// Fills the im2col matrix. idx(r, c) returns the flat source index or -1 for
// a zero-padded entry; it must be cheap because it runs once per cell.
template <typename S, typename IndexFn>
void im2col_gather(const S* x, S* col, std::int64_t rows, std::int64_t cols, IndexFn idx) {
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) {
      const std::int64_t si = idx(r, c);
      col[r * cols + c] = si >= 0 ? x[si] : S(0);
    }
}

template <typename S, typename IndexFn>
void im2col_scatter_add(const S* dcol, S* dx, std::int64_t rows, std::int64_t cols, IndexFn idx) {
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) {
      const std::int64_t si = idx(r, c);
      if (si >= 0) dx[si] += dcol[r * cols + c];
    }
}

inline int conv_out_len(int in, int k, int stride, int pad, const char* what) {
  const int num = in + 2 * pad - k;
  if (num < 0 || stride < 1)
    throw ShapeError(cat(what, ": input ", in, " too small for kernel ", k, " pad ", pad));
  return num / stride + 1;
}

// Shared tail: gemm, bias, node creation, backward closure. IndexFn is copied
// into the closure so geometry is recomputed instead of stored.
template <typename S, typename IndexFn>
Var<S> conv_core(Tape<S>& tape, Var<S> x, Var<S> w, Var<S> b, Shape out_shape, std::int64_t rows,
                 std::int64_t cols, IndexFn idx, const char* what) {
  const int cout = w.shape()[0];
  if (w.numel() != cout * rows)
    throw ShapeError(cat(what, ": weight ", shape_str(w.shape()), " inconsistent with input ", shape_str(x.shape())));
  if (b.valid() && b.shape() != Shape{cout})
    throw ShapeError(cat(what, ": bias ", shape_str(b.shape()), " for ", cout, " outputs"));

  std::vector<S> col(static_cast<std::size_t>(rows * cols));
  im2col_gather(x.value().data(), col.data(), rows, cols, idx);
  Tensor<S> out(out_shape);
  gemm_nn<S>(cout, cols, rows, w.value().data(), col.data(), out.data(), false);
  if (b.valid())
    for (int co = 0; co < cout; ++co)
      for (std::int64_t c = 0; c < cols; ++c) out[co * cols + c] += b.value()[co];

  const bool bg = b.valid() && b.requires_grad();
  const bool rg = x.requires_grad() || w.requires_grad() || bg;
  Var<S> v = ops::make(tape, std::move(out), rg);
  if (rg) {
    auto* xn = x.node_;
    auto* wn = w.node_;
    auto* bn = b.valid() ? b.node_ : nullptr;
    auto* on = v.node_;
    on->backprop = [xn, wn, bn, on, rows, cols, cout, idx] {
      if (wn->requires_grad) {
        std::vector<S> col2(static_cast<std::size_t>(rows * cols));
        im2col_gather(xn->value.data(), col2.data(), rows, cols, idx);
        gemm_nt<S>(cout, rows, cols, on->grad.data(), col2.data(), wn->grad.data(), true);
      }
      if (xn->requires_grad) {
        std::vector<S> dcol(static_cast<std::size_t>(rows * cols));
        gemm_tn<S>(rows, cols, cout, wn->value.data(), on->grad.data(), dcol.data(), false);
        im2col_scatter_add(dcol.data(), xn->grad.data(), rows, cols, idx);
      }
      if (bn && bn->requires_grad) {
        for (int co = 0; co < cout; ++co) {
          double acc = 0.0;
          for (std::int64_t c = 0; c < cols; ++c) acc += static_cast<double>(on->grad[co * cols + c]);
          bn->grad[co] += static_cast<S>(acc);
        }
      }
    };
  }
  return v;
}

}  // namespace detail

// x: [Cin, L], w: [Cout, Cin, K], b: [Cout] or default Var. Zero padding.
template <typename S>
Var<S> conv1d(Tape<S>& tape, Var<S> x, Var<S> w, Var<S> b, int stride, int pad) {
  if (x.shape().size() != 2 || w.shape().size() != 3 || w.shape()[1] != x.shape()[0])
    throw ShapeError(cat("conv1d: x ", shape_str(x.shape()), " w ", shape_str(w.shape())));
  const int cin = x.shape()[0], L = x.shape()[1], cout = w.shape()[0], k = w.shape()[2];
  const int lo = detail::conv_out_len(L, k, stride, pad, "conv1d");
  const std::int64_t rows = static_cast<std::int64_t>(cin) * k;
  const std::int64_t cols = lo;
  auto idx = [cin, L, k, stride, pad](std::int64_t r, std::int64_t c) -> std::int64_t {
    const std::int64_t ci = r / k, kk = r % k;
    const std::int64_t src = c * stride + kk - pad;
    (void)cin;
    return (src >= 0 && src < L) ? ci * L + src : -1;
  };
  return detail::conv_core(tape, x, w, b, Shape{cout, lo}, rows, cols, idx, "conv1d");
}

// x: [Cin, H, W], w: [Cout, Cin, Kh, Kw]. Square stride/pad; pad mode zero or
// clamp (replicate border).
template <typename S>
Var<S> conv2d(Tape<S>& tape, Var<S> x, Var<S> w, Var<S> b, int stride, int pad,
              PadMode mode = PadMode::kZero) {
  if (x.shape().size() != 3 || w.shape().size() != 4 || w.shape()[1] != x.shape()[0])
    throw ShapeError(cat("conv2d: x ", shape_str(x.shape()), " w ", shape_str(w.shape())));
  const int H = x.shape()[1], W = x.shape()[2], cout = w.shape()[0];
  const int kh = w.shape()[2], kw = w.shape()[3];
  const int ho = detail::conv_out_len(H, kh, stride, pad, "conv2d");
  const int wo = detail::conv_out_len(W, kw, stride, pad, "conv2d");
  const std::int64_t rows = static_cast<std::int64_t>(x.shape()[0]) * kh * kw;
  const std::int64_t cols = static_cast<std::int64_t>(ho) * wo;
  const bool clamp = mode == PadMode::kClamp;
  auto idx = [H, W, kh, kw, ho, wo, stride, pad, clamp](std::int64_t r, std::int64_t c) -> std::int64_t {
    const std::int64_t ci = r / (kh * kw), kr = (r / kw) % kh, kc = r % kw;
    std::int64_t ih = (c / wo) * stride + kr - pad;
    std::int64_t iw = (c % wo) * stride + kc - pad;
    if (clamp) {
      ih = std::clamp<std::int64_t>(ih, 0, H - 1);
      iw = std::clamp<std::int64_t>(iw, 0, W - 1);
    } else if (ih < 0 || ih >= H || iw < 0 || iw >= W) {
      return -1;
    }
    (void)ho;
    return (ci * H + ih) * W + iw;
  };
  return detail::conv_core(tape, x, w, b, Shape{cout, ho, wo}, rows, cols, idx, "conv2d");
}

// x: [Cin, T, H, W], w: [Cout, Cin, Kt, Kh, Kw]. Per-axis stride/pad, zero
// padding only (encoder use).
template <typename S>
Var<S> conv3d(Tape<S>& tape, Var<S> x, Var<S> w, Var<S> b, std::array<int, 3> stride,
              std::array<int, 3> pad) {
  if (x.shape().size() != 4 || w.shape().size() != 5 || w.shape()[1] != x.shape()[0])
    throw ShapeError(cat("conv3d: x ", shape_str(x.shape()), " w ", shape_str(w.shape())));
  const int T = x.shape()[1], H = x.shape()[2], W = x.shape()[3], cout = w.shape()[0];
  const int kt = w.shape()[2], kh = w.shape()[3], kw = w.shape()[4];
  const int to = detail::conv_out_len(T, kt, stride[0], pad[0], "conv3d");
  const int ho = detail::conv_out_len(H, kh, stride[1], pad[1], "conv3d");
  const int wo = detail::conv_out_len(W, kw, stride[2], pad[2], "conv3d");
  const std::int64_t rows = static_cast<std::int64_t>(x.shape()[0]) * kt * kh * kw;
  const std::int64_t cols = static_cast<std::int64_t>(to) * ho * wo;
  const int st = stride[0], sh = stride[1], sw = stride[2];
  const int pt = pad[0], ph = pad[1], pw = pad[2];
  auto idx = [=](std::int64_t r, std::int64_t c) -> std::int64_t {
    const std::int64_t ci = r / (kt * kh * kw);
    const std::int64_t rk = r % (kt * kh * kw);
    const std::int64_t ktt = rk / (kh * kw), krr = (rk / kw) % kh, kcc = rk % kw;
    const std::int64_t it = (c / (static_cast<std::int64_t>(ho) * wo)) * st + ktt - pt;
    const std::int64_t ih = ((c / wo) % ho) * sh + krr - ph;
    const std::int64_t iw = (c % wo) * sw + kcc - pw;
    if (it < 0 || it >= T || ih < 0 || ih >= H || iw < 0 || iw >= W) return -1;
    return ((ci * T + it) * H + ih) * W + iw;
  };
  return detail::conv_core(tape, x, w, b, Shape{cout, to, ho, wo}, rows, cols, idx, "conv3d");
}

}  // namespace avsal

#endif  // AVSAL_CONV_HPP
