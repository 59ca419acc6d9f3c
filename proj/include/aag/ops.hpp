#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "aag/tensor.hpp"

namespace aag {

template <class T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<MatX<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const MatX<T>>;

namespace detail {

template <class T>
bool should_record(const Tensor<T>& a) {
  return active_tape<T>() != nullptr && a.requires_grad();
}

template <class T>
bool should_record(const Tensor<T>& a, const Tensor<T>& b) {
  return active_tape<T>() != nullptr && (a.requires_grad() || b.requires_grad());
}

template <class T>
bool should_record(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& c) {
  return active_tape<T>() != nullptr && (a.requires_grad() || b.requires_grad() || c.requires_grad());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matmul: [m x k] . [k x n] -> [m x n]
// ---------------------------------------------------------------------------
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul expects rank-2 tensors, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const auto m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    throw DimensionError("matmul inner dimensions differ: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros({m, n});
  MatMap<T>(out.data_ptr(), m, n).noalias() =
      ConstMatMap<T>(a.data_ptr(), m, k) * ConstMatMap<T>(b.data_ptr(), k, n);

  if (detail::should_record(a, b)) {
    out.set_requires_grad(true);
    active_tape<T>()->record("matmul", [a, b, out, m, k, n]() mutable {
      if (!out.has_grad()) return;
      ConstMatMap<T> g(out.grad().data(), m, n);
      if (a.requires_grad()) {
        MatMap<T>(a.grad_buffer().data(), m, k).noalias() +=
            g * ConstMatMap<T>(b.data_ptr(), k, n).transpose();
      }
      if (b.requires_grad()) {
        MatMap<T>(b.grad_buffer().data(), k, n).noalias() +=
            ConstMatMap<T>(a.data_ptr(), m, k).transpose() * g;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// conv2d: cross-correlation of [n x c x h x w] with [f x c x kh x kw].
// Output spatial size floor((h + 2p - kh) / s) + 1. Implemented as im2col
// followed by one GEMM per sample.
// ---------------------------------------------------------------------------
namespace detail {

// col has layout [c*kh*kw, oh*ow].
template <class T>
void im2col(const T* src, std::int64_t c, std::int64_t h, std::int64_t w, std::int64_t kh,
            std::int64_t kw, std::int64_t stride, std::int64_t pad, std::int64_t oh,
            std::int64_t ow, T* col) {
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t ky = 0; ky < kh; ++ky) {
      for (std::int64_t kx = 0; kx < kw; ++kx) {
        T* row = col + ((ch * kh + ky) * kw + kx) * oh * ow;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
          const std::int64_t iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            std::fill(row + oy * ow, row + (oy + 1) * ow, T(0));
            continue;
          }
          const T* src_row = src + (ch * h + iy) * w;
          for (std::int64_t ox = 0; ox < ow; ++ox) {
            const std::int64_t ix = ox * stride - pad + kx;
            row[oy * ow + ox] = (ix >= 0 && ix < w) ? src_row[ix] : T(0);
          }
        }
      }
    }
  }
}

template <class T>
void col2im_accumulate(const T* col, std::int64_t c, std::int64_t h, std::int64_t w,
                       std::int64_t kh, std::int64_t kw, std::int64_t stride, std::int64_t pad,
                       std::int64_t oh, std::int64_t ow, T* dst) {
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t ky = 0; ky < kh; ++ky) {
      for (std::int64_t kx = 0; kx < kw; ++kx) {
        const T* row = col + ((ch * kh + ky) * kw + kx) * oh * ow;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
          const std::int64_t iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          T* dst_row = dst + (ch * h + iy) * w;
          for (std::int64_t ox = 0; ox < ow; ++ox) {
            const std::int64_t ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst_row[ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, int stride, int padding) {
  if (input.rank() != 4 || kernel.rank() != 4) {
    throw DimensionError("conv2d expects input [n,c,h,w] and kernel [f,c,kh,kw]");
  }
  if (stride < 1) throw ValueError("conv2d stride must be >= 1");
  if (padding < 0) throw ValueError("conv2d padding must be >= 0");
  const auto n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const auto f = kernel.dim(0), kc = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kc != c) {
    throw DimensionError("conv2d channel mismatch: input " + shape_str(input.shape()) +
                         " kernel " + shape_str(kernel.shape()));
  }
  const std::int64_t oh = (h + 2 * padding - kh) / stride + 1;
  const std::int64_t ow = (w + 2 * padding - kw) / stride + 1;
  if (h + 2 * padding < kh || w + 2 * padding < kw || oh < 1 || ow < 1) {
    throw DimensionError("conv2d output would be empty for input " + shape_str(input.shape()));
  }

  Tensor<T> out = Tensor<T>::zeros({n, f, oh, ow});
  const std::int64_t patch = c * kh * kw;
  std::vector<T> col(static_cast<std::size_t>(patch * oh * ow));
  ConstMatMap<T> kmat(kernel.data_ptr(), f, patch);
  for (std::int64_t i = 0; i < n; ++i) {
    detail::im2col(input.data_ptr() + i * c * h * w, c, h, w, kh, kw, stride, padding, oh, ow,
                   col.data());
    MatMap<T>(out.data_ptr() + i * f * oh * ow, f, oh * ow).noalias() =
        kmat * ConstMatMap<T>(col.data(), patch, oh * ow);
  }

  if (detail::should_record(input, kernel)) {
    out.set_requires_grad(true);
    const int s = stride, p = padding;
    active_tape<T>()->record("conv2d", [input, kernel, out, s, p]() mutable {
      if (!out.has_grad()) return;
      const auto n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
      const auto f = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
      const std::int64_t oh = out.dim(2), ow = out.dim(3);
      const std::int64_t patch = c * kh * kw;
      std::vector<T> col(static_cast<std::size_t>(patch * oh * ow));
      std::vector<T> dcol;
      ConstMatMap<T> kmat(kernel.data_ptr(), f, patch);
      for (std::int64_t i = 0; i < n; ++i) {
        ConstMatMap<T> g(out.grad().data() + i * f * oh * ow, f, oh * ow);
        if (kernel.requires_grad()) {
          detail::im2col(input.data_ptr() + i * c * h * w, c, h, w, kh, kw, s, p, oh, ow,
                         col.data());
          MatMap<T>(kernel.grad_buffer().data(), f, patch).noalias() +=
              g * ConstMatMap<T>(col.data(), patch, oh * ow).transpose();
        }
        if (input.requires_grad()) {
          dcol.resize(static_cast<std::size_t>(patch * oh * ow));
          MatMap<T>(dcol.data(), patch, oh * ow).noalias() = kmat.transpose() * g;
          detail::col2im_accumulate(dcol.data(), c, h, w, kh, kw, s, p, oh, ow,
                                    input.grad_buffer().data() + i * c * h * w);
        }
      }
    });
  }
  return out;
}

// Per-channel bias for conv activations: [n x f x h x w] + [f].
template <class T>
Tensor<T> channel_bias_add(const Tensor<T>& x, const Tensor<T>& bias) {
  if (x.rank() != 4 || bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw DimensionError("channel_bias_add expects [n,f,h,w] and [f]");
  }
  const auto n = x.dim(0), f = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const T* xp = x.data_ptr();
  const T* bp = bias.data_ptr();
  T* op = out.data_ptr();
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t ch = 0; ch < f; ++ch) {
      const T b = bp[ch];
      const std::int64_t base = (i * f + ch) * hw;
      for (std::int64_t k = 0; k < hw; ++k) op[base + k] = xp[base + k] + b;
    }
  }
  if (detail::should_record(x, bias)) {
    out.set_requires_grad(true);
    active_tape<T>()->record("channel_bias_add", [x, bias, out, n, f, hw]() mutable {
      if (!out.has_grad()) return;
      const T* g = out.grad().data();
      if (x.requires_grad()) x.accumulate_grad(out.grad());
      if (bias.requires_grad()) {
        auto& db = bias.grad_buffer();
        for (std::int64_t i = 0; i < n; ++i) {
          for (std::int64_t ch = 0; ch < f; ++ch) {
            const std::int64_t base = (i * f + ch) * hw;
            T acc = T(0);
            for (std::int64_t k = 0; k < hw; ++k) acc += g[base + k];
            db[static_cast<std::size_t>(ch)] += acc;
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// relu, with subgradient 0 at exactly 0.
// ---------------------------------------------------------------------------
template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const T* xp = x.data_ptr();
  T* op = out.data_ptr();
  const auto n = x.size();
  for (std::int64_t i = 0; i < n; ++i) op[i] = xp[i] > T(0) ? xp[i] : T(0);
  if (detail::should_record(x)) {
    out.set_requires_grad(true);
    active_tape<T>()->record("relu", [x, out, n]() mutable {
      if (!out.has_grad()) return;
      const T* g = out.grad().data();
      const T* xp = x.data_ptr();
      auto& dx = x.grad_buffer();
      for (std::int64_t i = 0; i < n; ++i) {
        if (xp[i] > T(0)) dx[static_cast<std::size_t>(i)] += g[i];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// max_pool2x2: stride-2 window-2 max over [n x c x h x w]; odd trailing
// rows/columns are dropped. Ties resolve to the first element in row-major
// window scan order.
// ---------------------------------------------------------------------------
template <class T>
Tensor<T> max_pool2x2(const Tensor<T>& x) {
  if (x.rank() != 4) throw DimensionError("max_pool2x2 expects [n,c,h,w]");
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto oh = h / 2, ow = w / 2;
  if (oh < 1 || ow < 1) throw DimensionError("max_pool2x2 input too small: " + shape_str(x.shape()));
  Tensor<T> out = Tensor<T>::zeros({n, c, oh, ow});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(n * c * oh * ow));
  const T* xp = x.data_ptr();
  T* op = out.data_ptr();
  std::int64_t oi = 0;
  for (std::int64_t i = 0; i < n * c; ++i) {
    const T* plane = xp + i * h * w;
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      for (std::int64_t ox = 0; ox < ow; ++ox, ++oi) {
        std::int64_t best = (2 * oy) * w + 2 * ox;
        T best_v = plane[best];
        const std::int64_t cand[3] = {(2 * oy) * w + 2 * ox + 1, (2 * oy + 1) * w + 2 * ox,
                                      (2 * oy + 1) * w + 2 * ox + 1};
        for (std::int64_t k : cand) {
          if (plane[k] > best_v) {
            best_v = plane[k];
            best = k;
          }
        }
        op[oi] = best_v;
        (*argmax)[static_cast<std::size_t>(oi)] = i * h * w + best;
      }
    }
  }
  if (detail::should_record(x)) {
    out.set_requires_grad(true);
    active_tape<T>()->record("max_pool2x2", [x, out, argmax]() mutable {
      if (!out.has_grad()) return;
      const T* g = out.grad().data();
      auto& dx = x.grad_buffer();
      for (std::size_t i = 0; i < argmax->size(); ++i) {
        dx[static_cast<std::size_t>((*argmax)[i])] += g[i];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// global_avg_pool: [n x c x h x w] -> [n x c].
// ---------------------------------------------------------------------------
template <class T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  if (x.rank() != 4) throw DimensionError("global_avg_pool expects [n,c,h,w]");
  const auto n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> out = Tensor<T>::zeros({n, c});
  const T* xp = x.data_ptr();
  T* op = out.data_ptr();
  for (std::int64_t i = 0; i < n * c; ++i) {
    T acc = T(0);
    for (std::int64_t k = 0; k < hw; ++k) acc += xp[i * hw + k];
    op[i] = acc / static_cast<T>(hw);
  }
  if (detail::should_record(x)) {
    out.set_requires_grad(true);
    active_tape<T>()->record("global_avg_pool", [x, out, n, c, hw]() mutable {
      if (!out.has_grad()) return;
      const T* g = out.grad().data();
      auto& dx = x.grad_buffer();
      const T inv = T(1) / static_cast<T>(hw);
      for (std::int64_t i = 0; i < n * c; ++i) {
        const T gi = g[i] * inv;
        for (std::int64_t k = 0; k < hw; ++k) dx[static_cast<std::size_t>(i * hw + k)] += gi;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// affine: [n x p] . [p x q] + [q].
// ---------------------------------------------------------------------------
template <class T>
Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || bias.rank() != 1) {
    throw DimensionError("affine expects x [n,p], weight [p,q], bias [q]");
  }
  const auto n = x.dim(0), p = x.dim(1), q = weight.dim(1);
  if (weight.dim(0) != p || bias.dim(0) != q) {
    throw DimensionError("affine shape mismatch: x " + shape_str(x.shape()) + " weight " +
                         shape_str(weight.shape()) + " bias " + shape_str(bias.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros({n, q});
  MatMap<T> o(out.data_ptr(), n, q);
  o.noalias() = ConstMatMap<T>(x.data_ptr(), n, p) * ConstMatMap<T>(weight.data_ptr(), p, q);
  o.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.data_ptr(), q);

  if (detail::should_record(x, weight, bias)) {
    out.set_requires_grad(true);
    active_tape<T>()->record("affine", [x, weight, bias, out, n, p, q]() mutable {
      if (!out.has_grad()) return;
      ConstMatMap<T> g(out.grad().data(), n, q);
      if (x.requires_grad()) {
        MatMap<T>(x.grad_buffer().data(), n, p).noalias() +=
            g * ConstMatMap<T>(weight.data_ptr(), p, q).transpose();
      }
      if (weight.requires_grad()) {
        MatMap<T>(weight.grad_buffer().data(), p, q).noalias() +=
            ConstMatMap<T>(x.data_ptr(), n, p).transpose() * g;
      }
      if (bias.requires_grad()) {
        Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.grad_buffer().data(), q) +=
            g.colwise().sum();
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// reshape (copying view; total element count preserved).
// ---------------------------------------------------------------------------
template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.size()) {
    throw DimensionError("reshape " + shape_str(x.shape()) + " -> " + shape_str(new_shape) +
                         " changes element count");
  }
  Tensor<T> out(new_shape, std::vector<T>(x.data().begin(), x.data().end()));
  if (detail::should_record(x)) {
    out.set_requires_grad(true);
    active_tape<T>()->record("reshape", [x, out]() mutable {
      if (!out.has_grad()) return;
      x.accumulate_grad(out.grad());
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// sum / mean -> scalar tensor of shape [1].
// ---------------------------------------------------------------------------
template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  Tensor<T> out = Tensor<T>::scalar_tensor(acc);
  if (detail::should_record(x)) {
    out.set_requires_grad(true);
    active_tape<T>()->record("sum", [x, out]() mutable {
      if (!out.has_grad()) return;
      const T g = out.grad()[0];
      auto& dx = x.grad_buffer();
      for (auto& v : dx) v += g;
    });
  }
  return out;
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.size() == 0) throw DimensionError("mean of empty tensor");
  T acc = T(0);
  for (T v : x.data()) acc += v;
  const T inv = T(1) / static_cast<T>(x.size());
  Tensor<T> out = Tensor<T>::scalar_tensor(acc * inv);
  if (detail::should_record(x)) {
    out.set_requires_grad(true);
    active_tape<T>()->record("mean", [x, out, inv]() mutable {
      if (!out.has_grad()) return;
      const T g = out.grad()[0] * inv;
      auto& dx = x.grad_buffer();
      for (auto& v : dx) v += g;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// l2_normalize_rows: each row of [n x d] divided by max(||row||, epsilon).
// ---------------------------------------------------------------------------
template <class T>
Tensor<T> l2_normalize_rows(const Tensor<T>& x, T epsilon = T(1e-12)) {
  if (x.rank() != 2) throw DimensionError("l2_normalize_rows expects [n,d]");
  const auto n = x.dim(0), d = x.dim(1);
  if (n < 1 || d < 1) throw DimensionError("l2_normalize_rows needs n,d >= 1");
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  auto norms = std::make_shared<std::vector<T>>(static_cast<std::size_t>(n));
  const T* xp = x.data_ptr();
  T* op = out.data_ptr();
  for (std::int64_t r = 0; r < n; ++r) {
    T sq = T(0);
    for (std::int64_t j = 0; j < d; ++j) sq += xp[r * d + j] * xp[r * d + j];
    const T norm = std::sqrt(sq);
    const T denom = std::max(norm, epsilon);
    (*norms)[static_cast<std::size_t>(r)] = norm;
    for (std::int64_t j = 0; j < d; ++j) op[r * d + j] = xp[r * d + j] / denom;
  }
  if (detail::should_record(x)) {
    out.set_requires_grad(true);
    active_tape<T>()->record("l2_normalize_rows", [x, out, norms, epsilon, n, d]() mutable {
      if (!out.has_grad()) return;
      const T* g = out.grad().data();
      const T* y = out.data_ptr();
      auto& dx = x.grad_buffer();
      for (std::int64_t r = 0; r < n; ++r) {
        const T norm = (*norms)[static_cast<std::size_t>(r)];
        if (norm > epsilon) {
          T dot = T(0);
          for (std::int64_t j = 0; j < d; ++j) dot += g[r * d + j] * y[r * d + j];
          const T inv = T(1) / norm;
          for (std::int64_t j = 0; j < d; ++j) {
            dx[static_cast<std::size_t>(r * d + j)] += (g[r * d + j] - dot * y[r * d + j]) * inv;
          }
        } else {
          const T inv = T(1) / epsilon;
          for (std::int64_t j = 0; j < d; ++j) {
            dx[static_cast<std::size_t>(r * d + j)] += g[r * d + j] * inv;
          }
        }
      }
    });
  }
  return out;
}

template <class T>
MatX<T> to_matrix(const Tensor<T>& t) {
  if (t.rank() != 2) throw DimensionError("to_matrix expects rank-2 tensor");
  return ConstMatMap<T>(t.data_ptr(), t.dim(0), t.dim(1));
}

template <class T>
Tensor<T> from_matrix(const MatX<T>& m) {
  Tensor<T> t = Tensor<T>::zeros({m.rows(), m.cols()});
  MatMap<T>(t.data_ptr(), m.rows(), m.cols()) = m;
  return t;
}

// Weighted sum against fixed coefficients; handy for reducing a tensor to a
// scalar probe in gradient checks.
template <class T>
Tensor<T> weighted_sum(const Tensor<T>& x, const std::vector<T>& coeffs) {
  if (static_cast<std::int64_t>(coeffs.size()) != x.size()) {
    throw DimensionError("weighted_sum coefficient length mismatch");
  }
  T acc = T(0);
  const T* xp = x.data_ptr();
  for (std::size_t i = 0; i < coeffs.size(); ++i) acc += xp[i] * coeffs[i];
  Tensor<T> out = Tensor<T>::scalar_tensor(acc);
  if (detail::should_record(x)) {
    out.set_requires_grad(true);
    active_tape<T>()->record("weighted_sum", [x, out, coeffs]() mutable {
      if (!out.has_grad()) return;
      const T g = out.grad()[0];
      auto& dx = x.grad_buffer();
      for (std::size_t i = 0; i < coeffs.size(); ++i) dx[i] += g * coeffs[i];
    });
  }
  return out;
}

}  // namespace aag
