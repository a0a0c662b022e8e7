#ifndef ROAM_LAYERS_HPP
#define ROAM_LAYERS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "roam/error.hpp"
#include "roam/rng.hpp"
#include "roam/tensor.hpp"

namespace roam {

/// Named view of one learnable parameter and its gradient accumulator.
template <typename Scalar>
struct ParamRef {
  std::string name;
  ArrayX<Scalar>* value;
  ArrayX<Scalar>* grad;
};

/// Named view of non-trainable layer state (running statistics).
template <typename Scalar>
struct StateRef {
  std::string name;
  ArrayX<Scalar>* value;
};

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowMatMap = Eigen::Map<RowMat<Scalar>>;
template <typename Scalar>
using ConstRowMatMap = Eigen::Map<const RowMat<Scalar>>;

// ---------------------------------------------------------------------------
// Convolution (3x3 pad 1 or 1x1), stride 1, per-sample im2col + GEMM.
// Per-sample arithmetic keeps every sample's floating-point sequence
// independent of what else sits in the batch.

template <typename Scalar>
struct Conv2d {
  int c_in = 0, c_out = 0, k = 3, pad = 1;
  ArrayX<Scalar> weight;  // (c_out, c_in*k*k) row-major
  ArrayX<Scalar> bias;    // (c_out)
  ArrayX<Scalar> d_weight, d_bias;

  Tensor4<Scalar> cached_input;
  bool has_cache = false;
  mutable ArrayX<Scalar> col_ws;  // im2col scratch, (c_in*k*k, H*W) row-major

  Conv2d() = default;
  Conv2d(int in, int out, int kernel) : c_in(in), c_out(out), k(kernel), pad(kernel / 2) {
    const int K = c_in * k * k;
    weight = ArrayX<Scalar>::Zero(static_cast<Eigen::Index>(c_out) * K);
    bias = ArrayX<Scalar>::Zero(c_out);
    d_weight = ArrayX<Scalar>::Zero(weight.size());
    d_bias = ArrayX<Scalar>::Zero(bias.size());
  }

  int patch_size() const { return c_in * k * k; }

  void init_xavier(Rng& rng) {
    const double fan_in = static_cast<double>(c_in) * k * k;
    const double fan_out = static_cast<double>(c_out) * k * k;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index i = 0; i < weight.size(); ++i)
      weight[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
    bias.setZero();
  }

  /// Fills `col` (patch_size x HW, row-major) with shifted copies of the
  /// sample's planes; out-of-bounds taps are zero.
  void im2col(const Tensor4<Scalar>& x, int bi, Scalar* col) const {
    const int H = x.h, W = x.w;
    const Eigen::Index hw = static_cast<Eigen::Index>(H) * W;
    for (int ci = 0; ci < c_in; ++ci) {
      const Scalar* plane = x.v.data() + ((static_cast<Eigen::Index>(bi) * c_in + ci) * hw);
      for (int dh = 0; dh < k; ++dh) {
        for (int dw = 0; dw < k; ++dw) {
          Scalar* row = col + (static_cast<Eigen::Index>((ci * k + dh) * k + dw)) * hw;
          const int oh = dh - pad, ow = dw - pad;
          const int w_lo = std::max(0, -ow), w_hi = std::min(W, W - ow);
          for (int h = 0; h < H; ++h) {
            Scalar* dst = row + static_cast<Eigen::Index>(h) * W;
            const int hi = h + oh;
            if (hi < 0 || hi >= H) {
              std::fill(dst, dst + W, Scalar(0));
              continue;
            }
            if (w_lo > 0) std::fill(dst, dst + w_lo, Scalar(0));
            if (w_hi < W) std::fill(dst + w_hi, dst + W, Scalar(0));
            const Scalar* src = plane + static_cast<Eigen::Index>(hi) * W + (w_lo + ow);
            std::copy(src, src + (w_hi - w_lo), dst + w_lo);
          }
        }
      }
    }
  }

  /// Scatter-add of the column gradient back onto the sample's input planes.
  void col2im_add(const Scalar* dcol, Tensor4<Scalar>& dx, int bi) const {
    const int H = dx.h, W = dx.w;
    const Eigen::Index hw = static_cast<Eigen::Index>(H) * W;
    for (int ci = 0; ci < c_in; ++ci) {
      Scalar* plane = dx.v.data() + ((static_cast<Eigen::Index>(bi) * c_in + ci) * hw);
      for (int dh = 0; dh < k; ++dh) {
        for (int dw = 0; dw < k; ++dw) {
          const Scalar* row = dcol + (static_cast<Eigen::Index>((ci * k + dh) * k + dw)) * hw;
          const int oh = dh - pad, ow = dw - pad;
          const int w_lo = std::max(0, -ow), w_hi = std::min(W, W - ow);
          for (int h = 0; h < H; ++h) {
            const int hi = h + oh;
            if (hi < 0 || hi >= H) continue;
            Scalar* dst = plane + static_cast<Eigen::Index>(hi) * W + (w_lo + ow);
            const Scalar* src = row + static_cast<Eigen::Index>(h) * W + w_lo;
            for (int w = 0; w < w_hi - w_lo; ++w) dst[w] += src[w];
          }
        }
      }
    }
  }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, bool cache) {
    if (x.c != c_in) fail(ErrorCode::ChannelMismatch, "conv expects " + std::to_string(c_in) + " channels");
    const Eigen::Index hw = static_cast<Eigen::Index>(x.h) * x.w;
    const int K = patch_size();
    Tensor4<Scalar> out(x.b, c_out, x.h, x.w);
    ConstRowMatMap<Scalar> W_map(weight.data(), c_out, K);
    if (k != 1 && col_ws.size() < static_cast<Eigen::Index>(K) * hw)
      col_ws.resize(static_cast<Eigen::Index>(K) * hw);
    for (int bi = 0; bi < x.b; ++bi) {
      RowMatMap<Scalar> out_s(out.v.data() + static_cast<Eigen::Index>(bi) * c_out * hw, c_out, hw);
      if (k == 1) {
        ConstRowMatMap<Scalar> in_s(x.v.data() + static_cast<Eigen::Index>(bi) * c_in * hw, c_in, hw);
        out_s.noalias() = W_map * in_s;
      } else {
        im2col(x, bi, col_ws.data());
        ConstRowMatMap<Scalar> col(col_ws.data(), K, hw);
        out_s.noalias() = W_map * col;
      }
      out_s.colwise() += Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(bias.data(), c_out);
    }
    if (cache) {
      cached_input = x;
      has_cache = true;
    }
    return out;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& dout) {
    if (!has_cache) fail(ErrorCode::ShapeMismatch, "conv backward without cached forward");
    const Tensor4<Scalar>& x = cached_input;
    const Eigen::Index hw = static_cast<Eigen::Index>(x.h) * x.w;
    const int K = patch_size();
    Tensor4<Scalar> dx = Tensor4<Scalar>::zeros(x.b, c_in, x.h, x.w);
    ConstRowMatMap<Scalar> W_map(weight.data(), c_out, K);
    RowMatMap<Scalar> dW_map(d_weight.data(), c_out, K);
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> db_map(d_bias.data(), c_out);
    RowMat<Scalar> dcol(K, hw);
    for (int bi = 0; bi < x.b; ++bi) {
      ConstRowMatMap<Scalar> dout_s(dout.v.data() + static_cast<Eigen::Index>(bi) * c_out * hw, c_out, hw);
      db_map += dout_s.rowwise().sum();
      if (k == 1) {
        ConstRowMatMap<Scalar> in_s(x.v.data() + static_cast<Eigen::Index>(bi) * c_in * hw, c_in, hw);
        dW_map.noalias() += dout_s * in_s.transpose();
        RowMatMap<Scalar> dx_s(dx.v.data() + static_cast<Eigen::Index>(bi) * c_in * hw, c_in, hw);
        dx_s.noalias() += W_map.transpose() * dout_s;
      } else {
        im2col(x, bi, col_ws.data());
        ConstRowMatMap<Scalar> col(col_ws.data(), K, hw);
        dW_map.noalias() += dout_s * col.transpose();
        dcol.noalias() = W_map.transpose() * dout_s;
        col2im_add(dcol.data(), dx, bi);
      }
    }
    return dx;
  }
};

// ---------------------------------------------------------------------------
// Normalization: per-sample (instance) statistics in train mode, running
// statistics in eval mode. Train-mode output depends only on the sample
// itself, which keeps per-sample arithmetic batch-independent.

template <typename Scalar>
struct InstanceNorm {
  int channels = 0;
  Scalar eps = Scalar(1e-5);
  Scalar momentum = Scalar(0.1);
  ArrayX<Scalar> gamma, beta, d_gamma, d_beta;
  ArrayX<Scalar> running_mean, running_var;

  Tensor4<Scalar> cached_xhat;
  ArrayX<Scalar> cached_inv_std;  // one entry per (sample, channel)
  bool has_cache = false;

  InstanceNorm() = default;
  explicit InstanceNorm(int c) : channels(c) {
    gamma = ArrayX<Scalar>::Ones(c);
    beta = ArrayX<Scalar>::Zero(c);
    d_gamma = ArrayX<Scalar>::Zero(c);
    d_beta = ArrayX<Scalar>::Zero(c);
    running_mean = ArrayX<Scalar>::Zero(c);
    running_var = ArrayX<Scalar>::Ones(c);
  }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, bool train, bool cache, bool update_stats) {
    if (x.c != channels) fail(ErrorCode::ChannelMismatch, "norm expects " + std::to_string(channels) + " channels");
    Tensor4<Scalar> out(x.b, x.c, x.h, x.w);
    if (!train) {
      for (int bi = 0; bi < x.b; ++bi)
        for (int ci = 0; ci < x.c; ++ci) {
          const Scalar inv = Scalar(1) / std::sqrt(running_var[ci] + eps);
          out.plane(bi, ci) = (x.plane(bi, ci) - running_mean[ci]) * (gamma[ci] * inv) + beta[ci];
        }
      has_cache = false;
      return out;
    }
    if (cache) {
      cached_xhat = Tensor4<Scalar>(x.b, x.c, x.h, x.w);
      cached_inv_std.resize(static_cast<Eigen::Index>(x.b) * x.c);
    }
    ArrayX<Scalar> mean_acc = ArrayX<Scalar>::Zero(channels);
    ArrayX<Scalar> var_acc = ArrayX<Scalar>::Zero(channels);
    ArrayX<Scalar> tmp(static_cast<Eigen::Index>(x.h) * x.w);
    for (int bi = 0; bi < x.b; ++bi) {
      for (int ci = 0; ci < x.c; ++ci) {
        const auto p = x.plane(bi, ci);
        const Scalar mu = p.mean();
        tmp = p - mu;
        const Scalar var = tmp.square().mean();
        const Scalar inv = Scalar(1) / std::sqrt(var + eps);
        if (cache) {
          cached_xhat.plane(bi, ci) = tmp * inv;
          cached_inv_std[static_cast<Eigen::Index>(bi) * x.c + ci] = inv;
          out.plane(bi, ci) = cached_xhat.plane(bi, ci) * gamma[ci] + beta[ci];
        } else {
          out.plane(bi, ci) = tmp * (inv * gamma[ci]) + beta[ci];
        }
        mean_acc[ci] += mu;
        var_acc[ci] += var;
      }
    }
    if (update_stats) {
      running_mean = (Scalar(1) - momentum) * running_mean + momentum * (mean_acc / Scalar(x.b));
      running_var = (Scalar(1) - momentum) * running_var + momentum * (var_acc / Scalar(x.b));
    }
    has_cache = cache;
    return out;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& dout) {
    if (!has_cache) fail(ErrorCode::ShapeMismatch, "norm backward without cached train forward");
    const Tensor4<Scalar>& xhat = cached_xhat;
    Tensor4<Scalar> dx(dout.b, dout.c, dout.h, dout.w);
    const Scalar n = Scalar(dout.h) * Scalar(dout.w);
    for (int bi = 0; bi < dout.b; ++bi) {
      for (int ci = 0; ci < dout.c; ++ci) {
        const auto d = dout.plane(bi, ci);
        const auto xh = xhat.plane(bi, ci);
        const Scalar sum_d = d.sum();
        const Scalar sum_dx = (d * xh).sum();
        d_gamma[ci] += sum_dx;
        d_beta[ci] += sum_d;
        const Scalar inv = cached_inv_std[static_cast<Eigen::Index>(bi) * dout.c + ci];
        dx.plane(bi, ci) = (gamma[ci] * inv / n) * (n * d - sum_d - xh * sum_dx);
      }
    }
    return dx;
  }
};

// ---------------------------------------------------------------------------
// ReLU

template <typename Scalar>
struct ReLU {
  Tensor4<Scalar> cached_out;
  bool has_cache = false;

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, bool cache) {
    Tensor4<Scalar> out(x.b, x.c, x.h, x.w);
    out.v = x.v.max(Scalar(0));
    if (cache) {
      cached_out = out;
      has_cache = true;
    }
    return out;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& dout) {
    if (!has_cache) fail(ErrorCode::ShapeMismatch, "relu backward without cached forward");
    Tensor4<Scalar> dx(dout.b, dout.c, dout.h, dout.w);
    dx.v = (cached_out.v > Scalar(0)).template cast<Scalar>() * dout.v;
    return dx;
  }
};

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2. Ties resolve to the first maximum in scan
// order, so pooling is deterministic.

template <typename Scalar>
struct MaxPool2x2 {
  int in_b = 0, in_c = 0, in_h = 0, in_w = 0;
  std::vector<std::int32_t> argmax;  // flat in-plane index per output element
  bool has_cache = false;

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, bool cache) {
    if (x.h % 2 != 0 || x.w % 2 != 0) fail(ErrorCode::ShapeMismatch, "pool needs even spatial dims");
    const int oh = x.h / 2, ow = x.w / 2;
    Tensor4<Scalar> out(x.b, x.c, oh, ow);
    if (cache) argmax.assign(static_cast<std::size_t>(out.v.size()), 0);
    Eigen::Index oi = 0;
    for (int bi = 0; bi < x.b; ++bi) {
      for (int ci = 0; ci < x.c; ++ci) {
        const auto p = x.plane(bi, ci);
        for (int h = 0; h < oh; ++h) {
          for (int w = 0; w < ow; ++w, ++oi) {
            Scalar best = p[(2 * h) * x.w + 2 * w];
            int best_idx = (2 * h) * x.w + 2 * w;
            for (int dh = 0; dh < 2; ++dh)
              for (int dw = 0; dw < 2; ++dw) {
                const int idx = (2 * h + dh) * x.w + (2 * w + dw);
                if (p[idx] > best) {
                  best = p[idx];
                  best_idx = idx;
                }
              }
            out.v[oi] = best;
            if (cache) argmax[static_cast<std::size_t>(oi)] = best_idx;
          }
        }
      }
    }
    if (cache) {
      in_b = x.b;
      in_c = x.c;
      in_h = x.h;
      in_w = x.w;
      has_cache = true;
    }
    return out;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& dout) {
    if (!has_cache) fail(ErrorCode::ShapeMismatch, "pool backward without cached forward");
    Tensor4<Scalar> dx = Tensor4<Scalar>::zeros(in_b, in_c, in_h, in_w);
    const Eigen::Index plane_in = static_cast<Eigen::Index>(in_h) * in_w;
    const Eigen::Index plane_out = static_cast<Eigen::Index>(dout.h) * dout.w;
    for (int bi = 0; bi < in_b; ++bi)
      for (int ci = 0; ci < in_c; ++ci) {
        Scalar* dst = dx.v.data() + (static_cast<Eigen::Index>(bi) * in_c + ci) * plane_in;
        const Scalar* src = dout.v.data() + (static_cast<Eigen::Index>(bi) * in_c + ci) * plane_out;
        const std::int32_t* am = argmax.data() + (static_cast<Eigen::Index>(bi) * in_c + ci) * plane_out;
        for (Eigen::Index i = 0; i < plane_out; ++i) dst[am[i]] += src[i];
      }
    return dx;
  }
};

// ---------------------------------------------------------------------------
// Nearest-neighbour 2x upsampling.

template <typename Scalar>
struct Upsample2x {
  Tensor4<Scalar> forward(const Tensor4<Scalar>& x) const {
    Tensor4<Scalar> out(x.b, x.c, 2 * x.h, 2 * x.w);
    for (int bi = 0; bi < x.b; ++bi)
      for (int ci = 0; ci < x.c; ++ci) {
        const auto p = x.plane(bi, ci);
        auto q = out.plane(bi, ci);
        for (int h = 0; h < x.h; ++h)
          for (int w = 0; w < x.w; ++w) {
            const Scalar v = p[h * x.w + w];
            const int base = (2 * h) * (2 * x.w) + 2 * w;
            q[base] = v;
            q[base + 1] = v;
            q[base + 2 * x.w] = v;
            q[base + 2 * x.w + 1] = v;
          }
      }
    return out;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& dout) const {
    if (dout.h % 2 != 0 || dout.w % 2 != 0) fail(ErrorCode::ShapeMismatch, "upsample grad needs even dims");
    Tensor4<Scalar> dx(dout.b, dout.c, dout.h / 2, dout.w / 2);
    for (int bi = 0; bi < dout.b; ++bi)
      for (int ci = 0; ci < dout.c; ++ci) {
        const auto d = dout.plane(bi, ci);
        auto q = dx.plane(bi, ci);
        for (int h = 0; h < dx.h; ++h)
          for (int w = 0; w < dx.w; ++w) {
            const int base = (2 * h) * dout.w + 2 * w;
            q[h * dx.w + w] = d[base] + d[base + 1] + d[base + dout.w] + d[base + dout.w + 1];
          }
      }
    return dx;
  }
};

// ---------------------------------------------------------------------------
// Channel concatenation (decoder skip joins).

template <typename Scalar>
Tensor4<Scalar> concat_channels(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b) {
  if (a.b != b.b || a.h != b.h || a.w != b.w)
    fail(ErrorCode::ShapeMismatch, "concat_channels: incompatible shapes");
  Tensor4<Scalar> out(a.b, a.c + b.c, a.h, a.w);
  const Eigen::Index hw = static_cast<Eigen::Index>(a.h) * a.w;
  for (int bi = 0; bi < a.b; ++bi) {
    out.v.segment(static_cast<Eigen::Index>(bi) * (a.c + b.c) * hw, static_cast<Eigen::Index>(a.c) * hw) =
        a.v.segment(static_cast<Eigen::Index>(bi) * a.c * hw, static_cast<Eigen::Index>(a.c) * hw);
    out.v.segment(static_cast<Eigen::Index>(bi) * (a.c + b.c) * hw + static_cast<Eigen::Index>(a.c) * hw,
                  static_cast<Eigen::Index>(b.c) * hw) =
        b.v.segment(static_cast<Eigen::Index>(bi) * b.c * hw, static_cast<Eigen::Index>(b.c) * hw);
  }
  return out;
}

/// Splits a gradient w.r.t. concat_channels(a, b) back into (da, db).
template <typename Scalar>
std::pair<Tensor4<Scalar>, Tensor4<Scalar>> split_channels(const Tensor4<Scalar>& d, int c_a) {
  const int c_b = d.c - c_a;
  if (c_a <= 0 || c_b <= 0) fail(ErrorCode::ShapeMismatch, "split_channels: bad channel split");
  Tensor4<Scalar> da(d.b, c_a, d.h, d.w);
  Tensor4<Scalar> db(d.b, c_b, d.h, d.w);
  const Eigen::Index hw = static_cast<Eigen::Index>(d.h) * d.w;
  for (int bi = 0; bi < d.b; ++bi) {
    da.v.segment(static_cast<Eigen::Index>(bi) * c_a * hw, static_cast<Eigen::Index>(c_a) * hw) =
        d.v.segment(static_cast<Eigen::Index>(bi) * d.c * hw, static_cast<Eigen::Index>(c_a) * hw);
    db.v.segment(static_cast<Eigen::Index>(bi) * c_b * hw, static_cast<Eigen::Index>(c_b) * hw) =
        d.v.segment(static_cast<Eigen::Index>(bi) * d.c * hw + static_cast<Eigen::Index>(c_a) * hw,
                    static_cast<Eigen::Index>(c_b) * hw);
  }
  return {std::move(da), std::move(db)};
}

}  // namespace roam

#endif  // ROAM_LAYERS_HPP
