#ifndef ROAM_LOSSES_HPP
#define ROAM_LOSSES_HPP

#include <cmath>
#include <tuple>
#include <utility>

#include "roam/error.hpp"
#include "roam/ops.hpp"
#include "roam/types.hpp"

namespace roam {

// ---------------------------------------------------------------------------
// Concatenate / split bookkeeping. Labeled entries always occupy the front
// of the combined batch; the marker records where the unlabeled part starts.

template <typename Scalar>
std::tuple<ImageBatch<Scalar>, SoftLabelBatch<Scalar>, int> concat_batches(
    const ImageBatch<Scalar>& xl, const SoftLabelBatch<Scalar>& yl, const ImageBatch<Scalar>& xu,
    const SoftLabelBatch<Scalar>& yu) {
  const int b_l = xl.data.b, b_u = xu.data.b;
  if (xl.data.b != yl.data.b || xu.data.b != yu.data.b)
    fail(ErrorCode::ShapeMismatch, "concat_batches: images and labels disagree on batch size");
  if (b_u == 0) return {xl, yl, b_l};
  if (xl.data.c != xu.data.c || xl.data.h != xu.data.h || xl.data.w != xu.data.w ||
      yl.data.c != yu.data.c || yl.data.h != yu.data.h || yl.data.w != yu.data.w)
    fail(ErrorCode::ShapeMismatch, "concat_batches: labeled and unlabeled shapes differ");
  Tensor4<Scalar> x(b_l + b_u, xl.data.c, xl.data.h, xl.data.w);
  x.v.head(xl.data.size()) = xl.data.v;
  x.v.tail(xu.data.size()) = xu.data.v;
  Tensor4<Scalar> y(b_l + b_u, yl.data.c, yl.data.h, yl.data.w);
  y.v.head(yl.data.size()) = yl.data.v;
  y.v.tail(yu.data.size()) = yu.data.v;
  return {ImageBatch<Scalar>(std::move(x)), SoftLabelBatch<Scalar>(std::move(y), yl.num_classes), b_l};
}

template <typename Scalar>
Tensor4<Scalar> slice_batch(const Tensor4<Scalar>& t, int begin, int end) {
  Tensor4<Scalar> out(end - begin, t.c, t.h, t.w);
  const Eigen::Index stride = static_cast<Eigen::Index>(t.c) * t.h * t.w;
  out.v = t.v.segment(static_cast<Eigen::Index>(begin) * stride,
                      static_cast<Eigen::Index>(end - begin) * stride);
  return out;
}

/// Index-range split at the marker: (P_L, Y'_L, P_U, Y'_U).
template <typename Scalar>
std::tuple<Tensor4<Scalar>, SoftLabelBatch<Scalar>, Tensor4<Scalar>, SoftLabelBatch<Scalar>>
split_predictions(const Tensor4<Scalar>& p, const SoftLabelBatch<Scalar>& y_mixed, int marker) {
  if (marker < 0 || marker > p.b) fail(ErrorCode::BadMarker, "marker " + std::to_string(marker) +
                                                                 " outside batch of " + std::to_string(p.b));
  if (y_mixed.data.b != p.b)
    fail(ErrorCode::ShapeMismatch, "split_predictions: labels and predictions disagree on batch size");
  return {slice_batch(p, 0, marker), SoftLabelBatch<Scalar>(slice_batch(y_mixed.data, 0, marker), y_mixed.num_classes),
          slice_batch(p, marker, p.b),
          SoftLabelBatch<Scalar>(slice_batch(y_mixed.data, marker, p.b), y_mixed.num_classes)};
}

// ---------------------------------------------------------------------------
// Loss terms. Values accumulate in double regardless of Scalar; both terms
// reduce by mean so beta stays scale-comparable across batch sizes.

/// Mean over batch and pixels of -sum_c targets[c] * log softmax(logits)[c].
template <typename Scalar>
double soft_cross_entropy(const Tensor4<Scalar>& logits, const SoftLabelBatch<Scalar>& targets) {
  require_same_shape(logits, targets.data, "soft_cross_entropy");
  if (logits.b == 0) return 0.0;
  const Tensor4<Scalar> log_p = log_softmax_channels(logits);
  double sum = 0.0;
  const int hw = logits.h * logits.w;
  for (int bi = 0; bi < logits.b; ++bi) {
    const auto lp = log_p.sample(bi);
    const auto t = targets.data.sample(bi);
    for (int px = 0; px < hw; ++px)
      sum -= static_cast<double>((t.col(px).array() * lp.col(px).array()).sum());
  }
  return sum / (static_cast<double>(logits.b) * hw);
}

/// Mean over batch, channels, and pixels of (softmax(logits)[c] - targets[c])^2.
template <typename Scalar>
double consistency_mse(const Tensor4<Scalar>& logits, const SoftLabelBatch<Scalar>& targets) {
  require_same_shape(logits, targets.data, "consistency_mse");
  if (logits.b == 0) return 0.0;
  const Tensor4<Scalar> p = softmax_channels(logits);
  double sum = 0.0;
  for (int bi = 0; bi < logits.b; ++bi)
    sum += static_cast<double>((p.sample(bi) - targets.data.sample(bi)).array().square().sum());
  return sum / static_cast<double>(logits.size());
}

struct LossTerms {
  double ce = 0.0;
  double mse = 0.0;
  double total = 0.0;
};

/// L = L_CE(P_L, Y'_L) + beta * L_MSE(P_U, Y'_U). With beta = 0 or an empty
/// unlabeled slice the MSE term contributes exactly nothing.
template <typename Scalar>
LossTerms total_loss(const Tensor4<Scalar>& p_l, const SoftLabelBatch<Scalar>& y_l,
                     const Tensor4<Scalar>& p_u, const SoftLabelBatch<Scalar>& y_u, double beta) {
  if (beta < 0.0) fail(ErrorCode::ConfigInvalid, "beta must be non-negative");
  LossTerms terms;
  terms.ce = soft_cross_entropy(p_l, y_l);
  terms.mse = (p_u.b == 0) ? 0.0 : consistency_mse(p_u, y_u);
  terms.total = (beta == 0.0) ? terms.ce : terms.ce + beta * terms.mse;
  return terms;
}

// ---------------------------------------------------------------------------
// Gradients w.r.t. logits.

/// d/dlogits of soft_cross_entropy: (softmax - target) / (B*H*W).
template <typename Scalar>
Tensor4<Scalar> soft_cross_entropy_backward(const Tensor4<Scalar>& logits,
                                            const SoftLabelBatch<Scalar>& targets) {
  require_same_shape(logits, targets.data, "soft_cross_entropy_backward");
  Tensor4<Scalar> d = softmax_channels(logits);
  const Scalar scale = Scalar(1) / (Scalar(logits.b) * logits.h * logits.w);
  d.v = (d.v - targets.data.v) * scale;
  return d;
}

/// d/dlogits of consistency_mse, through the softmax:
/// (2/(B*C*H*W)) * p_k * ((p_k - t_k) - sum_c (p_c - t_c) * p_c).
template <typename Scalar>
Tensor4<Scalar> consistency_mse_backward(const Tensor4<Scalar>& logits,
                                         const SoftLabelBatch<Scalar>& targets) {
  require_same_shape(logits, targets.data, "consistency_mse_backward");
  const Tensor4<Scalar> p = softmax_channels(logits);
  Tensor4<Scalar> d(logits.b, logits.c, logits.h, logits.w);
  const Scalar scale = Scalar(2) / Scalar(logits.size());
  const int hw = logits.h * logits.w;
  for (int bi = 0; bi < logits.b; ++bi) {
    const auto ps = p.sample(bi);
    const auto ts = targets.data.sample(bi);
    auto ds = d.sample(bi);
    for (int px = 0; px < hw; ++px) {
      const auto diff = (ps.col(px) - ts.col(px)).array();
      const Scalar dot = (diff * ps.col(px).array()).sum();
      ds.col(px) = (scale * ps.col(px).array() * (diff - dot)).matrix();
    }
  }
  return d;
}

/// Gradients of total_loss w.r.t. (P_L, P_U). beta = 0 or an empty slice
/// yields an exactly zero unlabeled gradient.
template <typename Scalar>
std::pair<Tensor4<Scalar>, Tensor4<Scalar>> total_loss_backward(
    const Tensor4<Scalar>& p_l, const SoftLabelBatch<Scalar>& y_l, const Tensor4<Scalar>& p_u,
    const SoftLabelBatch<Scalar>& y_u, double beta) {
  Tensor4<Scalar> d_l = soft_cross_entropy_backward(p_l, y_l);
  Tensor4<Scalar> d_u = Tensor4<Scalar>::zeros(p_u.b, p_u.c, p_u.h, p_u.w);
  if (beta != 0.0 && p_u.b > 0) {
    d_u = consistency_mse_backward(p_u, y_u);
    d_u.v *= Scalar(beta);
  }
  return {std::move(d_l), std::move(d_u)};
}

/// Reassembles per-slice gradients into a gradient for the concatenated
/// logits tensor.
template <typename Scalar>
Tensor4<Scalar> join_gradients(const Tensor4<Scalar>& d_l, const Tensor4<Scalar>& d_u) {
  if (d_u.b == 0) return d_l;
  Tensor4<Scalar> d(d_l.b + d_u.b, d_l.c, d_l.h, d_l.w);
  d.v.head(d_l.size()) = d_l.v;
  d.v.tail(d_u.size()) = d_u.v;
  return d;
}

}  // namespace roam

#endif  // ROAM_LOSSES_HPP
