#ifndef ROAM_MIXUP_HPP
#define ROAM_MIXUP_HPP

#include <algorithm>
#include <vector>

#include "roam/error.hpp"
#include "roam/rng.hpp"
#include "roam/tensor.hpp"
#include "roam/types.hpp"

namespace roam {

/// lambda' = max(lambda, 1 - lambda), lambda ~ Beta(alpha, alpha).
/// The fold onto [0.5, 1] keeps the original sample dominant in the mix.
inline double sample_lambda_prime(Rng& rng, double alpha) {
  if (!(alpha > 0.0)) fail(ErrorCode::NonpositiveAlpha, "alpha must be positive");
  const double lambda = rng.beta(alpha, alpha);
  return std::max(lambda, 1.0 - lambda);
}

/// Uniform random bijection on [0, n).
inline std::vector<int> make_permutation(Rng& rng, int n) {
  std::vector<int> p = identity_permutation(n);
  rng.shuffle(p);
  return p;
}

/// Permutes [0, n_first) within itself and [n_first, n_total) within itself;
/// used when labeled and unlabeled batches are mixed separately.
inline std::vector<int> make_block_permutation(Rng& rng, int n_first, int n_total) {
  std::vector<int> head = identity_permutation(n_first);
  std::vector<int> tail = identity_permutation(n_total - n_first);
  rng.shuffle(head);
  rng.shuffle(tail);
  std::vector<int> p(static_cast<std::size_t>(n_total));
  for (int i = 0; i < n_first; ++i) p[static_cast<std::size_t>(i)] = head[static_cast<std::size_t>(i)];
  for (int i = n_first; i < n_total; ++i)
    p[static_cast<std::size_t>(i)] = n_first + tail[static_cast<std::size_t>(i - n_first)];
  return p;
}

/// Uniform draw from the configured injection points.
inline LayerId select_kappa(Rng& rng, const std::vector<LayerId>& kappa_set) {
  if (kappa_set.empty()) fail(ErrorCode::EmptyKappaSet, "kappa_set must not be empty");
  return kappa_set[static_cast<std::size_t>(rng.bounded(static_cast<std::uint64_t>(kappa_set.size())))];
}

/// out = lambda * a + (1 - lambda) * b, elementwise over two equally shaped
/// tensors. Exposed for the input-level equivalence and symmetry checks.
template <typename Scalar>
Tensor4<Scalar> mix_pair(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b, double lambda) {
  require_same_shape(a, b, "mix_pair");
  Tensor4<Scalar> out(a.b, a.c, a.h, a.w);
  out.v = Scalar(lambda) * a.v + Scalar(1.0 - lambda) * b.v;
  return out;
}

/// Convex combination of each sample with its permuted partner:
/// out[i] = lambda_i * x[i] + (1 - lambda_i) * x[perm[i]].
template <typename Scalar>
Tensor4<Scalar> mix(const Tensor4<Scalar>& x, const MixupPlan& plan) {
  if (static_cast<int>(plan.permutation.size()) != x.b)
    fail(ErrorCode::ShapeMismatch, "mix: permutation length differs from batch size");
  if (!plan.per_sample_lambda.empty() &&
      static_cast<int>(plan.per_sample_lambda.size()) != x.b)
    fail(ErrorCode::ShapeMismatch, "mix: per-sample lambda length differs from batch size");
  Tensor4<Scalar> out(x.b, x.c, x.h, x.w);
  const Eigen::Index stride = static_cast<Eigen::Index>(x.c) * x.h * x.w;
  for (int i = 0; i < x.b; ++i) {
    const double lambda =
        plan.per_sample_lambda.empty() ? plan.lambda_prime : plan.per_sample_lambda[static_cast<std::size_t>(i)];
    const int j = plan.permutation[static_cast<std::size_t>(i)];
    out.v.segment(i * stride, stride) = Scalar(lambda) * x.v.segment(i * stride, stride) +
                                        Scalar(1.0 - lambda) * x.v.segment(j * stride, stride);
  }
  return out;
}

template <typename Scalar>
SoftLabelBatch<Scalar> mix(const SoftLabelBatch<Scalar>& y, const MixupPlan& plan) {
  return SoftLabelBatch<Scalar>(mix(y.data, plan), y.num_classes);
}

/// H' = lambda' * h + (1 - lambda') * h_perm, Y' likewise: the literal
/// two-operand mixing step, for callers that permute explicitly.
template <typename Scalar>
std::pair<Tensor4<Scalar>, SoftLabelBatch<Scalar>> mix(const Tensor4<Scalar>& h,
                                                       const Tensor4<Scalar>& h_perm,
                                                       const SoftLabelBatch<Scalar>& y,
                                                       const SoftLabelBatch<Scalar>& y_perm,
                                                       double lambda_prime) {
  require_same_shape(y.data, y_perm.data, "mix labels");
  return {mix_pair(h, h_perm, lambda_prime),
          SoftLabelBatch<Scalar>(mix_pair(y.data, y_perm.data, lambda_prime), y.num_classes)};
}

/// Pullback of mix: routes the upstream gradient to both mix operands.
/// dx[i] += lambda_i * dout[i]; dx[perm[i]] += (1 - lambda_i) * dout[i].
template <typename Scalar>
Tensor4<Scalar> mix_backward(const Tensor4<Scalar>& dout, const MixupPlan& plan) {
  if (static_cast<int>(plan.permutation.size()) != dout.b)
    fail(ErrorCode::ShapeMismatch, "mix_backward: permutation length differs from batch size");
  Tensor4<Scalar> dx = Tensor4<Scalar>::zeros(dout.b, dout.c, dout.h, dout.w);
  const Eigen::Index stride = static_cast<Eigen::Index>(dout.c) * dout.h * dout.w;
  for (int i = 0; i < dout.b; ++i) {
    const double lambda =
        plan.per_sample_lambda.empty() ? plan.lambda_prime : plan.per_sample_lambda[static_cast<std::size_t>(i)];
    const int j = plan.permutation[static_cast<std::size_t>(i)];
    dx.v.segment(i * stride, stride) += Scalar(lambda) * dout.v.segment(i * stride, stride);
    dx.v.segment(j * stride, stride) += Scalar(1.0 - lambda) * dout.v.segment(i * stride, stride);
  }
  return dx;
}

/// Samples one step's mixing decisions from the dedicated streams. The set
/// may contain PASSTHROUGH; drawing it short-circuits to the identity plan.
inline MixupPlan make_plan(RngPool& pool, const std::vector<LayerId>& kappa_set, double alpha,
                           int batch, int n_labeled, bool concatenate, bool mix_skips,
                           bool per_sample_lambda) {
  MixupPlan plan;
  plan.mix_skips = mix_skips;
  plan.kappa = select_kappa(pool.stream("kappa"), kappa_set);
  if (plan.kappa == LayerId::PASSTHROUGH) {
    plan.lambda_prime = 1.0;
    plan.permutation = identity_permutation(batch);
    return plan;
  }
  Rng& lambda_rng = pool.stream("lambda");
  if (per_sample_lambda) {
    plan.per_sample_lambda.resize(static_cast<std::size_t>(batch));
    for (double& l : plan.per_sample_lambda) l = sample_lambda_prime(lambda_rng, alpha);
    plan.lambda_prime = plan.per_sample_lambda.front();
  } else {
    plan.lambda_prime = sample_lambda_prime(lambda_rng, alpha);
  }
  Rng& perm_rng = pool.stream("permutation");
  plan.permutation = concatenate ? make_permutation(perm_rng, batch)
                                 : make_block_permutation(perm_rng, n_labeled, batch);
  return plan;
}

}  // namespace roam

#endif  // ROAM_MIXUP_HPP
