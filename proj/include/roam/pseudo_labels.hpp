#ifndef ROAM_PSEUDO_LABELS_HPP
#define ROAM_PSEUDO_LABELS_HPP

#include <cmath>
#include <utility>

#include "roam/error.hpp"
#include "roam/ops.hpp"
#include "roam/types.hpp"

namespace roam {

/// Temperature sharpening: p_c -> p_c^(1/T) / sum_k p_k^(1/T), per pixel.
/// T in (0, 1) concentrates mass on the argmax; T = 1 is the identity.
/// Computed in double with the pixel maximum factored out, so large 1/T
/// exponents cannot overflow. A pixel whose channels are all zero has no
/// defined sharpened distribution and is rejected.
template <typename Scalar>
SoftLabelBatch<Scalar> sharpen(const SoftLabelBatch<Scalar>& labels, double T) {
  if (!(T > 0.0)) fail(ErrorCode::ConfigInvalid, "temperature must be positive");
  const Tensor4<Scalar>& in = labels.data;
  Tensor4<Scalar> out(in.b, in.c, in.h, in.w);
  const double inv_T = 1.0 / T;
  constexpr double kFloor = 1e-12;
  std::vector<double> q(static_cast<std::size_t>(in.c));
  for (int bi = 0; bi < in.b; ++bi) {
    for (int hi = 0; hi < in.h; ++hi) {
      for (int wi = 0; wi < in.w; ++wi) {
        double p_max = 0.0;
        for (int ci = 0; ci < in.c; ++ci)
          p_max = std::max(p_max, static_cast<double>(in.at(bi, ci, hi, wi)));
        if (p_max <= 0.0)
          fail(ErrorCode::DegeneratePixel,
               "all-zero pixel at (" + std::to_string(bi) + ", " + std::to_string(hi) + ", " +
                   std::to_string(wi) + ")");
        double sum = 0.0;
        for (int ci = 0; ci < in.c; ++ci) {
          const double p = std::max(static_cast<double>(in.at(bi, ci, hi, wi)), kFloor);
          q[static_cast<std::size_t>(ci)] = std::pow(p / p_max, inv_T);
          sum += q[static_cast<std::size_t>(ci)];
        }
        for (int ci = 0; ci < in.c; ++ci)
          out.at(bi, ci, hi, wi) = static_cast<Scalar>(q[static_cast<std::size_t>(ci)] / sum);
      }
    }
  }
  return SoftLabelBatch<Scalar>(std::move(out), labels.num_classes);
}

/// Pseudo-label guess: the model's predictive distribution on unlabeled
/// images. `forward_proba` must run in eval mode and return per-pixel
/// probabilities; the result is a training target, never differentiated
/// through.
template <typename Scalar, typename ForwardProba>
SoftLabelBatch<Scalar> guess_labels(ForwardProba&& forward_proba, const ImageBatch<Scalar>& images) {
  Tensor4<Scalar> proba = std::forward<ForwardProba>(forward_proba)(images.data);
  const int classes = proba.c;
  return SoftLabelBatch<Scalar>(std::move(proba), classes);
}

}  // namespace roam

#endif  // ROAM_PSEUDO_LABELS_HPP
