#ifndef ROAM_OPS_HPP
#define ROAM_OPS_HPP

#include <cmath>

#include "roam/tensor.hpp"

namespace roam {

/// Per-pixel softmax over the channel axis, max-shifted for stability.
template <typename Scalar>
Tensor4<Scalar> softmax_channels(const Tensor4<Scalar>& logits) {
  Tensor4<Scalar> out(logits.b, logits.c, logits.h, logits.w);
  const int hw = logits.h * logits.w;
  for (int bi = 0; bi < logits.b; ++bi) {
    auto in_s = logits.sample(bi);   // (C, H*W)
    auto out_s = out.sample(bi);
    for (int px = 0; px < hw; ++px) {
      const Scalar m = in_s.col(px).maxCoeff();
      out_s.col(px) = (in_s.col(px).array() - m).exp();
      out_s.col(px) /= out_s.col(px).sum();
    }
  }
  return out;
}

/// Per-pixel log-softmax over the channel axis.
template <typename Scalar>
Tensor4<Scalar> log_softmax_channels(const Tensor4<Scalar>& logits) {
  Tensor4<Scalar> out(logits.b, logits.c, logits.h, logits.w);
  const int hw = logits.h * logits.w;
  for (int bi = 0; bi < logits.b; ++bi) {
    auto in_s = logits.sample(bi);
    auto out_s = out.sample(bi);
    for (int px = 0; px < hw; ++px) {
      const Scalar m = in_s.col(px).maxCoeff();
      const Scalar log_sum = std::log((in_s.col(px).array() - m).exp().sum());
      out_s.col(px) = in_s.col(px).array() - m - log_sum;
    }
  }
  return out;
}

}  // namespace roam

#endif  // ROAM_OPS_HPP
