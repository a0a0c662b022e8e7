#ifndef ROAM_TENSOR_HPP
#define ROAM_TENSOR_HPP

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "roam/error.hpp"

namespace roam {

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using PlaneMap = Eigen::Map<ArrayX<Scalar>>;

template <typename Scalar>
using ConstPlaneMap = Eigen::Map<const ArrayX<Scalar>>;

/// Row-major matrix view: rows are channels, columns are pixels.
template <typename Scalar>
using ChannelMatrixMap =
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename Scalar>
using ConstChannelMatrixMap =
    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// Dense (B, C, H, W) tensor, W fastest. The one value container shared by
/// images, activations, and label maps.
template <typename Scalar>
struct Tensor4 {
  int b = 0, c = 0, h = 0, w = 0;
  ArrayX<Scalar> v;

  Tensor4() = default;
  Tensor4(int b_, int c_, int h_, int w_) : b(b_), c(c_), h(h_), w(w_) {
    v = ArrayX<Scalar>::Zero(static_cast<Eigen::Index>(b_) * c_ * h_ * w_);
  }

  static Tensor4 zeros(int b_, int c_, int h_, int w_) { return Tensor4(b_, c_, h_, w_); }

  Eigen::Index size() const { return v.size(); }
  int plane_size() const { return h * w; }
  bool same_shape(const Tensor4& o) const { return b == o.b && c == o.c && h == o.h && w == o.w; }

  Scalar& at(int bi, int ci, int hi, int wi) {
    return v[((static_cast<Eigen::Index>(bi) * c + ci) * h + hi) * w + wi];
  }
  Scalar at(int bi, int ci, int hi, int wi) const {
    return v[((static_cast<Eigen::Index>(bi) * c + ci) * h + hi) * w + wi];
  }

  /// One (H*W) channel plane, contiguous.
  PlaneMap<Scalar> plane(int bi, int ci) {
    return PlaneMap<Scalar>(v.data() + (static_cast<Eigen::Index>(bi) * c + ci) * plane_size(),
                            plane_size());
  }
  ConstPlaneMap<Scalar> plane(int bi, int ci) const {
    return ConstPlaneMap<Scalar>(
        v.data() + (static_cast<Eigen::Index>(bi) * c + ci) * plane_size(), plane_size());
  }

  /// One sample as a (C, H*W) matrix.
  ChannelMatrixMap<Scalar> sample(int bi) {
    return ChannelMatrixMap<Scalar>(v.data() + static_cast<Eigen::Index>(bi) * c * plane_size(),
                                    c, plane_size());
  }
  ConstChannelMatrixMap<Scalar> sample(int bi) const {
    return ConstChannelMatrixMap<Scalar>(
        v.data() + static_cast<Eigen::Index>(bi) * c * plane_size(), c, plane_size());
  }

  template <typename Other>
  Tensor4<Other> cast() const {
    Tensor4<Other> out(b, c, h, w);
    out.v = v.template cast<Other>();
    return out;
  }
};

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

/// Integer class-index map of shape (B, H, W).
struct LabelMap {
  int b = 0, h = 0, w = 0;
  std::vector<std::int32_t> v;

  LabelMap() = default;
  LabelMap(int b_, int h_, int w_) : b(b_), h(h_), w(w_), v(static_cast<std::size_t>(b_) * h_ * w_, 0) {}

  std::int32_t& at(int bi, int hi, int wi) {
    return v[(static_cast<std::size_t>(bi) * h + hi) * w + wi];
  }
  std::int32_t at(int bi, int hi, int wi) const {
    return v[(static_cast<std::size_t>(bi) * h + hi) * w + wi];
  }
  bool same_shape(const LabelMap& o) const { return b == o.b && h == o.h && w == o.w; }
};

template <typename Scalar>
void require_same_shape(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b, const char* where) {
  if (!a.same_shape(b)) fail(ErrorCode::ShapeMismatch, std::string(where) + ": tensor shapes differ");
}

}  // namespace roam

#endif  // ROAM_TENSOR_HPP
