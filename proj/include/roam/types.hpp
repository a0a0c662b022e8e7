#ifndef ROAM_TYPES_HPP
#define ROAM_TYPES_HPP

#include <array>
#include <cstdlib>
#include <string>
#include <vector>

#include "roam/error.hpp"
#include "roam/tensor.hpp"

namespace roam {

// ---------------------------------------------------------------------------
// Layer identifiers

/// Injection points of the segmentation net, in forward order, plus the
/// PASSTHROUGH sentinel (no-mix step: the batch flows through untouched).
enum class LayerId : int {
  INPUT = 0,
  ENC1 = 1,
  ENC2 = 2,
  BOTTLENECK = 3,
  DEC1 = 4,
  DEC2 = 5,
  LAST = 6,
  PASSTHROUGH = 7,
};

inline constexpr std::array<LayerId, 7> kInjectionPoints = {
    LayerId::INPUT,      LayerId::ENC1, LayerId::ENC2, LayerId::BOTTLENECK,
    LayerId::DEC1,       LayerId::DEC2, LayerId::LAST};

inline const char* to_string(LayerId id) {
  switch (id) {
    case LayerId::INPUT: return "INPUT";
    case LayerId::ENC1: return "ENC1";
    case LayerId::ENC2: return "ENC2";
    case LayerId::BOTTLENECK: return "BOTTLENECK";
    case LayerId::DEC1: return "DEC1";
    case LayerId::DEC2: return "DEC2";
    case LayerId::LAST: return "LAST";
    case LayerId::PASSTHROUGH: return "PASSTHROUGH";
  }
  return "?";
}

inline LayerId layer_id_from_string(const std::string& s) {
  for (LayerId id : kInjectionPoints) {
    if (s == to_string(id)) return id;
  }
  if (s == "PASSTHROUGH") return LayerId::PASSTHROUGH;
  fail(ErrorCode::UnknownLayer, "no layer named '" + s + "'");
}

// ---------------------------------------------------------------------------
// Batches

/// Batch of single-channel images, intensities in [0, 1].
template <typename Scalar>
struct ImageBatch {
  Tensor4<Scalar> data;  // (B, 1, H, W)

  ImageBatch() = default;
  explicit ImageBatch(Tensor4<Scalar> t) : data(std::move(t)) {}
  int batch() const { return data.b; }
  int height() const { return data.h; }
  int width() const { return data.w; }
};

/// Per-pixel class probabilities. One-hot for ground truth, soft for
/// pseudo and mixed labels.
template <typename Scalar>
struct SoftLabelBatch {
  Tensor4<Scalar> data;  // (B, C, H, W)
  int num_classes = 0;

  SoftLabelBatch() = default;
  SoftLabelBatch(Tensor4<Scalar> t, int classes) : data(std::move(t)), num_classes(classes) {}
  int batch() const { return data.b; }
};

using ImageBatchF = ImageBatch<float>;
using SoftLabelBatchF = SoftLabelBatch<float>;

/// One training step's sampled mixing decisions.
struct MixupPlan {
  LayerId kappa = LayerId::PASSTHROUGH;
  double lambda_prime = 1.0;            // in [0.5, 1]
  std::vector<int> permutation;         // bijection on the concatenated batch
  bool mix_skips = false;
  std::vector<double> per_sample_lambda;  // optional extension; empty = one lambda per batch

  bool is_passthrough() const { return kappa == LayerId::PASSTHROUGH; }
};

inline std::vector<int> identity_permutation(int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  return p;
}

inline bool is_permutation_of_range(const std::vector<int>& p) {
  std::vector<char> seen(p.size(), 0);
  for (int x : p) {
    if (x < 0 || static_cast<std::size_t>(x) >= p.size() || seen[static_cast<std::size_t>(x)]) return false;
    seen[static_cast<std::size_t>(x)] = 1;
  }
  return true;
}

/// Checks the plan's structural invariants; throws on violation.
inline void validate_plan(const MixupPlan& plan) {
  if (plan.lambda_prime < 0.5 || plan.lambda_prime > 1.0)
    fail(ErrorCode::ConfigInvalid, "lambda_prime outside [0.5, 1]");
  if (!is_permutation_of_range(plan.permutation))
    fail(ErrorCode::ConfigInvalid, "plan permutation is not a bijection");
  if (plan.is_passthrough()) {
    if (plan.lambda_prime != 1.0)
      fail(ErrorCode::ConfigInvalid, "PASSTHROUGH requires lambda_prime = 1");
    for (std::size_t i = 0; i < plan.permutation.size(); ++i)
      if (plan.permutation[i] != static_cast<int>(i))
        fail(ErrorCode::ConfigInvalid, "PASSTHROUGH requires the identity permutation");
  }
  for (double l : plan.per_sample_lambda)
    if (l < 0.5 || l > 1.0) fail(ErrorCode::ConfigInvalid, "per-sample lambda outside [0.5, 1]");
}

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
  bool passed = true;
  int pixel_b = -1, pixel_h = -1, pixel_w = -1;  // first offending pixel
  std::string reason;
};

inline constexpr double kProbabilitySumTolerance = 1e-5;

/// Every value in [0,1] and every pixel's channel sum equals 1 (tol 1e-5).
template <typename Scalar>
ValidationReport validate_soft_labels(const SoftLabelBatch<Scalar>& labels) {
  const Tensor4<Scalar>& t = labels.data;
  if (t.b <= 0 || t.c <= 0 || t.h <= 0 || t.w <= 0)
    fail(ErrorCode::ShapeMismatch, "soft labels must be a rank-4 (B, C, H, W) tensor");
  if (labels.num_classes != t.c)
    fail(ErrorCode::ShapeMismatch, "num_classes disagrees with channel count");

  ValidationReport report;
  for (int bi = 0; bi < t.b; ++bi) {
    for (int hi = 0; hi < t.h; ++hi) {
      for (int wi = 0; wi < t.w; ++wi) {
        double sum = 0.0;
        bool in_range = true;
        for (int ci = 0; ci < t.c; ++ci) {
          const double p = static_cast<double>(t.at(bi, ci, hi, wi));
          if (p < 0.0 || p > 1.0) in_range = false;
          sum += p;
        }
        if (!in_range || std::abs(sum - 1.0) > kProbabilitySumTolerance) {
          report.passed = false;
          report.pixel_b = bi;
          report.pixel_h = hi;
          report.pixel_w = wi;
          report.reason = in_range ? "channel sum differs from 1" : "value outside [0, 1]";
          return report;
        }
      }
    }
  }
  return report;
}

/// Image invariants: values in [0,1]; H, W >= 16 and divisible by
/// 2^downsample_stages.
template <typename Scalar>
ValidationReport validate_image_batch(const ImageBatch<Scalar>& images, int downsample_stages = 2) {
  const Tensor4<Scalar>& t = images.data;
  ValidationReport report;
  if (t.c != 1) fail(ErrorCode::ShapeMismatch, "image batch must have a single channel");
  const int divisor = 1 << downsample_stages;
  if (t.b < 1 || t.h < 16 || t.w < 16 || t.h % divisor != 0 || t.w % divisor != 0) {
    report.passed = false;
    report.reason = "bad batch geometry";
    return report;
  }
  for (int bi = 0; bi < t.b && report.passed; ++bi) {
    const auto p = t.plane(bi, 0);
    if ((p < Scalar(0)).any() || (p > Scalar(1)).any()) {
      report.passed = false;
      report.pixel_b = bi;
      report.reason = "intensity outside [0, 1]";
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Label encoding

/// (B, H, W) class indices -> one-hot (B, C, H, W).
template <typename Scalar = float>
SoftLabelBatch<Scalar> one_hot_encode(const LabelMap& labels, int num_classes) {
  Tensor4<Scalar> out(labels.b, num_classes, labels.h, labels.w);
  for (int bi = 0; bi < labels.b; ++bi) {
    for (int hi = 0; hi < labels.h; ++hi) {
      for (int wi = 0; wi < labels.w; ++wi) {
        const std::int32_t cls = labels.at(bi, hi, wi);
        if (cls < 0 || cls >= num_classes)
          fail(ErrorCode::OutOfRangeLabel,
               "label " + std::to_string(cls) + " outside [0, " + std::to_string(num_classes) + ")");
        out.at(bi, cls, hi, wi) = Scalar(1);
      }
    }
  }
  return SoftLabelBatch<Scalar>(std::move(out), num_classes);
}

/// Per-pixel argmax over channels; ties resolve to the lowest class index.
template <typename Scalar>
LabelMap argmax_labels(const SoftLabelBatch<Scalar>& labels) {
  const Tensor4<Scalar>& t = labels.data;
  LabelMap out(t.b, t.h, t.w);
  for (int bi = 0; bi < t.b; ++bi) {
    for (int hi = 0; hi < t.h; ++hi) {
      for (int wi = 0; wi < t.w; ++wi) {
        Scalar best = t.at(bi, 0, hi, wi);
        int arg = 0;
        for (int ci = 1; ci < t.c; ++ci) {
          const Scalar p = t.at(bi, ci, hi, wi);
          if (p > best) {
            best = p;
            arg = ci;
          }
        }
        out.at(bi, hi, wi) = arg;
      }
    }
  }
  return out;
}

}  // namespace roam

#endif  // ROAM_TYPES_HPP
