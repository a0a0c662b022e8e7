#ifndef ROAM_SYNTHETIC_HPP
#define ROAM_SYNTHETIC_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "roam/config.hpp"
#include "roam/tensor.hpp"
#include "roam/types.hpp"

namespace roam {

/// Domain-shift knobs: intensity gamma, contrast scale around mid-gray, and a
/// multiplicative bias on shape sizes. All-identity values leave generation
/// untouched down to the bit.
struct ShiftSpec {
  double gamma = 1.0;
  double contrast = 1.0;
  double size_bias = 0.0;

  bool is_identity() const { return gamma == 1.0 && contrast == 1.0 && size_bias == 0.0; }
};

struct SyntheticTaskSpec {
  int h = 64, w = 64;
  int classes = 4;  // background + shape classes
  int min_shapes = 1, max_shapes = 3;
  double noise_sigma = 0.05;
  ShiftSpec shift;
};

/// In-memory dataset: one grayscale image and one label map per sample.
/// An empty label vector marks the sample as unlabeled.
struct Dataset {
  int h = 0, w = 0, classes = 0;
  std::vector<std::vector<float>> images;        // H*W each, row-major, in [0,1]
  std::vector<std::vector<std::int32_t>> labels;  // H*W each, or empty

  std::size_t size() const { return images.size(); }
  bool labeled(std::size_t i) const { return !labels[i].empty(); }
};

/// Deterministic shape-segmentation task generator. Pure in (spec, n, seed).
Dataset generate(const SyntheticTaskSpec& spec, int n, std::uint64_t seed);

SyntheticTaskSpec spec_from_config(const DataConfig& data);

/// Gathers samples by index into batch tensors.
ImageBatch<float> gather_images(const Dataset& ds, const std::vector<int>& idx);
LabelMap gather_labels(const Dataset& ds, const std::vector<int>& idx);

}  // namespace roam

#endif  // ROAM_SYNTHETIC_HPP
