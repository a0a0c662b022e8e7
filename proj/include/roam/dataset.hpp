#ifndef ROAM_DATASET_HPP
#define ROAM_DATASET_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "roam/config.hpp"
#include "roam/synthetic.hpp"

namespace roam {

/// The four disjoint subsets of one experiment. `unlabeled` has its labels
/// discarded; `unlabeled_with_labels` holds the same samples with labels
/// kept, for upper-bound protocols that reveal them.
struct SplitResult {
  Dataset labeled;
  Dataset unlabeled;
  Dataset validation;
  Dataset test;
  Dataset unlabeled_with_labels;
};

/// Shuffles indices with `seed` and deals out the requested counts in order
/// labeled, unlabeled, validation, test. Counts must not exceed the dataset.
SplitResult split_by_counts(const Dataset& ds, int n_labeled, int n_unlabeled, int n_val,
                            int n_test, std::uint64_t seed);

/// Fraction form: counts are derived from fractions of the dataset size
/// (largest-remainder rounding, so the union is the whole set).
SplitResult split(const Dataset& ds, const std::array<double, 4>& fractions, std::uint64_t seed);

/// Builds the experiment splits from a DataConfig: kind "shapes" generates
/// synthetically, kind "external" loads `dir` via load_external.
SplitResult make_splits(const DataConfig& data);

/// Writes 16-bit PGMs plus a manifest ("classes=C" header, then
/// "image<TAB>label" lines; "-" marks an unlabeled sample).
void save_dataset(const Dataset& ds, const std::string& dir);

/// Loads a saved dataset; image intensities are min-max normalized to [0,1]
/// per image (a constant image maps to all zeros).
Dataset load_external(const std::string& dir);

/// 16-bit big-endian PGM (P5, maxval 65535).
void write_pgm16(const std::string& path, int h, int w, const std::vector<std::uint16_t>& px);
std::vector<std::uint16_t> read_pgm16(const std::string& path, int& h, int& w);

}  // namespace roam

#endif  // ROAM_DATASET_HPP
