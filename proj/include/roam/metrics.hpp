#ifndef ROAM_METRICS_HPP
#define ROAM_METRICS_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "roam/tensor.hpp"

namespace roam {

/// Binary foreground mask over one image.
struct Mask {
  int h = 0, w = 0;
  std::vector<std::uint8_t> v;  // 0 background, 1 foreground

  Mask() = default;
  Mask(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0) {}
  std::uint8_t at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
  std::uint8_t& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  bool empty_fg() const;
};

/// Pixels of class `cls` in sample `bi`.
Mask class_mask(const LabelMap& labels, int bi, int cls);

/// Foreground pixels with a 4-neighbor outside the foreground; pixels past
/// the image border count as background.
std::vector<std::pair<int, int>> boundary_points(const Mask& m);

struct DiceScores {
  std::vector<double> per_class;  // index = class id
  double mean_foreground = 0.0;   // mean over classes 1..C-1
};

/// Overlap scores across every pixel of the two maps. A class absent from
/// both maps scores 1.
DiceScores dice(const LabelMap& pred, const LabelMap& gt, int classes);

/// Max of the two directed max-min boundary distances (Euclidean pixels).
double hausdorff(const Mask& pred, const Mask& gt);

/// Symmetric mean of boundary-to-nearest-boundary distances.
double mean_surface_distance(const Mask& pred, const Mask& gt);

/// 100 * (score - baseline) / baseline. Baseline must be positive.
double relative_improvement(double score, double baseline);

// ---------------------------------------------------------------------------
// Aggregation

struct SummaryStats {
  double mean = 0.0, median = 0.0, stddev = 0.0;
  int n = 0;
};

SummaryStats summarize(std::vector<double> values);

/// "0.870 (0.873) ± 0.023"
std::string format_stats(const SummaryStats& s);

/// Per-sample scores of one prediction batch against ground truth. hd/msd
/// average the per-class surface distances over classes whose masks are
/// non-empty in both maps; samples with no such class are excluded
/// (`surface_valid` false).
struct SampleMetrics {
  double dice = 0.0;  // mean foreground Dice
  std::vector<double> per_class_dice;
  double hd = 0.0;
  double msd = 0.0;
  bool surface_valid = false;
};

std::vector<SampleMetrics> evaluate_batch(const LabelMap& pred, const LabelMap& gt, int classes);

struct MetricSummary {
  SummaryStats dice, hd, msd;
  std::vector<SummaryStats> per_class_dice;  // index = class id (0 unused)
};

MetricSummary summarize_metrics(const std::vector<SampleMetrics>& rows, int classes);

/// Human table, one row per named model: "Mean (Median) ± Std" per metric.
std::string format_report(const std::vector<std::string>& names,
                          const std::vector<MetricSummary>& rows);

/// Machine form. Header:
/// model,dice_mean,dice_median,dice_std,hd_mean,hd_median,hd_std,msd_mean,msd_median,msd_std,n
std::string metrics_csv(const std::vector<std::string>& names,
                        const std::vector<MetricSummary>& rows);

}  // namespace roam

#endif  // ROAM_METRICS_HPP
