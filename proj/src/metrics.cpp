#include "roam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "roam/error.hpp"

namespace roam {
namespace {

double directed_max_min(const std::vector<std::pair<int, int>>& a,
                        const std::vector<std::pair<int, int>>& b) {
  double worst = 0.0;
  for (const auto& [ay, ax] : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [by, bx] : b) {
      const double dy = ay - by, dx = ax - bx;
      best = std::min(best, dy * dy + dx * dx);
    }
    worst = std::max(worst, best);
  }
  return std::sqrt(worst);
}

double sum_min_distances(const std::vector<std::pair<int, int>>& a,
                         const std::vector<std::pair<int, int>>& b) {
  double total = 0.0;
  for (const auto& [ay, ax] : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [by, bx] : b) {
      const double dy = ay - by, dx = ax - bx;
      best = std::min(best, dy * dy + dx * dx);
    }
    total += std::sqrt(best);
  }
  return total;
}

void require_same_grid(const Mask& a, const Mask& b) {
  if (a.h != b.h || a.w != b.w) fail(ErrorCode::ShapeMismatch, "mask grids differ");
}

}  // namespace

bool Mask::empty_fg() const {
  return std::find(v.begin(), v.end(), std::uint8_t(1)) == v.end();
}

Mask class_mask(const LabelMap& labels, int bi, int cls) {
  if (bi < 0 || bi >= labels.b) fail(ErrorCode::ShapeMismatch, "sample index outside the batch");
  Mask m(labels.h, labels.w);
  for (int y = 0; y < labels.h; ++y) {
    for (int x = 0; x < labels.w; ++x) {
      m.at(y, x) = labels.at(bi, y, x) == cls ? 1 : 0;
    }
  }
  return m;
}

std::vector<std::pair<int, int>> boundary_points(const Mask& m) {
  std::vector<std::pair<int, int>> pts;
  auto bg = [&](int y, int x) {
    return y < 0 || y >= m.h || x < 0 || x >= m.w || m.at(y, x) == 0;
  };
  for (int y = 0; y < m.h; ++y) {
    for (int x = 0; x < m.w; ++x) {
      if (m.at(y, x) == 0) continue;
      if (bg(y - 1, x) || bg(y + 1, x) || bg(y, x - 1) || bg(y, x + 1)) pts.emplace_back(y, x);
    }
  }
  return pts;
}

DiceScores dice(const LabelMap& pred, const LabelMap& gt, int classes) {
  if (!pred.same_shape(gt)) fail(ErrorCode::ShapeMismatch, "dice: label map shapes differ");
  if (classes < 2) fail(ErrorCode::ConfigInvalid, "dice needs at least two classes");

  std::vector<std::int64_t> n_pred(static_cast<std::size_t>(classes), 0);
  std::vector<std::int64_t> n_gt(static_cast<std::size_t>(classes), 0);
  std::vector<std::int64_t> n_both(static_cast<std::size_t>(classes), 0);
  for (std::size_t i = 0; i < pred.v.size(); ++i) {
    const std::int32_t p = pred.v[i], g = gt.v[i];
    if (p < 0 || p >= classes || g < 0 || g >= classes)
      fail(ErrorCode::OutOfRangeLabel, "dice: label outside [0, classes)");
    ++n_pred[static_cast<std::size_t>(p)];
    ++n_gt[static_cast<std::size_t>(g)];
    if (p == g) ++n_both[static_cast<std::size_t>(p)];
  }

  DiceScores out;
  out.per_class.resize(static_cast<std::size_t>(classes));
  double fg_sum = 0.0;
  for (int c = 0; c < classes; ++c) {
    const std::int64_t denom = n_pred[static_cast<std::size_t>(c)] + n_gt[static_cast<std::size_t>(c)];
    out.per_class[static_cast<std::size_t>(c)] =
        denom == 0 ? 1.0 : 2.0 * static_cast<double>(n_both[static_cast<std::size_t>(c)]) / static_cast<double>(denom);
    if (c >= 1) fg_sum += out.per_class[static_cast<std::size_t>(c)];
  }
  out.mean_foreground = fg_sum / static_cast<double>(classes - 1);
  return out;
}

double hausdorff(const Mask& pred, const Mask& gt) {
  require_same_grid(pred, gt);
  if (pred.empty_fg() || gt.empty_fg()) fail(ErrorCode::EmptyMask, "hausdorff of an empty mask");
  const auto a = boundary_points(pred);
  const auto b = boundary_points(gt);
  return std::max(directed_max_min(a, b), directed_max_min(b, a));
}

double mean_surface_distance(const Mask& pred, const Mask& gt) {
  require_same_grid(pred, gt);
  if (pred.empty_fg() || gt.empty_fg())
    fail(ErrorCode::EmptyMask, "mean surface distance of an empty mask");
  const auto a = boundary_points(pred);
  const auto b = boundary_points(gt);
  return (sum_min_distances(a, b) + sum_min_distances(b, a)) /
         static_cast<double>(a.size() + b.size());
}

double relative_improvement(double score, double baseline) {
  if (baseline <= 0.0) fail(ErrorCode::ConfigInvalid, "relative improvement needs baseline > 0");
  return 100.0 * (score - baseline) / baseline;
}

SummaryStats summarize(std::vector<double> values) {
  SummaryStats s;
  s.n = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(s.n));
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return s;
}

std::string format_stats(const SummaryStats& s) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << s.mean << " (" << s.median << ") +/- " << s.stddev;
  return os.str();
}

std::vector<SampleMetrics> evaluate_batch(const LabelMap& pred, const LabelMap& gt, int classes) {
  if (!pred.same_shape(gt)) fail(ErrorCode::ShapeMismatch, "evaluate_batch: shapes differ");
  std::vector<SampleMetrics> rows;
  rows.reserve(static_cast<std::size_t>(pred.b));
  for (int bi = 0; bi < pred.b; ++bi) {
    LabelMap p1(1, pred.h, pred.w), g1(1, gt.h, gt.w);
    std::copy_n(pred.v.begin() + static_cast<std::ptrdiff_t>(bi) * pred.h * pred.w,
                static_cast<std::ptrdiff_t>(pred.h) * pred.w, p1.v.begin());
    std::copy_n(gt.v.begin() + static_cast<std::ptrdiff_t>(bi) * gt.h * gt.w,
                static_cast<std::ptrdiff_t>(gt.h) * gt.w, g1.v.begin());

    SampleMetrics row;
    const DiceScores d = dice(p1, g1, classes);
    row.dice = d.mean_foreground;
    row.per_class_dice = d.per_class;

    double hd_sum = 0.0, msd_sum = 0.0;
    int valid = 0;
    for (int c = 1; c < classes; ++c) {
      const Mask mp = class_mask(p1, 0, c);
      const Mask mg = class_mask(g1, 0, c);
      if (mp.empty_fg() || mg.empty_fg()) continue;  // undefined pair, excluded
      hd_sum += hausdorff(mp, mg);
      msd_sum += mean_surface_distance(mp, mg);
      ++valid;
    }
    if (valid > 0) {
      row.hd = hd_sum / valid;
      row.msd = msd_sum / valid;
      row.surface_valid = true;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

MetricSummary summarize_metrics(const std::vector<SampleMetrics>& rows, int classes) {
  MetricSummary out;
  std::vector<double> dice_v, hd_v, msd_v;
  std::vector<std::vector<double>> per_class(static_cast<std::size_t>(classes));
  for (const SampleMetrics& r : rows) {
    dice_v.push_back(r.dice);
    if (r.surface_valid) {
      hd_v.push_back(r.hd);
      msd_v.push_back(r.msd);
    }
    for (std::size_t c = 0; c < r.per_class_dice.size() && c < per_class.size(); ++c)
      per_class[c].push_back(r.per_class_dice[c]);
  }
  out.dice = summarize(std::move(dice_v));
  out.hd = summarize(std::move(hd_v));
  out.msd = summarize(std::move(msd_v));
  out.per_class_dice.reserve(per_class.size());
  for (auto& v : per_class) out.per_class_dice.push_back(summarize(std::move(v)));
  return out;
}

std::string format_report(const std::vector<std::string>& names,
                          const std::vector<MetricSummary>& rows) {
  if (names.size() != rows.size())
    fail(ErrorCode::ShapeMismatch, "report needs one name per summary row");
  std::size_t name_w = 5;
  for (const std::string& n : names) name_w = std::max(name_w, n.size());

  std::vector<std::string> dice_col, hd_col, msd_col;
  std::size_t dice_w = 26, hd_w = 7;  // header label widths
  for (const MetricSummary& r : rows) {
    dice_col.push_back(format_stats(r.dice));
    hd_col.push_back(format_stats(r.hd));
    msd_col.push_back(format_stats(r.msd));
    dice_w = std::max(dice_w, dice_col.back().size());
    hd_w = std::max(hd_w, hd_col.back().size());
  }
  const auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(w, s.size()), ' ');
    return s;
  };

  std::ostringstream os;
  os << std::string(name_w, ' ') << "  " << pad("Dice Mean (Median) +/- Std", dice_w) << "  "
     << pad("HD [px]", hd_w) << "  MSD [px]\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << pad(names[i], name_w) << "  " << pad(dice_col[i], dice_w) << "  "
       << pad(hd_col[i], hd_w) << "  " << msd_col[i] << '\n';
  }
  return os.str();
}

std::string metrics_csv(const std::vector<std::string>& names,
                        const std::vector<MetricSummary>& rows) {
  if (names.size() != rows.size())
    fail(ErrorCode::ShapeMismatch, "csv needs one name per summary row");
  std::ostringstream os;
  os << "model,dice_mean,dice_median,dice_std,hd_mean,hd_median,hd_std,"
        "msd_mean,msd_median,msd_std,n\n";
  os.setf(std::ios::fixed);
  os.precision(9);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const MetricSummary& r = rows[i];
    os << names[i] << ',' << r.dice.mean << ',' << r.dice.median << ',' << r.dice.stddev << ','
       << r.hd.mean << ',' << r.hd.median << ',' << r.hd.stddev << ',' << r.msd.mean << ','
       << r.msd.median << ',' << r.msd.stddev << ',' << r.dice.n << '\n';
  }
  return os.str();
}

}  // namespace roam
