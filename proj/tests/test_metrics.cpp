#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "roam/metrics.hpp"
#include "roam/rng.hpp"
#include "test_util.hpp"

using namespace roam;

namespace {

LabelMap single_map(int h, int w, const std::vector<std::int32_t>& v) {
  LabelMap m(1, h, w);
  m.v = v;
  return m;
}

Mask mask_from_bits(std::uint32_t bits, int h, int w) {
  Mask m(h, w);
  for (int i = 0; i < h * w; ++i) m.v[static_cast<std::size_t>(i)] = (bits >> i) & 1u;
  return m;
}

// Independent small-mask oracle: with <= 3 foreground pixels no pixel has
// four foreground neighbors, so every foreground pixel is boundary and the
// distances reduce to pairwise point-set computations.
std::vector<std::pair<int, int>> fg_points(std::uint32_t bits, int w) {
  std::vector<std::pair<int, int>> pts;
  for (int i = 0; i < 16; ++i)
    if ((bits >> i) & 1u) pts.emplace_back(i / w, i % w);
  return pts;
}

double oracle_min_sq(const std::pair<int, int>& p, const std::vector<std::pair<int, int>>& q) {
  double best = 1e300;
  for (const auto& [y, x] : q) {
    const double dy = p.first - y, dx = p.second - x;
    best = std::min(best, dy * dy + dx * dx);
  }
  return best;
}

Mask random_mask(Rng& rng, int h, int w, double density) {
  Mask m(h, w);
  for (auto& v : m.v) v = rng.uniform() < density ? 1 : 0;
  return m;
}

Mask translate(const Mask& m, int dy, int dx) {
  Mask out(m.h, m.w);
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x)
      if (m.at(y, x)) out.at(y + dy, x + dx) = 1;
  return out;
}

}  // namespace

TEST_CASE("dice on identical maps is 1 for every class") {
  const LabelMap m = single_map(2, 3, {0, 1, 2, 2, 1, 0});
  const DiceScores d = dice(m, m, 3);
  for (double v : d.per_class) CHECK(v == 1.0);
  CHECK(d.mean_foreground == 1.0);
}

TEST_CASE("dice on disjoint foregrounds is 0") {
  const LabelMap a = single_map(1, 4, {1, 1, 0, 0});
  const LabelMap b = single_map(1, 4, {0, 0, 1, 1});
  const DiceScores d = dice(a, b, 2);
  CHECK(d.per_class[1] == 0.0);
  CHECK(d.mean_foreground == 0.0);
}

TEST_CASE("dice half-covered hand count") {
  // gt object: 4 pixels in row 0. pred: 2 matched + 2 false positives.
  const LabelMap gt = single_map(2, 4, {1, 1, 1, 1, 0, 0, 0, 0});
  const LabelMap pred = single_map(2, 4, {1, 1, 0, 0, 1, 1, 0, 0});
  const DiceScores d = dice(pred, gt, 2);
  CHECK(d.per_class[1] == 0.5);  // 2*2 / (4+4)
}

TEST_CASE("dice counts a class absent from both maps as 1") {
  const LabelMap a = single_map(1, 4, {0, 1, 1, 0});
  const LabelMap b = single_map(1, 4, {0, 1, 0, 0});
  const DiceScores d = dice(a, b, 4);
  CHECK(d.per_class[2] == 1.0);
  CHECK(d.per_class[3] == 1.0);
  CHECK(d.mean_foreground == testutil::approx_abs((2.0 / 3.0 + 1.0 + 1.0) / 3.0, 1e-15));
}

TEST_CASE("dice is symmetric and bounded") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    LabelMap a(1, 6, 6), b(1, 6, 6);
    for (auto& v : a.v) v = static_cast<std::int32_t>(rng.bounded(4));
    for (auto& v : b.v) v = static_cast<std::int32_t>(rng.bounded(4));
    const DiceScores ab = dice(a, b, 4);
    const DiceScores ba = dice(b, a, 4);
    for (int c = 0; c < 4; ++c) {
      CHECK(ab.per_class[static_cast<std::size_t>(c)] == ba.per_class[static_cast<std::size_t>(c)]);
      CHECK(ab.per_class[static_cast<std::size_t>(c)] >= 0.0);
      CHECK(ab.per_class[static_cast<std::size_t>(c)] <= 1.0);
    }
  }
}

TEST_CASE("dice rejects shape and label violations") {
  const LabelMap a = single_map(1, 4, {0, 1, 1, 0});
  CHECK_FAILS_WITH(ErrorCode::ShapeMismatch, dice(a, LabelMap(1, 2, 2), 2));
  const LabelMap bad = single_map(1, 4, {0, 5, 0, 0});
  CHECK_FAILS_WITH(ErrorCode::OutOfRangeLabel, dice(a, bad, 2));
}

TEST_CASE("boundary is 4-adjacency with out-of-bounds as background") {
  Mask m(5, 5);
  for (int y = 1; y <= 3; ++y)
    for (int x = 1; x <= 3; ++x) m.at(y, x) = 1;
  const auto pts = boundary_points(m);
  CHECK(pts.size() == 8);  // ring around the solid 3x3 block; center interior
  CHECK(std::find(pts.begin(), pts.end(), std::make_pair(2, 2)) == pts.end());

  Mask full(2, 2);
  std::fill(full.v.begin(), full.v.end(), std::uint8_t(1));
  CHECK(boundary_points(full).size() == 4);  // image border counts as background
}

TEST_CASE("hausdorff known values") {
  Mask a(5, 5), b(5, 5);
  a.at(0, 0) = 1;
  b.at(3, 4) = 1;
  CHECK(hausdorff(a, b) == 5.0);
  CHECK(hausdorff(a, a) == 0.0);

  Mask sq(6, 6);
  for (int y = 1; y <= 3; ++y)
    for (int x = 1; x <= 3; ++x) sq.at(y, x) = 1;
  const Mask shifted = translate(sq, 0, 1);
  CHECK(hausdorff(sq, shifted) == 1.0);
  CHECK(mean_surface_distance(sq, sq) == 0.0);
}

TEST_CASE("mean surface distance of two distant pixels") {
  Mask a(5, 5), b(5, 5);
  a.at(0, 0) = 1;
  b.at(3, 4) = 1;
  CHECK(mean_surface_distance(a, b) == 5.0);
}

TEST_CASE("empty masks are rejected") {
  Mask a(4, 4), b(4, 4);
  b.at(1, 1) = 1;
  CHECK_FAILS_WITH(ErrorCode::EmptyMask, hausdorff(a, b));
  CHECK_FAILS_WITH(ErrorCode::EmptyMask, hausdorff(b, a));
  CHECK_FAILS_WITH(ErrorCode::EmptyMask, mean_surface_distance(a, b));
  CHECK_FAILS_WITH(ErrorCode::ShapeMismatch, hausdorff(b, Mask(3, 3)));
}

TEST_CASE("hd >= msd >= 0 and translation invariance") {
  Rng rng(9);
  for (int trial = 0; trial < 40; ++trial) {
    Mask a = random_mask(rng, 6, 6, 0.3);
    Mask b = random_mask(rng, 6, 6, 0.3);
    if (a.empty_fg() || b.empty_fg()) continue;
    const double hd = hausdorff(a, b);
    const double msd = mean_surface_distance(a, b);
    CHECK(hd >= msd);
    CHECK(msd >= 0.0);

    Mask a2(10, 10), b2(10, 10);
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) {
        a2.at(y + 2, x + 3) = a.at(y, x);
        b2.at(y + 2, x + 3) = b.at(y, x);
      }
    Mask a1(10, 10), b1(10, 10);
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) {
        a1.at(y, x) = a.at(y, x);
        b1.at(y, x) = b.at(y, x);
      }
    CHECK(hausdorff(a2, b2) == hausdorff(a1, b1));
    CHECK(mean_surface_distance(a2, b2) == mean_surface_distance(a1, b1));
  }
}

TEST_CASE("exhaustive 4x4 masks up to 3 foreground pixels match brute force") {
  std::vector<std::uint32_t> masks;
  for (std::uint32_t bits = 0; bits < (1u << 16); ++bits)
    if (std::popcount(bits) <= 3) masks.push_back(bits);
  REQUIRE(masks.size() == 697);  // C(16,0)+C(16,1)+C(16,2)+C(16,3)

  LabelMap pm(1, 4, 4), gm(1, 4, 4);
  long long surface_pairs = 0;
  for (std::uint32_t a : masks) {
    const auto pa = fg_points(a, 4);
    for (std::uint32_t b : masks) {
      // Dice against bit counting.
      for (int i = 0; i < 16; ++i) {
        pm.v[static_cast<std::size_t>(i)] = (a >> i) & 1u;
        gm.v[static_cast<std::size_t>(i)] = (b >> i) & 1u;
      }
      const int denom = std::popcount(a) + std::popcount(b);
      const double want_dice =
          denom == 0 ? 1.0 : 2.0 * std::popcount(a & b) / static_cast<double>(denom);
      CHECK(dice(pm, gm, 2).per_class[1] == want_dice);

      if (a == 0 || b == 0) continue;
      const auto pb = fg_points(b, 4);
      // All foreground pixels are boundary here, so plain point-set
      // distances are an independent oracle.
      double worst_ab = 0.0, worst_ba = 0.0, sum_ab = 0.0, sum_ba = 0.0;
      for (const auto& p : pa) {
        const double d2 = oracle_min_sq(p, pb);
        worst_ab = std::max(worst_ab, d2);
        sum_ab += std::sqrt(d2);
      }
      for (const auto& p : pb) {
        const double d2 = oracle_min_sq(p, pa);
        worst_ba = std::max(worst_ba, d2);
        sum_ba += std::sqrt(d2);
      }
      const Mask ma = mask_from_bits(a, 4, 4);
      const Mask mb = mask_from_bits(b, 4, 4);
      const double want_hd = std::sqrt(std::max(worst_ab, worst_ba));
      const double want_msd = (sum_ab + sum_ba) / static_cast<double>(pa.size() + pb.size());
      if (hausdorff(ma, mb) != want_hd) {
        REQUIRE_MESSAGE(false, "hausdorff mismatch at masks " << a << "," << b);
      }
      if (mean_surface_distance(ma, mb) != want_msd) {
        REQUIRE_MESSAGE(false, "msd mismatch at masks " << a << "," << b);
      }
      ++surface_pairs;
    }
  }
  CHECK(surface_pairs == 696LL * 696LL);
}

TEST_CASE("relative improvement reference points") {
  CHECK(relative_improvement(0.747, 0.747) == 0.0);
  CHECK(relative_improvement(0.870, 0.747) == testutil::approx_abs(16.47, 0.005));
  CHECK(relative_improvement(0.823, 0.747) == testutil::approx_abs(10.17, 0.005));
  CHECK_FAILS_WITH(ErrorCode::ConfigInvalid, relative_improvement(0.5, 0.0));
  CHECK_FAILS_WITH(ErrorCode::ConfigInvalid, relative_improvement(0.5, -1.0));
}

TEST_CASE("summary statistics") {
  const SummaryStats s = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == 2.5);
  CHECK(s.median == 2.5);
  CHECK(s.stddev == testutil::approx_abs(std::sqrt(1.25), 1e-12));
  CHECK(s.n == 4);

  const SummaryStats odd = summarize({5.0, 1.0, 3.0});
  CHECK(odd.median == 3.0);
  CHECK(summarize({}).n == 0);

  SummaryStats fmt;
  fmt.mean = 0.8701;
  fmt.median = 0.8734;
  fmt.stddev = 0.0226;
  CHECK(format_stats(fmt) == "0.870 (0.873) +/- 0.023");
}

TEST_CASE("evaluate_batch scores per sample and flags undefined surfaces") {
  LabelMap gt(2, 3, 3), pred(2, 3, 3);
  // Sample 0: exact agreement on a one-pixel class-1 object.
  gt.at(0, 1, 1) = 1;
  pred.at(0, 1, 1) = 1;
  // Sample 1: both all background; class 1 absent from both.
  const auto rows = evaluate_batch(pred, gt, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].dice == 1.0);
  CHECK(rows[0].surface_valid);
  CHECK(rows[0].hd == 0.0);
  CHECK(rows[0].msd == 0.0);
  CHECK(rows[1].dice == 1.0);       // absent in both counts as full agreement
  CHECK_FALSE(rows[1].surface_valid);

  const MetricSummary ms = summarize_metrics(rows, 2);
  CHECK(ms.dice.n == 2);
  CHECK(ms.hd.n == 1);  // undefined sample excluded from surface aggregation
  CHECK(ms.msd.n == 1);
}

TEST_CASE("report and csv formats") {
  LabelMap gt(1, 3, 3), pred(1, 3, 3);
  gt.at(0, 1, 1) = 1;
  pred.at(0, 1, 1) = 1;
  const MetricSummary ms = summarize_metrics(evaluate_batch(pred, gt, 2), 2);

  const std::string report = format_report({"lower_bound", "ssl"}, {ms, ms});
  CHECK(report.find("lower_bound") != std::string::npos);
  CHECK(report.find("ssl") != std::string::npos);
  CHECK(report.find("+/-") != std::string::npos);

  const std::string csv = metrics_csv({"ssl"}, {ms});
  CHECK(csv.rfind("model,dice_mean,dice_median,dice_std,hd_mean,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK_FAILS_WITH(ErrorCode::ShapeMismatch, metrics_csv({"a", "b"}, {ms}));
}
