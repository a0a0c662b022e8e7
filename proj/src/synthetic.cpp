#include "roam/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "roam/rng.hpp"

namespace roam {
namespace {

struct Shape {
  int kind = 0;  // 0 disk, 1 rectangle, 2 ring
  double cx = 0, cy = 0;
  double r = 0;        // radius / half-extent
  double aspect = 1;   // rectangle height/width ratio
  int cls = 1;
  double intensity = 0;
};

// Class intensity bands: lo_c = 0.05 + s*c, width 1.5*s with s = 0.9/(C+0.5).
// Adjacent bands overlap by s/2, so the task is never plain thresholding.
double band_spacing(int classes) { return 0.9 / (classes + 0.5); }

double band_width(int classes) { return 1.5 * band_spacing(classes); }

double band_lo(int cls, int classes) { return 0.05 + band_spacing(classes) * cls; }

bool inside(const Shape& s, int x, int y) {
  const double dx = x - s.cx;
  const double dy = y - s.cy;
  switch (s.kind) {
    case 0: return dx * dx + dy * dy <= s.r * s.r;
    case 1: return std::abs(dx) <= s.r && std::abs(dy) <= s.r * s.aspect;
    default: {
      const double d2 = dx * dx + dy * dy;
      const double r_in = 0.55 * s.r;
      return d2 <= s.r * s.r && d2 >= r_in * r_in;
    }
  }
}

void validate(const SyntheticTaskSpec& spec) {
  if (spec.h < 4 || spec.w < 4) fail(ErrorCode::ConfigInvalid, "image side below 4");
  if (spec.classes < 2) fail(ErrorCode::ConfigInvalid, "need background plus one class");
  if (spec.min_shapes < 0 || spec.max_shapes < spec.min_shapes)
    fail(ErrorCode::ConfigInvalid, "bad shape-count range");
  if (spec.noise_sigma < 0) fail(ErrorCode::ConfigInvalid, "negative noise sigma");
  if (spec.shift.gamma <= 0) fail(ErrorCode::ConfigInvalid, "gamma must be > 0");
  if (spec.shift.contrast <= 0) fail(ErrorCode::ConfigInvalid, "contrast must be > 0");
  if (spec.shift.size_bias <= -1.0) fail(ErrorCode::ConfigInvalid, "size_bias must be > -1");
  if (spec.max_shapes < spec.classes - 1)
    fail(ErrorCode::UnsatisfiableSpec,
         "max_shapes " + std::to_string(spec.max_shapes) + " cannot host all " +
             std::to_string(spec.classes - 1) + " foreground classes");
}

/// One attempt at image i. Returns false when a class that must appear got
/// fully occluded; the caller redraws with a fresh sub-seed.
bool try_render(const SyntheticTaskSpec& spec, Rng& rng, bool force_all_classes,
                std::vector<float>& image, std::vector<std::int32_t>& label) {
  const int hgt = spec.h, wdt = spec.w;
  const int classes = spec.classes;
  const double r_unit = std::min(hgt, wdt);

  int n_shapes;
  std::vector<int> cls_of;
  if (force_all_classes) {
    const int lo = std::max(spec.min_shapes, classes - 1);
    n_shapes = lo + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(spec.max_shapes - lo + 1)));
    std::vector<int> fg(static_cast<std::size_t>(classes - 1));
    std::iota(fg.begin(), fg.end(), 1);
    rng.shuffle(fg);
    // Mandatory classes go last so they paint on top of the filler shapes.
    for (int k = 0; k < n_shapes - (classes - 1); ++k)
      cls_of.push_back(1 + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(classes - 1))));
    cls_of.insert(cls_of.end(), fg.begin(), fg.end());
  } else {
    n_shapes = spec.min_shapes +
               static_cast<int>(rng.bounded(static_cast<std::uint64_t>(spec.max_shapes - spec.min_shapes + 1)));
    for (int k = 0; k < n_shapes; ++k)
      cls_of.push_back(1 + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(classes - 1))));
  }

  const double width = band_width(classes);
  const double bg_intensity = band_lo(0, classes) + width * rng.uniform();

  std::vector<Shape> shapes(static_cast<std::size_t>(n_shapes));
  for (int k = 0; k < n_shapes; ++k) {
    Shape& s = shapes[static_cast<std::size_t>(k)];
    s.cls = cls_of[static_cast<std::size_t>(k)];
    s.kind = static_cast<int>(rng.bounded(3));
    s.cx = rng.uniform(0.0, wdt - 1.0);
    s.cy = rng.uniform(0.0, hgt - 1.0);
    s.r = rng.uniform(0.10, 0.22) * r_unit;
    s.aspect = rng.uniform(0.6, 1.4);
    s.intensity = band_lo(s.cls, classes) + width * rng.uniform();
    if (spec.shift.size_bias != 0.0) s.r *= 1.0 + spec.shift.size_bias;
  }

  std::vector<double> canvas(static_cast<std::size_t>(hgt) * wdt, bg_intensity);
  std::fill(label.begin(), label.end(), 0);
  for (const Shape& s : shapes) {
    const int x0 = std::max(0, static_cast<int>(std::floor(s.cx - s.r - 1)));
    const int x1 = std::min(wdt - 1, static_cast<int>(std::ceil(s.cx + s.r + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(s.cy - s.r * std::max(1.0, s.aspect) - 1)));
    const int y1 = std::min(hgt - 1, static_cast<int>(std::ceil(s.cy + s.r * std::max(1.0, s.aspect) + 1)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (!inside(s, x, y)) continue;
        canvas[static_cast<std::size_t>(y) * wdt + x] = s.intensity;
        label[static_cast<std::size_t>(y) * wdt + x] = s.cls;
      }
    }
  }

  if (force_all_classes) {
    std::vector<char> present(static_cast<std::size_t>(classes), 0);
    for (std::int32_t l : label) present[static_cast<std::size_t>(l)] = 1;
    if (std::find(present.begin(), present.end(), 0) != present.end()) return false;
  }

  // Identity shifts skip their transform entirely so gamma=1/contrast=1/
  // bias=0 is bit-identical to no shift.
  if (spec.shift.gamma != 1.0) {
    for (double& p : canvas) p = std::pow(p, spec.shift.gamma);
  }
  if (spec.shift.contrast != 1.0) {
    for (double& p : canvas) p = 0.5 + spec.shift.contrast * (p - 0.5);
  }
  if (spec.noise_sigma > 0.0) {
    for (double& p : canvas) p += spec.noise_sigma * rng.normal();
  }
  for (std::size_t i = 0; i < canvas.size(); ++i) {
    image[i] = static_cast<float>(std::clamp(canvas[i], 0.0, 1.0));
  }
  return true;
}

}  // namespace

Dataset generate(const SyntheticTaskSpec& spec, int n, std::uint64_t seed) {
  if (n < 1) fail(ErrorCode::ConfigInvalid, "generate needs n >= 1");
  validate(spec);

  Dataset ds;
  ds.h = spec.h;
  ds.w = spec.w;
  ds.classes = spec.classes;
  ds.images.assign(static_cast<std::size_t>(n),
                   std::vector<float>(static_cast<std::size_t>(spec.h) * spec.w));
  ds.labels.assign(static_cast<std::size_t>(n),
                   std::vector<std::int32_t>(static_cast<std::size_t>(spec.h) * spec.w));

  constexpr int kMaxAttempts = 50;
  for (int i = 0; i < n; ++i) {
    // Every tenth image draws freely; the rest must show all classes. This
    // keeps each class present in at least 80% of any dataset size.
    const bool force = n < 10 || i % 10 != 0;
    const std::uint64_t base = splitmix64(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1));
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
      Rng rng(base + static_cast<std::uint64_t>(attempt));
      ok = try_render(spec, rng, force, ds.images[static_cast<std::size_t>(i)],
                      ds.labels[static_cast<std::size_t>(i)]);
    }
    if (!ok)
      fail(ErrorCode::UnsatisfiableSpec,
           "image " + std::to_string(i) + ": classes stay occluded after " +
               std::to_string(kMaxAttempts) + " attempts");
  }
  return ds;
}

SyntheticTaskSpec spec_from_config(const DataConfig& data) {
  SyntheticTaskSpec spec;
  spec.h = data.h;
  spec.w = data.w;
  spec.classes = data.classes;
  spec.min_shapes = data.min_shapes;
  spec.max_shapes = data.max_shapes;
  spec.noise_sigma = data.noise_sigma;
  return spec;
}

ImageBatch<float> gather_images(const Dataset& ds, const std::vector<int>& idx) {
  if (idx.empty()) fail(ErrorCode::EmptyDataset, "gather_images: no indices");
  Tensor4f t(static_cast<int>(idx.size()), 1, ds.h, ds.w);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::vector<float>& img = ds.images.at(static_cast<std::size_t>(idx[k]));
    std::copy(img.begin(), img.end(), t.v.data() + static_cast<Eigen::Index>(k) * ds.h * ds.w);
  }
  return ImageBatch<float>(std::move(t));
}

LabelMap gather_labels(const Dataset& ds, const std::vector<int>& idx) {
  if (idx.empty()) fail(ErrorCode::EmptyDataset, "gather_labels: no indices");
  LabelMap m(static_cast<int>(idx.size()), ds.h, ds.w);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::vector<std::int32_t>& lbl = ds.labels.at(static_cast<std::size_t>(idx[k]));
    if (lbl.empty()) fail(ErrorCode::EmptyDataset, "gather_labels: sample has no label");
    std::copy(lbl.begin(), lbl.end(), m.v.begin() + static_cast<std::ptrdiff_t>(k) * ds.h * ds.w);
  }
  return m;
}

}  // namespace roam
