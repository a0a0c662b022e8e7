#include "roam/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "roam/rng.hpp"

namespace roam {
namespace {

namespace fs = std::filesystem;

Dataset take(const Dataset& ds, const std::vector<int>& order, std::size_t begin, std::size_t count,
             bool keep_labels) {
  Dataset out;
  out.h = ds.h;
  out.w = ds.w;
  out.classes = ds.classes;
  out.images.reserve(count);
  out.labels.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = static_cast<std::size_t>(order[begin + k]);
    out.images.push_back(ds.images[i]);
    out.labels.push_back(keep_labels ? ds.labels[i] : std::vector<std::int32_t>{});
  }
  return out;
}

int skip_pgm_space(std::istream& in) {
  int ch = in.get();
  while (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '#') {
    if (ch == '#') {
      while (ch != '\n' && ch != EOF) ch = in.get();
    }
    ch = in.get();
  }
  return ch;
}

int read_pgm_int(std::istream& in, const std::string& path) {
  int ch = skip_pgm_space(in);
  if (ch < '0' || ch > '9') fail(ErrorCode::MalformedFile, path + ": expected integer in PGM header");
  long value = 0;
  while (ch >= '0' && ch <= '9') {
    value = value * 10 + (ch - '0');
    if (value > 1 << 30) fail(ErrorCode::MalformedFile, path + ": header value overflows");
    ch = in.get();
  }
  if (ch != EOF) in.unget();
  return static_cast<int>(value);
}

}  // namespace

SplitResult split_by_counts(const Dataset& ds, int n_labeled, int n_unlabeled, int n_val,
                            int n_test, std::uint64_t seed) {
  if (ds.size() == 0) fail(ErrorCode::EmptyDataset, "split of an empty dataset");
  if (n_labeled < 1 || n_val < 1 || n_test < 1 || n_unlabeled < 0)
    fail(ErrorCode::ConfigInvalid, "labeled/validation/test splits need at least one sample each");
  const std::size_t total = static_cast<std::size_t>(n_labeled) + static_cast<std::size_t>(n_unlabeled) +
                            static_cast<std::size_t>(n_val) + static_cast<std::size_t>(n_test);
  if (total > ds.size())
    fail(ErrorCode::ConfigInvalid, "split wants " + std::to_string(total) + " samples, dataset has " +
                                       std::to_string(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds.labeled(i)) fail(ErrorCode::EmptyDataset, "split source must be fully labeled");
  }

  std::vector<int> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed ^ fnv1a64("split"));
  rng.shuffle(order);

  SplitResult out;
  std::size_t at = 0;
  out.labeled = take(ds, order, at, static_cast<std::size_t>(n_labeled), true);
  at += static_cast<std::size_t>(n_labeled);
  out.unlabeled = take(ds, order, at, static_cast<std::size_t>(n_unlabeled), false);
  out.unlabeled_with_labels = take(ds, order, at, static_cast<std::size_t>(n_unlabeled), true);
  at += static_cast<std::size_t>(n_unlabeled);
  out.validation = take(ds, order, at, static_cast<std::size_t>(n_val), true);
  at += static_cast<std::size_t>(n_val);
  out.test = take(ds, order, at, static_cast<std::size_t>(n_test), true);
  return out;
}

SplitResult split(const Dataset& ds, const std::array<double, 4>& fractions, std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (f < 0.0) fail(ErrorCode::FractionSum, "negative fraction");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    fail(ErrorCode::FractionSum, "fractions sum to " + std::to_string(sum) + ", expected 1");

  const std::size_t n = ds.size();
  std::array<int, 4> counts{};
  std::array<double, 4> remainder{};
  int assigned = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double want = fractions[i] * static_cast<double>(n);
    counts[i] = static_cast<int>(std::floor(want));
    remainder[i] = want - std::floor(want);
    assigned += counts[i];
  }
  // Largest-remainder rounding keeps the union equal to the full set.
  std::array<std::size_t, 4> by_rem = {0, 1, 2, 3};
  std::stable_sort(by_rem.begin(), by_rem.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < static_cast<int>(n); ++k) {
    ++counts[by_rem[k % 4]];
    ++assigned;
  }
  return split_by_counts(ds, counts[0], counts[1], counts[2], counts[3], seed);
}

SplitResult make_splits(const DataConfig& data) {
  const int total = data.n_labeled + data.n_unlabeled + data.n_val + data.n_test;
  Dataset ds;
  if (data.kind == "shapes") {
    ds = generate(spec_from_config(data), total, data.seed);
  } else if (data.kind == "external") {
    ds = load_external(data.dir);
  } else {
    fail(ErrorCode::ConfigInvalid, "data.kind '" + data.kind + "' is not 'shapes' or 'external'");
  }
  return split_by_counts(ds, data.n_labeled, data.n_unlabeled, data.n_val, data.n_test, data.seed);
}

void write_pgm16(const std::string& path, int h, int w, const std::vector<std::uint16_t>& px) {
  if (h < 1 || w < 1 || px.size() != static_cast<std::size_t>(h) * static_cast<std::size_t>(w))
    fail(ErrorCode::ShapeMismatch, path + ": pixel count disagrees with dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  out << "P5\n" << w << ' ' << h << "\n65535\n";
  std::vector<unsigned char> raw(px.size() * 2);
  for (std::size_t i = 0; i < px.size(); ++i) {
    raw[2 * i] = static_cast<unsigned char>(px[i] >> 8);
    raw[2 * i + 1] = static_cast<unsigned char>(px[i] & 0xff);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) fail(ErrorCode::IoFailure, "short write to " + path);
}

std::vector<std::uint16_t> read_pgm16(const std::string& path, int& h, int& w) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MalformedFile, "cannot open " + path);
  if (in.get() != 'P' || in.get() != '5') fail(ErrorCode::MalformedFile, path + ": not a P5 PGM");
  w = read_pgm_int(in, path);
  h = read_pgm_int(in, path);
  const int maxval = read_pgm_int(in, path);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
    fail(ErrorCode::MalformedFile, path + ": bad PGM dimensions or maxval");
  in.get();  // single whitespace byte after maxval

  const std::size_t n = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * static_cast<std::size_t>(bytes));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    fail(ErrorCode::MalformedFile, path + ": truncated pixel data");

  std::vector<std::uint16_t> px(n);
  if (bytes == 2) {
    for (std::size_t i = 0; i < n; ++i)
      px[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
  } else {
    for (std::size_t i = 0; i < n; ++i) px[i] = raw[i];
  }
  return px;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  if (ds.size() == 0) fail(ErrorCode::EmptyDataset, "nothing to save");
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) fail(ErrorCode::IoFailure, "cannot write manifest in " + dir);
  manifest << "classes=" << ds.classes << '\n';

  char name[32];
  const std::size_t n_px = static_cast<std::size_t>(ds.h) * static_cast<std::size_t>(ds.w);
  std::vector<std::uint16_t> px(n_px);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::snprintf(name, sizeof name, "img_%04zu.pgm", i);
    const std::string img_name = name;
    for (std::size_t p = 0; p < n_px; ++p)
      px[p] = static_cast<std::uint16_t>(std::lround(std::clamp(ds.images[i][p], 0.0f, 1.0f) * 65535.0f));
    write_pgm16((fs::path(dir) / img_name).string(), ds.h, ds.w, px);

    std::string lbl_name = "-";
    if (ds.labeled(i)) {
      std::snprintf(name, sizeof name, "lbl_%04zu.pgm", i);
      lbl_name = name;
      for (std::size_t p = 0; p < n_px; ++p) px[p] = static_cast<std::uint16_t>(ds.labels[i][p]);
      write_pgm16((fs::path(dir) / lbl_name).string(), ds.h, ds.w, px);
    }
    manifest << img_name << '\t' << lbl_name << '\n';
  }
  if (!manifest) fail(ErrorCode::IoFailure, "short manifest write in " + dir);
}

Dataset load_external(const std::string& dir) {
  std::ifstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) fail(ErrorCode::EmptyDataset, "no manifest.txt in " + dir);
  std::string header;
  if (!std::getline(manifest, header) || header.rfind("classes=", 0) != 0)
    fail(ErrorCode::MalformedFile, dir + ": manifest must start with classes=C");
  int classes = 0;
  try {
    classes = std::stoi(header.substr(8));
  } catch (const std::exception&) {
    fail(ErrorCode::MalformedFile, dir + ": bad classes header '" + header + "'");
  }
  if (classes < 2) fail(ErrorCode::MalformedFile, dir + ": classes must be >= 2");

  Dataset ds;
  ds.classes = classes;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      fail(ErrorCode::MalformedFile, dir + ": manifest line lacks a tab: '" + line + "'");
    const std::string img_path = (fs::path(dir) / line.substr(0, tab)).string();
    const std::string lbl_rel = line.substr(tab + 1);

    int h = 0, w = 0;
    const std::vector<std::uint16_t> raw = read_pgm16(img_path, h, w);
    if (ds.images.empty()) {
      ds.h = h;
      ds.w = w;
    } else if (h != ds.h || w != ds.w) {
      fail(ErrorCode::MalformedFile, img_path + ": image size differs from the rest of the set");
    }

    std::vector<float> img(raw.size());
    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi > lo) {
      for (std::size_t p = 0; p < raw.size(); ++p)
        img[p] = static_cast<float>((raw[p] - lo) / (hi - lo));
    }  // constant image stays all zeros
    ds.images.push_back(std::move(img));

    std::vector<std::int32_t> lbl;
    if (lbl_rel != "-") {
      int lh = 0, lw = 0;
      const std::vector<std::uint16_t> lraw =
          read_pgm16((fs::path(dir) / lbl_rel).string(), lh, lw);
      if (lh != h || lw != w)
        fail(ErrorCode::MalformedFile, lbl_rel + ": label size differs from its image");
      lbl.resize(lraw.size());
      for (std::size_t p = 0; p < lraw.size(); ++p) {
        if (lraw[p] >= static_cast<std::uint16_t>(classes))
          fail(ErrorCode::LabelRange, lbl_rel + ": label " + std::to_string(lraw[p]) +
                                          " outside [0, " + std::to_string(classes) + ")");
        lbl[p] = static_cast<std::int32_t>(lraw[p]);
      }
    }
    ds.labels.push_back(std::move(lbl));
  }
  if (ds.images.empty()) fail(ErrorCode::EmptyDataset, dir + ": manifest lists no samples");
  return ds;
}

}  // namespace roam
