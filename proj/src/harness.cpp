#include "roam/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "roam/checkpoint.hpp"
#include "roam/dataset.hpp"
#include "roam/error.hpp"

namespace roam {

namespace fs = std::filesystem;

namespace {

std::string g17(double x) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", x);
  return b;
}

std::string f9(double x) {
  char b[40];
  std::snprintf(b, sizeof b, "%.9f", x);
  return b;
}

std::string hex16(std::uint64_t x) {
  char b[24];
  std::snprintf(b, sizeof b, "%016" PRIx64, x);
  return b;
}

std::string trimmed(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot write '" + path + "'");
  out << text;
  out.flush();
  if (!out) fail(ErrorCode::IoFailure, "short write to '" + path + "'");
}

std::string manifest_text(const RunConfig& cfg) {
  std::ostringstream out;
  out << "# roam manifest\n";
  out << "# version=" << kRoamVersion << '\n';
  out << "# config_hash=" << hex16(config_hash(cfg)) << '\n';
  out << serialize_config(cfg);
  return out.str();
}

std::string events_text(const RunRecord& rec) {
  std::ostringstream out;
  for (const auto& ev : rec.events)
    out << "step epoch=" << ev.epoch << " iter=" << ev.iter << " kappa=" << to_string(ev.kappa)
        << " lambda=" << g17(ev.lambda_prime) << " ce=" << g17(ev.ce) << " mse=" << g17(ev.mse)
        << " total=" << g17(ev.total) << '\n';
  for (const auto& er : rec.epochs)
    out << "epoch " << er.epoch << " val_dice=" << g17(er.val_dice)
        << " selectable=" << (er.selectable ? 1 : 0) << '\n';
  out << "best_epoch=" << rec.best_epoch << " best_val_dice=" << g17(rec.best_val_dice)
      << " guess_calls=" << rec.guess_calls << '\n';
  return out.str();
}

bool selects_final(Mode m) { return m == Mode::LOWER_BOUND || m == Mode::SUP_ROAM_LB; }

MetricSummary test_metrics(InjectableNet<float>& net, const Dataset& test, int batch_size) {
  const LabelMap pred = predict_labels(net, test, batch_size);
  std::vector<int> idx(test.size());
  std::iota(idx.begin(), idx.end(), 0);
  const LabelMap gt = gather_labels(test, idx);
  return summarize_metrics(evaluate_batch(pred, gt, test.classes), test.classes);
}

/// Writes metrics.csv and report.txt into `dir` for one selected checkpoint.
RunSummary write_reports(const RunConfig& cfg, const Checkpoint& selected, bool is_best,
                         const SplitResult& splits, const std::string& dir) {
  InjectableNet<float> net(cfg.data.classes);
  restore(net, selected);

  RunSummary s;
  s.cfg = cfg;
  s.out_dir = dir;
  s.selected_epoch = selected.epoch;
  s.selected_is_best = is_best;
  s.val_dice = mean_validation_dice(net, splits.validation, cfg.batch_size);
  s.test = test_metrics(net, splits.test, cfg.batch_size);

  const std::string name = to_string(cfg.mode);
  write_text_file(dir + "/metrics.csv", metrics_csv({name}, {s.test}));

  std::ostringstream rep;
  rep << "mode=" << name << '\n';
  rep << "seed=" << cfg.seed << '\n';
  rep << "config_hash=" << hex16(config_hash(cfg)) << '\n';
  rep << "selected=" << (is_best ? "best" : "final") << " epoch=" << selected.epoch << '\n';
  rep << "validation_dice=" << f9(s.val_dice) << "\n\n";
  rep << format_report({name}, {s.test});
  write_text_file(dir + "/report.txt", rep.str());
  return s;
}

bool plain_cell_name(const std::string& name) {
  if (name.empty()) return false;
  for (char c : name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.' && c != '-')
      return false;
  return true;
}

void validate_grid(const std::vector<GridCell>& grid) {
  if (grid.empty()) fail(ErrorCode::ConfigInvalid, "grid has no cells");
  for (const auto& cell : grid) {
    if (!plain_cell_name(cell.name))
      fail(ErrorCode::ConfigInvalid, "grid cell name '" + cell.name +
                                         "' must use only letters, digits, '_', '.', '-'");
    if (cell.overrides.size() > 2)
      fail(ErrorCode::ConfigInvalid, "grid cell '" + cell.name + "' overrides " +
                                         std::to_string(cell.overrides.size()) +
                                         " keys; the limit is 2");
  }
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i + 1; j < grid.size(); ++j)
      if (grid[i].name == grid[j].name)
        fail(ErrorCode::ConfigInvalid, "grid cell name '" + grid[i].name + "' appears twice");
}

std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

double parse_shift_value(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE)
    fail(ErrorCode::ConfigInvalid, "shift key '" + key + "': bad number '" + value + "'");
  return x;
}

bool is_config_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::UnknownLayer:
    case ErrorCode::EmptyKappaSet:
    case ErrorCode::FractionSum:
    case ErrorCode::UnsatisfiableSpec:
      return true;
    default:
      return false;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Single runs

RunSummary run_experiment(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const SplitResult splits = make_splits(cfg.data);
  const TrainResult res = run_training(cfg, splits);
  write_text_file(cfg.out_dir + "/manifest.txt", manifest_text(cfg));
  write_text_file(cfg.out_dir + "/events.log", events_text(res.record));
  save_checkpoint(res.best, cfg.out_dir + "/best.ckpt");
  save_checkpoint(res.final, cfg.out_dir + "/final.ckpt");
  return write_reports(cfg, res.selected(), !selects_final(cfg.mode), splits, cfg.out_dir);
}

RunSummary regenerate_report(const std::string& run_dir) {
  const std::string mpath = run_dir + "/manifest.txt";
  if (!fs::exists(mpath))
    fail(ErrorCode::MissingCheckpoint, "'" + run_dir + "' has no manifest.txt");
  const RunConfig cfg = load_config_file(mpath);
  const bool is_best = !selects_final(cfg.mode);
  const std::string ckpath = run_dir + (is_best ? "/best.ckpt" : "/final.ckpt");
  if (!fs::exists(ckpath)) fail(ErrorCode::MissingCheckpoint, "'" + ckpath + "' is missing");
  const Checkpoint selected = load_checkpoint(ckpath);
  const SplitResult splits = make_splits(cfg.data);
  return write_reports(cfg, selected, is_best, splits, run_dir);
}

// ---------------------------------------------------------------------------
// Ablation grid

std::vector<GridCell> parse_grid(const std::string& text) {
  std::vector<GridCell> cells;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trimmed(line);
    if (line.empty()) continue;
    std::istringstream ls(line);
    GridCell cell;
    ls >> cell.name;
    std::string tok;
    while (ls >> tok) {
      const std::size_t eq = tok.find('=');
      if (eq == std::string::npos || eq == 0)
        fail(ErrorCode::ConfigInvalid, "grid line " + std::to_string(line_no) + ": override '" +
                                           tok + "' is not key=value");
      cell.overrides.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }
    cells.push_back(std::move(cell));
  }
  validate_grid(cells);
  return cells;
}

std::vector<GridCell> load_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open grid '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_grid(buffer.str());
}

std::vector<GridCell> default_ablation_grid() {
  std::vector<GridCell> g;
  auto add = [&g](const char* name, std::vector<std::pair<std::string, std::string>> ov) {
    g.push_back({name, std::move(ov)});
  };
  add("base", {});
  add("kappa_0", {{"kappa_set", "INPUT"}});
  add("kappa_1", {{"kappa_set", "ENC1"}});
  add("kappa_2", {{"kappa_set", "ENC2"}});
  add("kappa_3", {{"kappa_set", "BOTTLENECK"}});
  add("kappa_4", {{"kappa_set", "DEC1"}});
  add("kappa_5", {{"kappa_set", "DEC2"}});
  add("kappa_L", {{"kappa_set", "LAST"}});
  add("kappa_01L", {{"kappa_set", "INPUT,ENC1,LAST"}});
  add("kappa_02L", {{"kappa_set", "INPUT,ENC2,LAST"}});
  add("kappa_12L", {{"kappa_set", "ENC1,ENC2,LAST"}});
  add("kappa_015", {{"kappa_set", "INPUT,ENC1,DEC2"}});
  add("kappa_phi01L", {{"kappa_set", "PASSTHROUGH,INPUT,ENC1,LAST"}});
  add("kappa_all", {{"kappa_set", "INPUT,ENC1,ENC2,BOTTLENECK,DEC1,DEC2,LAST"}});
  add("alpha_0.25", {{"alpha", "0.25"}});
  add("alpha_2", {{"alpha", "2"}});
  add("beta_0", {{"beta", "0"}});
  add("sharpen_noconcat", {{"concatenate", "false"}});
  add("nosharpen_concat", {{"sharpen", "false"}});
  add("nosharpen_noconcat", {{"sharpen", "false"}, {"concatenate", "false"}});
  return g;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& base, const std::vector<GridCell>& grid,
                                    const std::string& out_dir) {
  validate_grid(grid);
  fs::create_directories(out_dir);
  std::vector<AblationRow> rows;
  for (const auto& cell : grid) {
    AblationRow row;
    row.name = cell.name;
    try {
      RunConfig cfg = base;
      for (const auto& [key, value] : cell.overrides) apply_override(cfg, key, value);
      cfg.out_dir = out_dir + "/" + cell.name;  // shared seeds, per-cell artifacts
      const RunSummary s = run_experiment(cfg);
      row.ok = true;
      row.val_dice = s.val_dice;
      row.test_dice = s.test.dice.mean;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) {
    if (a.ok != b.ok) return a.ok;  // failed cells last
    return a.val_dice > b.val_dice;
  });

  std::ostringstream csv, txt;
  csv << "cell,status,val_dice,test_dice,error\n";
  txt << "cell                         validation  testing\n";
  for (const auto& r : rows) {
    if (r.ok) {
      csv << r.name << ",ok," << f9(r.val_dice) << ',' << f9(r.test_dice) << ",\n";
      char line[96];
      std::snprintf(line, sizeof line, "%-28s %.9f %.9f\n", r.name.c_str(), r.val_dice,
                    r.test_dice);
      txt << line;
    } else {
      csv << r.name << ",failed,,," << csv_safe(r.error) << '\n';
      txt << r.name << "  failed: " << r.error << '\n';
    }
  }
  write_text_file(out_dir + "/ablation.csv", csv.str());
  write_text_file(out_dir + "/ablation.txt", txt.str());
  return rows;
}

// ---------------------------------------------------------------------------
// Data-amount sweep

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "LABELED") return SweepAxis::LABELED;
  if (s == "UNLABELED") return SweepAxis::UNLABELED;
  fail(ErrorCode::ConfigInvalid, "sweep axis '" + s + "' is not LABELED or UNLABELED");
}

std::vector<SweepPoint> cmd_sweep(SweepAxis axis, const std::vector<int>& sizes,
                                  const RunConfig& base, const std::vector<Mode>& models,
                                  int seeds, const std::string& out_dir) {
  if (sizes.empty()) fail(ErrorCode::ConfigInvalid, "sweep needs at least one size");
  if (models.empty()) fail(ErrorCode::ConfigInvalid, "sweep needs at least one model");
  if (seeds < 1) fail(ErrorCode::ConfigInvalid, "sweep needs at least one seed");
  for (int s : sizes)
    if (s < 1) fail(ErrorCode::ConfigInvalid, "sweep sizes must be >= 1");
  fs::create_directories(out_dir);
  const char* axis_name = axis == SweepAxis::LABELED ? "LABELED" : "UNLABELED";

  std::vector<SweepPoint> points;
  for (Mode m : models) {
    for (int size : sizes) {
      std::vector<double> scores;
      for (int k = 0; k < seeds; ++k) {
        RunConfig cfg = base;
        cfg.mode = m;
        cfg.seed = base.seed + static_cast<std::uint64_t>(k);
        cfg.data.seed = base.data.seed + static_cast<std::uint64_t>(k);
        (axis == SweepAxis::LABELED ? cfg.data.n_labeled : cfg.data.n_unlabeled) = size;
        cfg.out_dir = out_dir + "/" + to_string(m) + "_" + axis_name + "_" +
                      std::to_string(size) + "_s" + std::to_string(k);
        scores.push_back(run_experiment(cfg).test.dice.mean);
      }
      const SummaryStats st = summarize(scores);
      points.push_back({m, size, st.mean, st.stddev, seeds});
    }
  }

  std::ostringstream csv;
  csv << "model,axis,size,dice_mean,dice_std,n_seeds\n";
  for (const auto& p : points)
    csv << to_string(p.mode) << ',' << axis_name << ',' << p.size << ',' << f9(p.dice_mean) << ','
        << f9(p.dice_std) << ',' << p.n_seeds << '\n';
  write_text_file(out_dir + "/sweep.csv", csv.str());
  return points;
}

// ---------------------------------------------------------------------------
// Domain shift

ShiftSpec shift_from_string(const std::string& s) {
  ShiftSpec shift;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trimmed(tok);
    if (tok.empty()) continue;
    const std::size_t eq = tok.find('=');
    if (eq == std::string::npos || eq == 0)
      fail(ErrorCode::ConfigInvalid, "shift term '" + tok + "' is not key=value");
    const std::string key = tok.substr(0, eq);
    const double value = parse_shift_value(key, tok.substr(eq + 1));
    if (key == "gamma") shift.gamma = value;
    else if (key == "contrast") shift.contrast = value;
    else if (key == "size_bias") shift.size_bias = value;
    else fail(ErrorCode::ConfigInvalid, "unknown shift key '" + key + "'");
  }
  return shift;
}

std::vector<DomainShiftRow> cmd_domain_shift(const std::vector<std::string>& run_dirs,
                                             const ShiftSpec& shift, const std::string& out_dir) {
  if (run_dirs.empty())
    fail(ErrorCode::ConfigInvalid, "domain shift needs at least one run directory");
  fs::create_directories(out_dir);

  std::vector<DomainShiftRow> rows;
  for (const auto& dir : run_dirs) {
    const std::string mpath = dir + "/manifest.txt";
    if (!fs::exists(mpath)) fail(ErrorCode::MissingCheckpoint, "'" + dir + "' has no manifest.txt");
    const RunConfig cfg = load_config_file(mpath);
    if (cfg.data.kind != "shapes")
      fail(ErrorCode::ConfigInvalid, "domain shift needs the synthetic generator");
    const bool is_best = !selects_final(cfg.mode);
    const std::string ckpath = dir + (is_best ? "/best.ckpt" : "/final.ckpt");
    if (!fs::exists(ckpath)) fail(ErrorCode::MissingCheckpoint, "'" + ckpath + "' is missing");

    InjectableNet<float> net(cfg.data.classes);
    restore(net, load_checkpoint(ckpath));

    // The shifted twin renders the identical scene draws under the shift, so
    // the identity shift reproduces the in-domain images bit for bit.
    const SplitResult in_dom = make_splits(cfg.data);
    SyntheticTaskSpec spec = spec_from_config(cfg.data);
    spec.shift = shift;
    const int total =
        cfg.data.n_labeled + cfg.data.n_unlabeled + cfg.data.n_val + cfg.data.n_test;
    const Dataset full = generate(spec, total, cfg.data.seed);
    const SplitResult moved = split_by_counts(full, cfg.data.n_labeled, cfg.data.n_unlabeled,
                                              cfg.data.n_val, cfg.data.n_test, cfg.data.seed);

    DomainShiftRow row;
    row.run_dir = dir;
    row.mode = cfg.mode;
    row.in_domain_dice = test_metrics(net, in_dom.test, cfg.batch_size).dice.mean;
    row.shifted_dice = test_metrics(net, moved.test, cfg.batch_size).dice.mean;
    rows.push_back(std::move(row));
  }

  std::ostringstream csv;
  csv << "run,mode,in_domain_dice,shifted_dice\n";
  for (const auto& r : rows)
    csv << csv_safe(r.run_dir) << ',' << to_string(r.mode) << ',' << f9(r.in_domain_dice) << ','
        << f9(r.shifted_dice) << '\n';
  write_text_file(out_dir + "/domain_shift.csv", csv.str());
  return rows;
}

// ---------------------------------------------------------------------------
// CLI

int harness_main(int argc, const char* const* argv) {
  CLI::App app{"Random-layer mixup segmentation harness"};
  app.require_subcommand(1);

  std::string config_path, grid_path, out_dir, axis_str = "LABELED", shift_str, report_dir;
  std::vector<std::string> run_dirs, model_names;
  std::vector<int> sizes;
  std::uint64_t seed = 0;
  int seeds = 3;

  CLI::App* run = app.add_subcommand("run", "train one configuration end to end");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--out", out_dir, "output directory (default: out.dir from the config)");
  run->add_option("--seed", seed, "override the training seed");

  CLI::App* ablate = app.add_subcommand("ablate", "run an ablation grid");
  ablate->add_option("--config", config_path, "base config file")->required();
  ablate->add_option("--grid", grid_path, "grid file (default: built-in 20-cell grid)");
  ablate->add_option("--out", out_dir, "output directory (default: out.dir from the config)");
  ablate->add_option("--seed", seed, "override the shared training seed");

  CLI::App* sweep = app.add_subcommand("sweep", "sweep the amount of labeled or unlabeled data");
  sweep->add_option("--config", config_path, "base config file")->required();
  sweep->add_option("--axis", axis_str, "LABELED or UNLABELED (default LABELED)");
  sweep->add_option("--sizes", sizes, "comma-separated sizes")->required()->delimiter(',');
  sweep->add_option("--models", model_names, "modes to sweep (default: the config's mode)")
      ->delimiter(',');
  sweep->add_option("--seeds", seeds, "seeded repetitions per point (default 3)");
  sweep->add_option("--out", out_dir, "output directory (default: out.dir from the config)");
  sweep->add_option("--seed", seed, "override the base training seed");

  CLI::App* shift_cmd = app.add_subcommand("domain-shift", "evaluate runs on a shifted domain");
  shift_cmd->add_option("--runs", run_dirs, "comma-separated run directories")
      ->required()
      ->delimiter(',');
  shift_cmd->add_option("--shift", shift_str, "e.g. gamma=1.3,contrast=0.8,size_bias=0.2");
  shift_cmd->add_option("--out", out_dir, "output directory (default '.')");

  CLI::App* report = app.add_subcommand("report", "regenerate reports from a run directory");
  report->add_option("--run", report_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed()) {
      RunConfig cfg = load_config_file(config_path);
      if (run->count("--seed")) cfg.seed = seed;
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      const RunSummary s = run_experiment(cfg);
      std::printf("mode=%s selected=%s epoch=%d val_dice=%s test_dice=%s\nartifacts: %s\n",
                  to_string(cfg.mode), s.selected_is_best ? "best" : "final", s.selected_epoch,
                  f9(s.val_dice).c_str(), f9(s.test.dice.mean).c_str(), s.out_dir.c_str());
      return 0;
    }
    if (ablate->parsed()) {
      RunConfig cfg = load_config_file(config_path);
      if (ablate->count("--seed")) cfg.seed = seed;
      const std::vector<GridCell> grid =
          grid_path.empty() ? default_ablation_grid() : load_grid_file(grid_path);
      const std::string dir = out_dir.empty() ? cfg.out_dir : out_dir;
      const std::vector<AblationRow> rows = cmd_ablate(cfg, grid, dir);
      std::printf("cell                         validation  testing\n");
      for (const auto& r : rows) {
        if (r.ok)
          std::printf("%-28s %.9f %.9f\n", r.name.c_str(), r.val_dice, r.test_dice);
        else
          std::printf("%s  failed: %s\n", r.name.c_str(), r.error.c_str());
      }
      std::printf("artifacts: %s\n", dir.c_str());
      return 0;
    }
    if (sweep->parsed()) {
      RunConfig cfg = load_config_file(config_path);
      if (sweep->count("--seed")) cfg.seed = seed;
      const SweepAxis axis = sweep_axis_from_string(axis_str);
      std::vector<Mode> models;
      for (const auto& name : model_names) models.push_back(mode_from_string(name));
      if (models.empty()) models.push_back(cfg.mode);
      const std::string dir = out_dir.empty() ? cfg.out_dir : out_dir;
      const std::vector<SweepPoint> points = cmd_sweep(axis, sizes, cfg, models, seeds, dir);
      std::printf("model                 size  dice_mean    dice_std\n");
      for (const auto& p : points)
        std::printf("%-20s %5d  %.9f %.9f\n", to_string(p.mode), p.size, p.dice_mean, p.dice_std);
      std::printf("artifacts: %s\n", dir.c_str());
      return 0;
    }
    if (shift_cmd->parsed()) {
      const ShiftSpec shift = shift_from_string(shift_str);
      const std::string dir = out_dir.empty() ? std::string(".") : out_dir;
      const std::vector<DomainShiftRow> rows = cmd_domain_shift(run_dirs, shift, dir);
      std::printf("run                          mode                 in_domain    shifted\n");
      for (const auto& r : rows)
        std::printf("%-28s %-20s %.9f %.9f\n", r.run_dir.c_str(), to_string(r.mode),
                    r.in_domain_dice, r.shifted_dice);
      return 0;
    }
    if (report->parsed()) {
      const RunSummary s = regenerate_report(report_dir);
      std::printf("mode=%s selected=%s epoch=%d val_dice=%s test_dice=%s\nartifacts: %s\n",
                  to_string(s.cfg.mode), s.selected_is_best ? "best" : "final", s.selected_epoch,
                  f9(s.val_dice).c_str(), f9(s.test.dice.mean).c_str(), s.out_dir.c_str());
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", to_string(e.code()), e.what());
    return is_config_error(e.code()) ? 2 : 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}

}  // namespace roam
