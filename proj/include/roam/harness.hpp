#ifndef ROAM_HARNESS_HPP
#define ROAM_HARNESS_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "roam/config.hpp"
#include "roam/metrics.hpp"
#include "roam/synthetic.hpp"
#include "roam/trainer.hpp"

namespace roam {

inline constexpr const char* kRoamVersion = "0.1.0";

/// Summary of one finished experiment. `selected_epoch` is the epoch of the
/// checkpoint the mode's protocol evaluates (the final epoch for the fixed
/// budget baselines, the best validation epoch otherwise).
struct RunSummary {
  RunConfig cfg;
  std::string out_dir;
  double val_dice = 0.0;  // validation Dice of the selected checkpoint
  MetricSummary test;     // test-set metrics of the selected checkpoint
  int selected_epoch = 0;
  bool selected_is_best = false;
};

/// Trains cfg end to end and writes manifest.txt, events.log, best.ckpt,
/// final.ckpt, metrics.csv, and report.txt under cfg.out_dir. The manifest
/// doubles as a config file: rerunning it reproduces metrics.csv bit-exactly.
RunSummary run_experiment(const RunConfig& cfg);

/// Rebuilds metrics.csv and report.txt for an existing run directory from
/// its manifest and stored checkpoints alone; no training happens.
/// MissingCheckpoint when the directory lacks its artifacts.
RunSummary regenerate_report(const std::string& run_dir);

// ---------------------------------------------------------------------------
// Ablation grid

/// One grid cell: a name plus at most two key=value overrides on the base
/// configuration (the two-key limit keeps cells attributable).
struct GridCell {
  std::string name;
  std::vector<std::pair<std::string, std::string>> overrides;
};

/// Grid file: one cell per line, "name [key=value [key=value]]"; '#'
/// comments and blank lines are ignored.
std::vector<GridCell> parse_grid(const std::string& text);
std::vector<GridCell> load_grid_file(const std::string& path);

/// The 20-cell default grid mirroring the reference ablation table: the base
/// model, thirteen mixing-layer rows ({0,1,L} also appears as an explicit
/// row), two alpha rows, beta=0, and the three sharpen/concatenate toggles.
std::vector<GridCell> default_ablation_grid();

struct AblationRow {
  std::string name;
  bool ok = false;
  std::string error;  // failure text when !ok
  double val_dice = 0.0;
  double test_dice = 0.0;
};

/// Runs every cell as base + overrides under out_dir/<cell name>, all cells
/// sharing the base seeds. Cell failures are recorded and the grid
/// continues. Rows are sorted by validation Dice descending, failed cells
/// last; writes ablation.csv and ablation.txt under out_dir.
std::vector<AblationRow> cmd_ablate(const RunConfig& base, const std::vector<GridCell>& grid,
                                    const std::string& out_dir);

// ---------------------------------------------------------------------------
// Data-amount sweep

enum class SweepAxis { LABELED, UNLABELED };
SweepAxis sweep_axis_from_string(const std::string& s);

struct SweepPoint {
  Mode mode = Mode::LOWER_BOUND;
  int size = 0;
  double dice_mean = 0.0;
  double dice_std = 0.0;
  int n_seeds = 0;
};

/// For each size and model, trains `seeds` runs (seed k shifts both the
/// training seed and the data seed by k) and aggregates the selected
/// checkpoints' mean test Dice. Writes sweep.csv under out_dir; the file
/// holds exactly |sizes| * |models| rows.
std::vector<SweepPoint> cmd_sweep(SweepAxis axis, const std::vector<int>& sizes,
                                  const RunConfig& base, const std::vector<Mode>& models,
                                  int seeds, const std::string& out_dir);

// ---------------------------------------------------------------------------
// Domain shift

struct DomainShiftRow {
  std::string run_dir;
  Mode mode = Mode::LOWER_BOUND;
  double in_domain_dice = 0.0;
  double shifted_dice = 0.0;
};

/// "gamma=1.2,contrast=0.8,size_bias=0.1"; omitted keys keep identity.
ShiftSpec shift_from_string(const std::string& s);

/// Evaluates each run's selected checkpoint on its own test split and on a
/// shifted twin rendered from the identical scene draws. The identity shift
/// reproduces the in-domain Dice exactly. Writes domain_shift.csv under
/// out_dir. Synthetic data only; MissingCheckpoint for incomplete runs.
std::vector<DomainShiftRow> cmd_domain_shift(const std::vector<std::string>& run_dirs,
                                             const ShiftSpec& shift, const std::string& out_dir);

// ---------------------------------------------------------------------------
// CLI

/// Verbs: run, ablate, sweep, domain-shift, report. Exit codes: 0 success,
/// 2 configuration error, 3 runtime failure.
int harness_main(int argc, const char* const* argv);

}  // namespace roam

#endif  // ROAM_HARNESS_HPP
