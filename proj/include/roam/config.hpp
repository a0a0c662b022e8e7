#ifndef ROAM_CONFIG_HPP
#define ROAM_CONFIG_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "roam/types.hpp"

namespace roam {

/// Training regime. LOWER_BOUND / UPPER_BOUND are the plain supervised
/// references; SSL_* consume unlabeled data; SUP_* apply the mixing step
/// to labeled data only.
enum class Mode : int {
  LOWER_BOUND = 0,
  UPPER_BOUND = 1,
  SSL_ROAM = 2,
  SSL_PSEUDO_BASELINE = 3,
  SUP_ROAM_LB = 4,
  SUP_ROAM_UB = 5,
  FULLY_SUP_ROAM = 6,
};

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);

/// Synthetic task parameters. `kind` selects the generator ("shapes") or an
/// on-disk dataset directory ("external").
struct DataConfig {
  std::string kind = "shapes";
  int h = 64;
  int w = 64;
  int classes = 4;
  double noise_sigma = 0.05;
  int min_shapes = 1;
  int max_shapes = 3;
  int n_labeled = 20;
  int n_unlabeled = 200;
  int n_val = 20;
  int n_test = 50;
  std::uint64_t seed = 1;
  std::string dir;  // external datasets only
};

/// Full description of one run. Defaults reproduce the reference training
/// protocol: T=0.5, alpha=0.75, beta=75, Adam 1e-4 with weight decay 1e-4,
/// batch size 8, 40+40 epochs, mixing at {INPUT, ENC1, LAST}.
struct RunConfig {
  Mode mode = Mode::SSL_ROAM;
  std::uint64_t seed = 1;

  int batch_size = 8;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  int pretrain_epochs = 40;
  int train_epochs = 40;

  double T = 0.5;
  double alpha = 0.75;
  double beta = 75.0;
  bool sharpen = true;
  bool concatenate = true;
  bool mix_skips = false;
  bool per_sample_lambda = false;
  std::vector<LayerId> kappa_set = {LayerId::INPUT, LayerId::ENC1, LayerId::LAST};

  std::string out_dir = "runs/out";
  DataConfig data;
};

/// Parses `key=value` lines ('#' comments, blank lines ignored). Unknown
/// keys and malformed values raise ConfigInvalid naming the key. Later
/// lines override earlier ones.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);

/// Applies one `key=value` override in place.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

/// Emits the full configuration, one `key=value` per line, in a fixed key
/// order; parse_config_text(serialize_config(c)) reproduces c exactly.
std::string serialize_config(const RunConfig& cfg);

/// FNV-1a over the serialized form; identifies a configuration in manifests.
std::uint64_t config_hash(const RunConfig& cfg);

std::string kappa_set_to_string(const std::vector<LayerId>& set);
std::vector<LayerId> kappa_set_from_string(const std::string& s);

}  // namespace roam

#endif  // ROAM_CONFIG_HPP
