#include "roam/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "roam/error.hpp"
#include "roam/rng.hpp"

namespace roam {

const char* to_string(Mode m) {
  switch (m) {
    case Mode::LOWER_BOUND: return "LOWER_BOUND";
    case Mode::UPPER_BOUND: return "UPPER_BOUND";
    case Mode::SSL_ROAM: return "SSL_ROAM";
    case Mode::SSL_PSEUDO_BASELINE: return "SSL_PSEUDO_BASELINE";
    case Mode::SUP_ROAM_LB: return "SUP_ROAM_LB";
    case Mode::SUP_ROAM_UB: return "SUP_ROAM_UB";
    case Mode::FULLY_SUP_ROAM: return "FULLY_SUP_ROAM";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  for (Mode m : {Mode::LOWER_BOUND, Mode::UPPER_BOUND, Mode::SSL_ROAM, Mode::SSL_PSEUDO_BASELINE,
                 Mode::SUP_ROAM_LB, Mode::SUP_ROAM_UB, Mode::FULLY_SUP_ROAM}) {
    if (s == to_string(m)) return m;
  }
  fail(ErrorCode::ConfigInvalid, "unknown mode '" + s + "'");
}

std::string kappa_set_to_string(const std::vector<LayerId>& set) {
  std::string out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (i) out += ',';
    out += to_string(set[i]);
  }
  return out;
}

std::vector<LayerId> kappa_set_from_string(const std::string& s) {
  std::vector<LayerId> out;
  std::string token;
  std::istringstream stream(s);
  while (std::getline(stream, token, ',')) {
    if (token.empty()) continue;
    out.push_back(layer_id_from_string(token));  // PASSTHROUGH is a legal member
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE)
    fail(ErrorCode::ConfigInvalid, "key '" + key + "': bad number '" + value + "'");
  return x;
}

long long parse_int(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE)
    fail(ErrorCode::ConfigInvalid, "key '" + key + "': bad integer '" + value + "'");
  return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE)
    fail(ErrorCode::ConfigInvalid, "key '" + key + "': bad integer '" + value + "'");
  return static_cast<std::uint64_t>(x);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  fail(ErrorCode::ConfigInvalid, "key '" + key + "': bad boolean '" + value + "'");
}

}  // namespace

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "mode") cfg.mode = mode_from_string(value);
  else if (key == "seed") cfg.seed = parse_u64(key, value);
  else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int(key, value));
  else if (key == "lr") cfg.lr = parse_double(key, value);
  else if (key == "weight_decay") cfg.weight_decay = parse_double(key, value);
  else if (key == "pretrain_epochs") cfg.pretrain_epochs = static_cast<int>(parse_int(key, value));
  else if (key == "train_epochs") cfg.train_epochs = static_cast<int>(parse_int(key, value));
  else if (key == "T") cfg.T = parse_double(key, value);
  else if (key == "alpha") cfg.alpha = parse_double(key, value);
  else if (key == "beta") cfg.beta = parse_double(key, value);
  else if (key == "sharpen") cfg.sharpen = parse_bool(key, value);
  else if (key == "concatenate") cfg.concatenate = parse_bool(key, value);
  else if (key == "mix_skips") cfg.mix_skips = parse_bool(key, value);
  else if (key == "per_sample_lambda") cfg.per_sample_lambda = parse_bool(key, value);
  else if (key == "kappa_set") cfg.kappa_set = kappa_set_from_string(value);
  else if (key == "out.dir") cfg.out_dir = value;
  else if (key == "data.kind") cfg.data.kind = value;
  else if (key == "data.h") cfg.data.h = static_cast<int>(parse_int(key, value));
  else if (key == "data.w") cfg.data.w = static_cast<int>(parse_int(key, value));
  else if (key == "data.classes") cfg.data.classes = static_cast<int>(parse_int(key, value));
  else if (key == "data.noise_sigma") cfg.data.noise_sigma = parse_double(key, value);
  else if (key == "data.min_shapes") cfg.data.min_shapes = static_cast<int>(parse_int(key, value));
  else if (key == "data.max_shapes") cfg.data.max_shapes = static_cast<int>(parse_int(key, value));
  else if (key == "data.n_labeled") cfg.data.n_labeled = static_cast<int>(parse_int(key, value));
  else if (key == "data.n_unlabeled") cfg.data.n_unlabeled = static_cast<int>(parse_int(key, value));
  else if (key == "data.n_val") cfg.data.n_val = static_cast<int>(parse_int(key, value));
  else if (key == "data.n_test") cfg.data.n_test = static_cast<int>(parse_int(key, value));
  else if (key == "data.seed") cfg.data.seed = parse_u64(key, value);
  else if (key == "data.dir") cfg.data.dir = value;
  else fail(ErrorCode::ConfigInvalid, "unknown key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::ConfigInvalid, "line " + std::to_string(line_no) + ": expected key=value");
    apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open config '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

namespace {

std::string format_double(double x) {
  std::ostringstream out;
  out.precision(17);
  out << x;
  return out.str();
}

}  // namespace

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "mode=" << to_string(cfg.mode) << '\n';
  out << "seed=" << cfg.seed << '\n';
  out << "batch_size=" << cfg.batch_size << '\n';
  out << "lr=" << format_double(cfg.lr) << '\n';
  out << "weight_decay=" << format_double(cfg.weight_decay) << '\n';
  out << "pretrain_epochs=" << cfg.pretrain_epochs << '\n';
  out << "train_epochs=" << cfg.train_epochs << '\n';
  out << "T=" << format_double(cfg.T) << '\n';
  out << "alpha=" << format_double(cfg.alpha) << '\n';
  out << "beta=" << format_double(cfg.beta) << '\n';
  out << "sharpen=" << (cfg.sharpen ? "true" : "false") << '\n';
  out << "concatenate=" << (cfg.concatenate ? "true" : "false") << '\n';
  out << "mix_skips=" << (cfg.mix_skips ? "true" : "false") << '\n';
  out << "per_sample_lambda=" << (cfg.per_sample_lambda ? "true" : "false") << '\n';
  out << "kappa_set=" << kappa_set_to_string(cfg.kappa_set) << '\n';
  out << "out.dir=" << cfg.out_dir << '\n';
  out << "data.kind=" << cfg.data.kind << '\n';
  out << "data.h=" << cfg.data.h << '\n';
  out << "data.w=" << cfg.data.w << '\n';
  out << "data.classes=" << cfg.data.classes << '\n';
  out << "data.noise_sigma=" << format_double(cfg.data.noise_sigma) << '\n';
  out << "data.min_shapes=" << cfg.data.min_shapes << '\n';
  out << "data.max_shapes=" << cfg.data.max_shapes << '\n';
  out << "data.n_labeled=" << cfg.data.n_labeled << '\n';
  out << "data.n_unlabeled=" << cfg.data.n_unlabeled << '\n';
  out << "data.n_val=" << cfg.data.n_val << '\n';
  out << "data.n_test=" << cfg.data.n_test << '\n';
  out << "data.seed=" << cfg.data.seed << '\n';
  out << "data.dir=" << cfg.data.dir << '\n';
  return out.str();
}

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(serialize_config(cfg)); }

}  // namespace roam
