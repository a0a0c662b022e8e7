#ifndef ROAM_RNG_HPP
#define ROAM_RNG_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "roam/error.hpp"

namespace roam {

// All sampling below is built from raw mt19937_64 output with explicit
// constructions (no std::*_distribution), so a given seed produces the same
// stream on every platform.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Deterministic random source. One instance = one stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t raw() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1); rejects exact zero.
  double uniform_pos() {
    double u = uniform();
    while (u == 0.0) u = uniform();
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n) by rejection.
  std::uint64_t bounded(std::uint64_t n) {
    if (n == 0) fail(ErrorCode::ConfigInvalid, "bounded(0)");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  /// Standard normal via the Marsaglia polar method (second value cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
  double gamma(double shape) {
    if (shape <= 0.0) fail(ErrorCode::NonpositiveAlpha, "gamma shape must be > 0");
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      return g * std::pow(uniform_pos(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  /// Beta(a, b) from two Gamma draws.
  double beta(double a, double b) {
    const double ga = gamma(a);
    const double gb = gamma(b);
    return ga / (ga + gb);
  }

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(bounded(i))]);
    }
  }

  std::string serialize() const {
    std::ostringstream os;
    // The spare normal travels as raw bits; decimal text would drop precision.
    os << engine_ << ' ' << (have_spare_ ? 1 : 0) << ' ' << std::bit_cast<std::uint64_t>(spare_);
    return os.str();
  }

  void deserialize(const std::string& state) {
    std::istringstream is(state);
    int flag = 0;
    std::uint64_t spare_bits = 0;
    is >> engine_ >> flag >> spare_bits;
    if (!is) fail(ErrorCode::MalformedFile, "bad rng state");
    have_spare_ = flag != 0;
    spare_ = std::bit_cast<double>(spare_bits);
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Named sub-streams fanned out from one master seed. Consumers that pull
/// from different names never perturb each other's sequences.
class RngPool {
 public:
  explicit RngPool(std::uint64_t master_seed) : master_(master_seed) {}

  Rng& stream(std::string_view name) {
    auto it = streams_.find(std::string(name));
    if (it == streams_.end()) {
      it = streams_.emplace(std::string(name), Rng(master_ ^ fnv1a64(name))).first;
    }
    return it->second;
  }

  std::uint64_t master_seed() const { return master_; }

  std::map<std::string, std::string> serialize_all() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, rng] : streams_) out[name] = rng.serialize();
    return out;
  }

  void restore(const std::map<std::string, std::string>& states) {
    for (const auto& [name, state] : states) stream(name).deserialize(state);
  }

 private:
  std::uint64_t master_;
  std::map<std::string, Rng> streams_;
};

}  // namespace roam

#endif  // ROAM_RNG_HPP
