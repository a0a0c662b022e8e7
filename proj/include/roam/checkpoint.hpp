#ifndef ROAM_CHECKPOINT_HPP
#define ROAM_CHECKPOINT_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "roam/error.hpp"
#include "roam/unet.hpp"

namespace roam {

/// Serializable training state: weights, normalization statistics, the epoch
/// counter, and every named RNG stream, all keyed by name so a mismatched
/// architecture is detected instead of silently misloaded.
struct Checkpoint {
  std::string arch;
  std::int32_t epoch = 0;
  std::vector<std::pair<std::string, std::vector<float>>> params;
  std::vector<std::pair<std::string, std::vector<float>>> state;
  std::map<std::string, std::string> rng_streams;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Captures the net's full numeric state. Values are copied, not aliased.
template <typename Scalar>
Checkpoint snapshot(InjectableNet<Scalar>& net, int epoch,
                    const std::map<std::string, std::string>& rng_streams = {}) {
  Checkpoint ckpt;
  ckpt.arch = net.arch_descriptor();
  ckpt.epoch = epoch;
  for (auto& p : net.params()) {
    std::vector<float> blob(static_cast<std::size_t>(p.value->size()));
    for (Eigen::Index i = 0; i < p.value->size(); ++i) blob[static_cast<std::size_t>(i)] = static_cast<float>((*p.value)[i]);
    ckpt.params.emplace_back(p.name, std::move(blob));
  }
  for (auto& s : net.state()) {
    std::vector<float> blob(static_cast<std::size_t>(s.value->size()));
    for (Eigen::Index i = 0; i < s.value->size(); ++i) blob[static_cast<std::size_t>(i)] = static_cast<float>((*s.value)[i]);
    ckpt.state.emplace_back(s.name, std::move(blob));
  }
  ckpt.rng_streams = rng_streams;
  return ckpt;
}

/// Writes a checkpoint's tensors back into the net. Name order, tensor names,
/// and sizes must all match the architecture exactly.
template <typename Scalar>
void restore(InjectableNet<Scalar>& net, const Checkpoint& ckpt) {
  if (ckpt.arch != net.arch_descriptor())
    fail(ErrorCode::IncompatibleCheckpoint,
         "checkpoint built for '" + ckpt.arch + "', net is '" + net.arch_descriptor() + "'");
  auto pour = [](const std::pair<std::string, std::vector<float>>& src, const std::string& name,
                 ArrayX<Scalar>* dst) {
    if (src.first != name)
      fail(ErrorCode::IncompatibleCheckpoint, "expected tensor '" + name + "', found '" + src.first + "'");
    if (static_cast<Eigen::Index>(src.second.size()) != dst->size())
      fail(ErrorCode::IncompatibleCheckpoint, "tensor '" + name + "' has wrong size");
    for (Eigen::Index i = 0; i < dst->size(); ++i) (*dst)[i] = static_cast<Scalar>(src.second[static_cast<std::size_t>(i)]);
  };
  auto ps = net.params();
  if (ckpt.params.size() != ps.size())
    fail(ErrorCode::IncompatibleCheckpoint, "checkpoint parameter count differs");
  for (std::size_t i = 0; i < ps.size(); ++i) pour(ckpt.params[i], ps[i].name, ps[i].value);
  auto ss = net.state();
  if (ckpt.state.size() != ss.size())
    fail(ErrorCode::IncompatibleCheckpoint, "checkpoint state count differs");
  for (std::size_t i = 0; i < ss.size(); ++i) pour(ckpt.state[i], ss[i].name, ss[i].value);
}

}  // namespace roam

#endif  // ROAM_CHECKPOINT_HPP
