#include "roam/checkpoint.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace roam {

namespace {

constexpr char kMagic[8] = {'R', 'O', 'A', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is, const std::string& path) {
  const std::uint32_t n = get_u32(is);
  if (!is || n > (1u << 28)) fail(ErrorCode::MalformedFile, path + ": corrupt string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

void put_blob(std::ostream& os, const std::vector<float>& v) {
  put_u32(os, static_cast<std::uint32_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::vector<float> get_blob(std::istream& is, const std::string& path) {
  const std::uint32_t n = get_u32(is);
  if (!is || n > (1u << 28)) fail(ErrorCode::MalformedFile, path + ": corrupt tensor length");
  std::vector<float> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  // Write to a sibling temp file, then rename: readers never see a torn file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorCode::IoFailure, "cannot open " + tmp + " for writing");
    os.write(kMagic, sizeof(kMagic));
    put_u32(os, kVersion);
    put_string(os, ckpt.arch);
    put_u32(os, static_cast<std::uint32_t>(ckpt.epoch));
    put_u32(os, static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& [name, blob] : ckpt.params) {
      put_string(os, name);
      put_blob(os, blob);
    }
    put_u32(os, static_cast<std::uint32_t>(ckpt.state.size()));
    for (const auto& [name, blob] : ckpt.state) {
      put_string(os, name);
      put_blob(os, blob);
    }
    put_u32(os, static_cast<std::uint32_t>(ckpt.rng_streams.size()));
    for (const auto& [name, state] : ckpt.rng_streams) {
      put_string(os, name);
      put_string(os, state);
    }
    if (!os) fail(ErrorCode::IoFailure, "short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot move " + tmp + " into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::MissingCheckpoint, path + " does not exist or is unreadable");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || !std::equal(magic, magic + 8, kMagic))
    fail(ErrorCode::MalformedFile, path + ": not a checkpoint file");
  const std::uint32_t version = get_u32(is);
  if (version != kVersion)
    fail(ErrorCode::IncompatibleCheckpoint,
         path + ": version " + std::to_string(version) + ", expected " + std::to_string(kVersion));
  Checkpoint ckpt;
  ckpt.arch = get_string(is, path);
  ckpt.epoch = static_cast<std::int32_t>(get_u32(is));
  const std::uint32_t n_params = get_u32(is);
  for (std::uint32_t i = 0; is && i < n_params; ++i) {
    std::string name = get_string(is, path);
    ckpt.params.emplace_back(std::move(name), get_blob(is, path));
  }
  const std::uint32_t n_state = get_u32(is);
  for (std::uint32_t i = 0; is && i < n_state; ++i) {
    std::string name = get_string(is, path);
    ckpt.state.emplace_back(std::move(name), get_blob(is, path));
  }
  const std::uint32_t n_rng = get_u32(is);
  for (std::uint32_t i = 0; is && i < n_rng; ++i) {
    std::string name = get_string(is, path);
    ckpt.rng_streams[std::move(name)] = get_string(is, path);
  }
  if (!is) fail(ErrorCode::MalformedFile, path + ": truncated checkpoint");
  return ckpt;
}

}  // namespace roam
