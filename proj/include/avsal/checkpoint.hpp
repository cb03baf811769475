#ifndef AVSAL_CHECKPOINT_HPP
#define AVSAL_CHECKPOINT_HPP

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "avsal/common.hpp"
#include "avsal/config.hpp"
#include "avsal/params.hpp"
#include "avsal/tensor.hpp"

namespace avsal {

// Binary layout (all integers little-endian):
//   "AVCK" | u32 version | u32 cfg_len | cfg text | u64 epoch | 4 x u64 rng
//   | u32 n_params | per param: u32 name_len, name, u32 rank, u32 dims[rank],
//     f32 data[prod(dims)]
// Documented for external readers in checkpoint_format.md.
constexpr std::uint32_t kCheckpointVersion = 1;

struct LoadedCheckpoint {
  TrainConfig cfg;
  std::uint64_t epoch = 0;
  std::array<std::uint64_t, 4> rng_state{};
  std::vector<std::pair<std::string, Tensor<float>>> tensors;
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError(cat("checkpoint truncated: ", path));
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError(cat("checkpoint truncated: ", path));
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_f32_array(std::ostream& out, const float* data, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, data + i, 4);
    put_u32(out, bits);
  }
}

inline void get_f32_array(std::istream& in, float* data, std::int64_t n, const std::string& path) {
  for (std::int64_t i = 0; i < n; ++i) {
    const std::uint32_t bits = get_u32(in, path);
    std::memcpy(data + i, &bits, 4);
  }
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ParamStore<float>& store,
                            const TrainConfig& cfg, std::uint64_t epoch,
                            const std::array<std::uint64_t, 4>& rng_state) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(cat("cannot write checkpoint ", path));
  out.write("AVCK", 4);
  detail::put_u32(out, kCheckpointVersion);
  const std::string cfg_text = serialize_train_config(cfg);
  detail::put_u32(out, static_cast<std::uint32_t>(cfg_text.size()));
  out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
  detail::put_u64(out, epoch);
  for (std::uint64_t s : rng_state) detail::put_u64(out, s);
  detail::put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    const std::string& name = store.name(i);
    const Tensor<float>& t = store.value(i);
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
    detail::put_f32_array(out, t.data(), t.numel());
  }
  if (!out) throw IoError(cat("failed writing checkpoint ", path));
}

inline LoadedCheckpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(cat("cannot open checkpoint ", path));
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "AVCK")
    throw IoError(cat("not a checkpoint file: ", path));
  const std::uint32_t version = detail::get_u32(in, path);
  if (version != kCheckpointVersion)
    throw IoError(cat("unsupported checkpoint version ", version, " in ", path));
  LoadedCheckpoint lc;
  const std::uint32_t cfg_len = detail::get_u32(in, path);
  std::string cfg_text(cfg_len, '\0');
  if (!in.read(cfg_text.data(), cfg_len)) throw IoError(cat("checkpoint truncated: ", path));
  lc.cfg = parse_train_config(cfg_text);
  lc.epoch = detail::get_u64(in, path);
  for (auto& s : lc.rng_state) s = detail::get_u64(in, path);
  const std::uint32_t n = detail::get_u32(in, path);
  lc.tensors.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t name_len = detail::get_u32(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw IoError(cat("checkpoint truncated: ", path));
    const std::uint32_t rank = detail::get_u32(in, path);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<int>(detail::get_u32(in, path));
    Tensor<float> t(shape);
    detail::get_f32_array(in, t.data(), t.numel(), path);
    lc.tensors.emplace_back(std::move(name), std::move(t));
  }
  return lc;
}

// Copies loaded tensors into an existing store. The two parameter sets must
// agree exactly, names and shapes both ways.
inline void apply_checkpoint(const LoadedCheckpoint& lc, ParamStore<float>& store) {
  if (lc.tensors.size() != store.size())
    throw ArgumentError(cat("checkpoint holds ", lc.tensors.size(), " parameters, model expects ",
                            store.size()));
  for (const auto& [name, tensor] : lc.tensors) {
    Tensor<float>& dst = store.value(name);  // throws on unknown name
    if (!dst.same_shape(tensor))
      throw ArgumentError(cat("checkpoint parameter ", name, " has shape ", shape_str(tensor.shape()),
                              ", model expects ", shape_str(dst.shape())));
    dst = tensor;
  }
}

}  // namespace avsal

#endif  // AVSAL_CHECKPOINT_HPP
