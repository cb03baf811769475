#ifndef AVSAL_DATASET_HPP
#define AVSAL_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "avsal/kv.hpp"
#include "avsal/scene.hpp"
#include "avsal/tensor.hpp"

namespace avsal {

// On-disk clip layout: each clip directory holds frames.bin / audio.bin /
// fixmap.bin (one text header line with the dimensions, then raw
// little-endian float32), plus meta.txt. manifest.txt at the dataset root
// lists clip directories, one per line.

namespace detail {

inline void write_float_array(const std::string& path, const std::string& header,
                              const Tensor<float>& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(cat("cannot write ", path));
  out << header << "\n";
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (!out) throw IoError(cat("failed writing ", path));
}

inline Tensor<float> read_float_array(const std::string& path, int expect_dims) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(cat("cannot open ", path));
  std::string header;
  if (!std::getline(in, header)) throw IoError(cat("missing header in ", path));
  std::istringstream hs(header);
  Shape shape;
  std::int64_t d;
  while (hs >> d) shape.push_back(static_cast<int>(d));
  if (static_cast<int>(shape.size()) != expect_dims)
    throw IoError(cat(path, ": header \"", header, "\" should have ", expect_dims, " dimensions"));
  Tensor<float> t(shape);
  in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(t.numel() * sizeof(float)))
    throw IoError(cat(path, ": truncated payload for shape ", shape_str(shape)));
  return t;
}

}  // namespace detail

inline void write_clip(const std::string& dir, const AVClip& clip, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const int T = clip.frames.dim(0), C = clip.frames.dim(1), H = clip.frames.dim(2),
            W = clip.frames.dim(3);
  detail::write_float_array(dir + "/frames.bin", cat(T, " ", C, " ", H, " ", W), clip.frames);
  detail::write_float_array(dir + "/audio.bin", cat(clip.audio.numel()), clip.audio);
  detail::write_float_array(dir + "/fixmap.bin", cat(clip.fixmap.dim(0), " ", clip.fixmap.dim(1)),
                            clip.fixmap);

  std::ofstream meta(dir + "/meta.txt");
  if (!meta) throw IoError(cat("cannot write ", dir, "/meta.txt"));
  meta << "seed=" << seed << "\n";
  meta << "sounding_index=" << clip.sounding_index << "\n";
  meta << "sounding_bbox=" << clip.sounding_bbox[0] << "," << clip.sounding_bbox[1] << ","
       << clip.sounding_bbox[2] << "," << clip.sounding_bbox[3] << "\n";
  meta << "fixation_points=";
  for (std::size_t i = 0; i < clip.fixation_points.size(); ++i) {
    if (i) meta << ";";
    meta << clip.fixation_points[i].first << "," << clip.fixation_points[i].second;
  }
  meta << "\n";
}

inline AVClip read_clip(const std::string& dir) {
  AVClip clip;
  clip.frames = detail::read_float_array(dir + "/frames.bin", 4);
  clip.audio = detail::read_float_array(dir + "/audio.bin", 1);
  clip.fixmap = detail::read_float_array(dir + "/fixmap.bin", 2);

  for (const auto& [key, val] : parse_kv_text(read_text_file(dir + "/meta.txt"), "meta.txt")) {
    if (key == "seed") continue;
    else if (key == "sounding_index") clip.sounding_index = static_cast<int>(kv_int(key, val));
    else if (key == "sounding_bbox") {
      const auto v = kv_list(key, val);
      if (v.size() != 4) throw IoError(cat(dir, "/meta.txt: sounding_bbox needs 4 entries"));
      for (int i = 0; i < 4; ++i) clip.sounding_bbox[static_cast<std::size_t>(i)] = static_cast<int>(v[static_cast<std::size_t>(i)]);
    } else if (key == "fixation_points") {
      std::istringstream in(val);
      std::string pt;
      while (std::getline(in, pt, ';')) {
        if (pt.empty()) continue;
        const auto comma = pt.find(',');
        if (comma == std::string::npos) throw IoError(cat(dir, "/meta.txt: bad fixation point ", pt));
        clip.fixation_points.emplace_back(static_cast<int>(kv_int(key, pt.substr(0, comma))),
                                          static_cast<int>(kv_int(key, pt.substr(comma + 1))));
      }
    }
    // unrecognized meta keys are informational, not an error
  }
  return clip;
}

inline void write_manifest(const std::string& root, const std::vector<std::string>& clip_dirs) {
  std::ofstream out(root + "/manifest.txt");
  if (!out) throw IoError(cat("cannot write ", root, "/manifest.txt"));
  for (const auto& d : clip_dirs) out << d << "\n";
}

// Returns clip directories resolved against the dataset root.
inline std::vector<std::string> read_manifest(const std::string& root) {
  const std::string path = root + "/manifest.txt";
  std::ifstream in(path);
  if (!in) throw IoError(cat("cannot open ", path));
  std::vector<std::string> dirs;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    dirs.push_back(line.front() == '/' ? line : root + "/" + line);
  }
  if (dirs.empty()) throw IoError(cat(path, ": manifest lists no clips"));
  return dirs;
}

// Generates n clips under out_dir and writes the manifest. Per-clip seeds are
// derived from the base seed; when randomize_sounding is set the sounding
// object cycles round-robin so classes stay balanced in small datasets.
inline std::vector<std::string> generate_dataset(const SceneSpec& spec, int n, std::uint64_t seed,
                                                 const std::string& out_dir) {
  if (n < 1) throw ArgumentError("clip count must be positive");
  spec.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t clip_seed = seed * 1000003ull + static_cast<std::uint64_t>(i);
    const int force = spec.randomize_sounding && !spec.objects.empty()
                          ? i % static_cast<int>(spec.objects.size())
                          : -1;
    AVClip clip = make_scene(spec, clip_seed, force);
    std::ostringstream name;
    name << "clip_" << std::setw(4) << std::setfill('0') << i;
    write_clip(out_dir + "/" + name.str(), clip, clip_seed);
    names.push_back(name.str());
  }
  write_manifest(out_dir, names);
  return names;
}

}  // namespace avsal

#endif  // AVSAL_DATASET_HPP
