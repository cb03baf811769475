#ifndef AVSAL_SCENE_HPP
#define AVSAL_SCENE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "avsal/kv.hpp"
#include "avsal/rng.hpp"
#include "avsal/tensor.hpp"

namespace avsal {

inline constexpr double kPi = 3.14159265358979323846;

struct ObjectSpec {
  std::string shape = "square";  // square | circle
  double size = 12.0;            // side or diameter, pixels
  double pos_r = 0.0, pos_c = 0.0;  // center at frame 0, pixels
  double vel_r = 0.0, vel_c = 0.0;  // pixels per frame
  std::array<double, 3> color{1.0, 1.0, 1.0};
  double tone_hz = 440.0;
  double level = 0.8;  // waveform amplitude
  bool sound = false;
};

struct SceneSpec {
  int canvas_h = 64, canvas_w = 64;
  int n_frames = 16;
  int fps = 8;
  int sample_rate = 8000;
  std::string fixation_mode = "on_sounding";  // on_sounding | on_center | mixed
  double noise_level = 0.0;
  int fixation_downscale = 4;  // fixation map resolution = canvas / this
  double position_jitter = 0.0;  // per-clip uniform offset, +- pixels
  bool randomize_sounding = false;  // one uniformly chosen object sounds
  std::vector<ObjectSpec> objects;

  int map_h() const { return canvas_h / fixation_downscale; }
  int map_w() const { return canvas_w / fixation_downscale; }
  int samples_per_frame() const { return sample_rate / fps; }

  void validate() const {
    if (n_frames < 2) throw ConfigError("n_frames: must be at least 2");
    if (canvas_h < 1 || canvas_w < 1) throw ConfigError("canvas_size: must be positive");
    if (fps < 1) throw ConfigError("fps: must be positive");
    if (sample_rate < fps || sample_rate % fps != 0)
      throw ConfigError("sample_rate: must be a positive multiple of fps");
    if (fixation_downscale < 1 || canvas_h % fixation_downscale != 0 ||
        canvas_w % fixation_downscale != 0)
      throw ConfigError("fixation_downscale: must divide both canvas dimensions");
    if (noise_level < 0.0 || noise_level > 1.0) throw ConfigError("noise_level: must be in [0,1]");
    if (position_jitter < 0.0) throw ConfigError("position_jitter: must be nonnegative");
    if (fixation_mode != "on_sounding" && fixation_mode != "on_center" && fixation_mode != "mixed")
      throw ConfigError(cat("fixation_mode: unknown mode ", fixation_mode));
    const bool needs_sound = fixation_mode == "on_sounding" || fixation_mode == "mixed";
    bool any_sound = randomize_sounding && !objects.empty();
    for (const auto& o : objects) {
      if (o.shape != "square" && o.shape != "circle")
        throw ConfigError(cat("object shape: unknown shape ", o.shape));
      if (o.size <= 0.0) throw ConfigError("object size: must be positive");
      if (o.level < 0.0 || o.level > 1.0) throw ConfigError("object level: must be in [0,1]");
      if (o.tone_hz <= 0.0 || o.tone_hz >= sample_rate / 2.0)
        throw ConfigError("object tone: must be positive and below the Nyquist rate");
      any_sound = any_sound || o.sound;
    }
    if (needs_sound && !any_sound)
      throw ConfigError(cat("fixation_mode: ", fixation_mode, " requires a sounding object"));
  }
};

struct AVClip {
  Tensor<float> frames;  // [T, 3, H, W], values in [0,1]
  Tensor<float> audio;   // [L], values in [-1,1]
  Tensor<float> fixmap;  // [H_s, W_s], sums to 1
  std::vector<std::pair<int, int>> fixation_points;  // (row, col) in map coords
  int sounding_index = -1;
  std::array<int, 4> sounding_bbox{0, 0, 0, 0};  // r0, c0, r1, c1 inclusive, map coords
};

// Hanning taper around center_index. Out-of-range samples contribute zero.
inline Tensor<float> window_audio(const Tensor<float>& waveform, std::int64_t center_index,
                                  int window_len) {
  if (window_len < 2) throw ArgumentError(cat("window_len must be at least 2, got ", window_len));
  if (waveform.rank() != 1) throw ShapeError(cat("waveform must be rank 1, got ", shape_str(waveform.shape())));
  const std::int64_t L = waveform.numel();
  const std::int64_t start = center_index - window_len / 2;
  Tensor<float> out({window_len});
  for (int i = 0; i < window_len; ++i) {
    const std::int64_t src = start + i;
    if (src < 0 || src >= L) continue;
    const double h = 0.5 * (1.0 - std::cos(2.0 * kPi * i / (window_len - 1)));
    out[i] = static_cast<float>(static_cast<double>(waveform[src]) * h);
  }
  return out;
}

// One Gaussian bump per point, normalized to a distribution. Computed in
// double so the stored float map still sums to 1 within 1e-6.
inline Tensor<float> fixations_to_density(const std::vector<std::pair<int, int>>& points,
                                          std::pair<int, int> shape, double blur_sigma) {
  if (points.empty()) throw ArgumentError("fixations_to_density: no points");
  if (blur_sigma <= 0.0) throw ArgumentError(cat("blur_sigma must be positive, got ", blur_sigma));
  const int H = shape.first, W = shape.second;
  if (H < 1 || W < 1) throw ArgumentError("fixations_to_density: empty shape");
  for (const auto& [r, c] : points)
    if (r < 0 || r >= H || c < 0 || c >= W)
      throw ArgumentError(cat("fixation (", r, ",", c, ") outside ", H, "x", W));

  std::vector<double> dens(static_cast<std::size_t>(H) * W, 0.0);
  const double inv = 1.0 / (2.0 * blur_sigma * blur_sigma);
  for (const auto& [pr, pc] : points)
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c) {
        const double dr = r - pr, dc = c - pc;
        dens[static_cast<std::size_t>(r) * W + c] += std::exp(-(dr * dr + dc * dc) * inv);
      }
  double z = 0.0;
  for (double d : dens) z += d;
  Tensor<float> out({H, W});
  for (std::int64_t i = 0; i < out.numel(); ++i)
    out[i] = static_cast<float>(dens[static_cast<std::size_t>(i)] / z);
  return out;
}

namespace detail {

struct PlacedObject {
  const ObjectSpec* spec;
  double base_r, base_c;  // jittered center at frame 0
  bool sounds;
};

inline double center_at(const PlacedObject& o, double t, bool row) {
  return row ? o.base_r + o.spec->vel_r * t : o.base_c + o.spec->vel_c * t;
}

}  // namespace detail

// Renders one synthetic clip. Deterministic: every random decision is drawn
// from Rng(seed) in a fixed order. force_sounding >= 0 makes exactly that
// object emit sound (used by dataset generation to balance classes);
// otherwise randomize_sounding picks one object uniformly, and failing that
// the per-object sound flags apply.
inline AVClip make_scene(const SceneSpec& spec, std::uint64_t seed, int force_sounding = -1) {
  spec.validate();
  if (force_sounding >= static_cast<int>(spec.objects.size()))
    throw ArgumentError(cat("force_sounding index ", force_sounding, " with ",
                            spec.objects.size(), " objects"));
  Rng rng(seed);
  const int T = spec.n_frames, H = spec.canvas_h, W = spec.canvas_w;

  // Per-clip random draws happen in one fixed order: jitter per object, then
  // the sounding choice, then pixel noise, then audio noise.
  std::vector<detail::PlacedObject> placed;
  placed.reserve(spec.objects.size());
  for (const auto& o : spec.objects) {
    const double dr = spec.position_jitter > 0 ? rng.uniform(-spec.position_jitter, spec.position_jitter) : 0.0;
    const double dc = spec.position_jitter > 0 ? rng.uniform(-spec.position_jitter, spec.position_jitter) : 0.0;
    placed.push_back({&o, o.pos_r + dr, o.pos_c + dc, o.sound});
  }
  int chosen = force_sounding;
  if (chosen < 0 && spec.randomize_sounding && !spec.objects.empty())
    chosen = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(spec.objects.size()) - 1));
  if (chosen >= 0)
    for (std::size_t i = 0; i < placed.size(); ++i) placed[i].sounds = static_cast<int>(i) == chosen;

  AVClip clip;
  clip.frames = Tensor<float>({T, 3, H, W});
  const double bg = 0.08;
  for (int t = 0; t < T; ++t) {
    float* frame = clip.frames.data() + static_cast<std::int64_t>(t) * 3 * H * W;
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(3) * H * W; ++i) {
      double v = bg;
      if (spec.noise_level > 0) v += rng.uniform(0.0, spec.noise_level);
      frame[i] = static_cast<float>(std::min(v, 1.0));
    }
    for (const auto& po : placed) {
      const double cr = detail::center_at(po, t, true), cc = detail::center_at(po, t, false);
      const double half = po.spec->size / 2.0;
      const int r0 = std::max(0, static_cast<int>(std::floor(cr - half)));
      const int r1 = std::min(H - 1, static_cast<int>(std::ceil(cr + half)));
      const int c0 = std::max(0, static_cast<int>(std::floor(cc - half)));
      const int c1 = std::min(W - 1, static_cast<int>(std::ceil(cc + half)));
      const bool circle = po.spec->shape == "circle";
      for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
          const double dr = r - cr, dc = c - cc;
          const bool inside = circle ? (dr * dr + dc * dc <= half * half)
                                     : (std::abs(dr) <= half && std::abs(dc) <= half);
          if (!inside) continue;
          for (int ch = 0; ch < 3; ++ch)
            frame[static_cast<std::int64_t>(ch) * H * W + static_cast<std::int64_t>(r) * W + c] =
                static_cast<float>(std::clamp(po.spec->color[static_cast<std::size_t>(ch)], 0.0, 1.0));
        }
    }
  }

  const std::int64_t L = static_cast<std::int64_t>(T) * spec.samples_per_frame();
  clip.audio = Tensor<float>({static_cast<int>(L)});
  int n_sounding = 0;
  for (const auto& po : placed) n_sounding += po.sounds ? 1 : 0;
  if (n_sounding > 0) {
    for (std::int64_t s = 0; s < L; ++s) {
      double v = 0.0;
      for (const auto& po : placed)
        if (po.sounds)
          v += po.spec->level * std::sin(2.0 * kPi * po.spec->tone_hz * static_cast<double>(s) /
                                         spec.sample_rate);
      clip.audio[s] = static_cast<float>(v / n_sounding);
    }
  }
  if (spec.noise_level > 0)
    for (std::int64_t s = 0; s < L; ++s)
      clip.audio[s] = static_cast<float>(std::clamp(
          static_cast<double>(clip.audio[s]) + 0.1 * spec.noise_level * rng.uniform(-1.0, 1.0),
          -1.0, 1.0));

  // Fixation target: positions are taken at the clip's central frame, the
  // same frame evaluation predicts.
  const int t_mid = T / 2;
  const int Hs = spec.map_h(), Ws = spec.map_w();
  const int d = spec.fixation_downscale;
  auto to_map = [&](double canvas_r, double canvas_c) {
    const int mr = std::clamp(static_cast<int>(std::floor(canvas_r / d)), 0, Hs - 1);
    const int mc = std::clamp(static_cast<int>(std::floor(canvas_c / d)), 0, Ws - 1);
    return std::pair<int, int>(mr, mc);
  };

  int loudest = -1;
  for (std::size_t i = 0; i < placed.size(); ++i)
    if (placed[i].sounds && (loudest < 0 || placed[i].spec->level > placed[static_cast<std::size_t>(loudest)].spec->level))
      loudest = static_cast<int>(i);
  clip.sounding_index = loudest;

  if (loudest >= 0) {
    const auto& po = placed[static_cast<std::size_t>(loudest)];
    const double cr = detail::center_at(po, t_mid, true), cc = detail::center_at(po, t_mid, false);
    const double half = po.spec->size / 2.0;
    const auto lo = to_map(cr - half, cc - half);
    const auto hi = to_map(cr + half, cc + half);
    clip.sounding_bbox = {lo.first, lo.second, hi.first, hi.second};
  }

  std::vector<std::pair<int, int>> pts;
  if (spec.fixation_mode == "on_sounding" || spec.fixation_mode == "mixed") {
    if (loudest < 0) throw ConfigError("fixation_mode: no sounding object to fixate");
    const auto& po = placed[static_cast<std::size_t>(loudest)];
    pts.push_back(to_map(detail::center_at(po, t_mid, true), detail::center_at(po, t_mid, false)));
  }
  if (spec.fixation_mode == "on_center" || spec.fixation_mode == "mixed")
    pts.emplace_back(Hs / 2, Ws / 2);
  clip.fixation_points = pts;
  clip.fixmap = fixations_to_density(pts, {Hs, Ws}, 0.05 * std::min(Hs, Ws));
  return clip;
}

// ---- scene spec text format ----------------------------------------------
//
// Flat key=value lines; objects use indexed keys:
//   canvas_h=64
//   object.0.shape=square
//   object.0.pos=20,20
// Unknown keys are errors.
inline SceneSpec parse_scene_spec(const std::string& text) {
  SceneSpec spec;
  std::vector<ObjectSpec> objects;
  auto object_at = [&objects](std::size_t i) -> ObjectSpec& {
    if (i >= objects.size()) objects.resize(i + 1);
    return objects[i];
  };

  for (const auto& [key, val] : parse_kv_text(text, "scene spec")) {
    if (key == "canvas_h") spec.canvas_h = static_cast<int>(kv_int(key, val));
    else if (key == "canvas_w") spec.canvas_w = static_cast<int>(kv_int(key, val));
    else if (key == "n_frames") spec.n_frames = static_cast<int>(kv_int(key, val));
    else if (key == "fps") spec.fps = static_cast<int>(kv_int(key, val));
    else if (key == "sample_rate") spec.sample_rate = static_cast<int>(kv_int(key, val));
    else if (key == "fixation_mode") spec.fixation_mode = val;
    else if (key == "noise_level") spec.noise_level = kv_double(key, val);
    else if (key == "fixation_downscale") spec.fixation_downscale = static_cast<int>(kv_int(key, val));
    else if (key == "position_jitter") spec.position_jitter = kv_double(key, val);
    else if (key == "randomize_sounding") spec.randomize_sounding = kv_bool(key, val);
    else if (key.rfind("object.", 0) == 0) {
      const auto rest = key.substr(7);
      const auto dot = rest.find('.');
      if (dot == std::string::npos) throw ConfigError(cat("bad object key ", key));
      std::size_t idx = 0;
      try {
        idx = static_cast<std::size_t>(std::stoul(rest.substr(0, dot)));
      } catch (const std::exception&) {
        throw ConfigError(cat("bad object index in ", key));
      }
      const std::string field = rest.substr(dot + 1);
      ObjectSpec& o = object_at(idx);
      if (field == "shape") o.shape = val;
      else if (field == "size") o.size = kv_double(key, val);
      else if (field == "pos") {
        const auto v = kv_list(key, val);
        if (v.size() != 2) throw ConfigError(cat(key, ": expected row,col"));
        o.pos_r = v[0];
        o.pos_c = v[1];
      } else if (field == "vel") {
        const auto v = kv_list(key, val);
        if (v.size() != 2) throw ConfigError(cat(key, ": expected row,col"));
        o.vel_r = v[0];
        o.vel_c = v[1];
      } else if (field == "color") {
        const auto v = kv_list(key, val);
        if (v.size() != 3) throw ConfigError(cat(key, ": expected r,g,b"));
        o.color = {v[0], v[1], v[2]};
      } else if (field == "tone") o.tone_hz = kv_double(key, val);
      else if (field == "level") o.level = kv_double(key, val);
      else if (field == "sound") o.sound = kv_bool(key, val);
      else throw ConfigError(cat("unknown object field in ", key));
    } else {
      throw ConfigError(cat("unknown scene spec key ", key));
    }
  }
  spec.objects = std::move(objects);
  spec.validate();
  return spec;
}

}  // namespace avsal

#endif  // AVSAL_SCENE_HPP
