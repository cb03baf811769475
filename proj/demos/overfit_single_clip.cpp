// End-to-end walkthrough on one synthetic clip: generate a scene with a
// sounding square, overfit the full model onto it, then compare the
// predicted saliency map against the fixation density and run the
// sliding-window predictor over every frame.
//
// Writes its scratch dataset under ./demo_data and prints ASCII heatmaps,
// so it needs no viewer. Runtime is about half a minute.

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <string>

#include "avsal/dataset.hpp"
#include "avsal/metrics.hpp"
#include "avsal/train.hpp"

using namespace avsal;

namespace {

// 10-step intensity ramp, scaled to the map's own maximum.
void print_map(const std::string& title, const Tensor<float>& map) {
  static const char ramp[] = " .:-=+*#%@";
  float peak = 0.0f;
  for (std::int64_t i = 0; i < map.numel(); ++i) peak = std::max(peak, map[i]);
  std::cout << title << "\n";
  for (std::int64_t r = 0; r < map.dim(0); ++r) {
    std::cout << "  ";
    for (std::int64_t c = 0; c < map.dim(1); ++c) {
      const float v = peak > 0.0f ? map.at({static_cast<int>(r), static_cast<int>(c)}) / peak : 0.0f;
      const int idx = std::min(9, static_cast<int>(v * 9.999f));
      std::cout << ramp[idx] << ramp[idx];
    }
    std::cout << "\n";
  }
}

SceneSpec demo_scene() {
  SceneSpec s;
  s.canvas_h = s.canvas_w = 32;
  s.n_frames = 16;
  s.fps = 8;
  s.sample_rate = 3400;
  s.noise_level = 0.0;
  s.position_jitter = 0.0;
  s.fixation_mode = "on_sounding";
  s.fixation_downscale = 4;
  ObjectSpec o;
  o.shape = "square";
  o.size = 7;
  o.pos_r = o.pos_c = 10;
  o.vel_r = 0.25;
  o.vel_c = 0.4;
  o.color = {1.0, 0.3, 0.2};
  o.tone_hz = 440.0;
  o.level = 0.8;
  o.sound = true;
  s.objects = {o};
  return s;
}

}  // namespace

int main() {
  try {
    generate_dataset(demo_scene(), 1, 7, "demo_data");
    const auto data = load_dataset("demo_data");
    const auto& clip = data[0].clip;
    std::cout << "clip: " << clip.frames.dim(0) << " frames of " << clip.frames.dim(2) << "x"
              << clip.frames.dim(3) << ", " << clip.audio.numel() << " audio samples\n\n";

    TrainConfig cfg;
    cfg.dataset_path = "demo_data";
    cfg.epochs = 120;
    cfg.batch_size = 1;
    cfg.learning_rate = 5e-3;
    cfg.channels = {4, 8, 12, 16};
    cfg.d_a = 16;
    cfg.seed = 0;

    std::cout << "training full variant for " << cfg.epochs << " epochs...\n";
    TrainRun run = train(cfg);
    for (std::size_t i = 0; i < run.logs.size(); i += 20) {
      const EpochLog& lg = run.logs[i];
      std::cout << "  epoch " << std::setw(3) << lg.epoch << "  l_fuse " << std::fixed
                << std::setprecision(4) << lg.l_fuse << "  l_final " << lg.l_final << "\n";
    }
    std::cout << "\n";

    Tape<float> tape;
    const auto fwd = forward_clip(run.model, tape, clip);
    print_map("fixation density (target):", clip.fixmap);
    print_map("\npredicted saliency:", fwd.f_map.value());
    print_map("\naudio cue map:", fwd.f_audio.value());

    const Tensor<double> pd = fwd.f_map.value().template cast<double>();
    const auto cc = metric_cc(pd, clip.fixmap.template cast<double>());
    const auto nss = metric_nss(pd, clip.fixation_points);
    std::cout << "\ncc " << std::setprecision(3) << cc.value << "  nss " << nss.value << "\n";

    const auto maps = predict_video(run.model, clip.frames, clip.audio);
    float worst = 0.0f;
    for (const auto& m : maps) {
      float s = 0.0f;
      for (std::int64_t i = 0; i < m.numel(); ++i) s += m[i];
      worst = std::max(worst, std::abs(s - 1.0f));
    }
    std::cout << "sliding-window predict: " << maps.size() << " maps, worst |sum-1| " << std::scientific
              << worst << "\n";
  } catch (const std::exception& e) {
    std::cerr << "demo failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
