#ifndef AVSAL_TRAIN_HPP
#define AVSAL_TRAIN_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "avsal/checkpoint.hpp"
#include "avsal/config.hpp"
#include "avsal/dataset.hpp"
#include "avsal/metrics.hpp"
#include "avsal/model.hpp"
#include "avsal/scene.hpp"

namespace avsal {

struct DatasetClip {
  std::string id;
  std::string dir;
  AVClip clip;
};

inline std::vector<DatasetClip> load_dataset(const std::string& root) {
  std::vector<DatasetClip> out;
  for (const std::string& dir : read_manifest(root)) {
    DatasetClip d;
    d.dir = dir;
    const auto slash = dir.find_last_of('/');
    d.id = slash == std::string::npos ? dir : dir.substr(slash + 1);
    d.clip = read_clip(dir);
    out.push_back(std::move(d));
  }
  return out;
}

// Fills in output_h/output_w from the data when unset, and cross-checks the
// frames, the fixation maps, and any explicit config values.
inline TrainConfig resolve_output_shape(TrainConfig cfg, const std::vector<DatasetClip>& data) {
  if (data.empty()) throw ArgumentError("resolve_output_shape: empty dataset");
  const Shape& fs = data.front().clip.frames.shape();
  if (fs.size() != 4) throw IoError(cat(data.front().dir, ": frames are not [T,3,H,W]"));
  const int derived_h = fs[2] / 4, derived_w = fs[3] / 4;
  if (cfg.output_h == 0) cfg.output_h = derived_h;
  if (cfg.output_w == 0) cfg.output_w = derived_w;
  if (cfg.output_h != derived_h || cfg.output_w != derived_w)
    throw ConfigError(cat("output_h/output_w ", cfg.output_h, "x", cfg.output_w,
                          " do not match the dataset's ", derived_h, "x", derived_w));
  for (const auto& d : data) {
    if (d.clip.frames.shape() != fs)
      throw IoError(cat(d.dir, ": frame shape ", shape_str(d.clip.frames.shape()),
                        " differs from ", shape_str(fs)));
    if (d.clip.fixmap.shape() != Shape{cfg.output_h, cfg.output_w})
      throw IoError(cat(d.dir, ": fixation map ", shape_str(d.clip.fixmap.shape()),
                        " does not match the model output ", cfg.output_h, "x", cfg.output_w));
  }
  return cfg;
}

// Audio for a whole training clip: taper the full span around its middle.
inline Tensor<float> clip_audio_window(const AVClip& clip) {
  const std::int64_t len = clip.audio.numel();
  return window_audio(clip.audio, len / 2, len);
}

struct EpochLog {
  int epoch = 0;
  double l_a = 0.0, l_ms = 0.0, l_fuse = 0.0, l_final = 0.0;
};

struct TrainRun {
  TrainConfig cfg;  // resolved (output shape filled in)
  Model<float> model;
  std::vector<EpochLog> logs;
  std::array<std::uint64_t, 4> rng_state{};

  TrainRun(TrainConfig c, Model<float> m) : cfg(std::move(c)), model(std::move(m)) {}
};

// Adam over the summed losses, one optimizer step per batch, gradients
// averaged across the batch. Checkpoints overwrite ckpt_path every epoch.
inline TrainRun train(TrainConfig cfg, const std::string& ckpt_path = "",
                      std::ostream* log_out = nullptr) {
  cfg.validate();
  std::vector<DatasetClip> data = load_dataset(cfg.dataset_path);
  cfg = resolve_output_shape(cfg, data);

  Rng rng(cfg.seed);
  TrainRun run(cfg, Model<float>(cfg, rng));
  Model<float>& model = run.model;
  ParamStore<float>& store = model.params();
  Adam<float> adam(store, cfg.learning_rate);

  std::vector<Tensor<float>> audio_windows;
  audio_windows.reserve(data.size());
  for (const auto& d : data) audio_windows.push_back(clip_audio_window(d.clip));

  std::vector<Tensor<float>> grads;
  grads.reserve(store.size());
  for (std::size_t p = 0; p < store.size(); ++p) grads.emplace_back(store.value(p).shape());

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);

    EpochLog log;
    log.epoch = epoch;
    std::size_t done = 0;
    while (done < order.size()) {
      const std::size_t batch_n = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                                        order.size() - done);
      const float inv = 1.0f / static_cast<float>(batch_n);
      for (auto& g : grads)
        for (std::int64_t j = 0; j < g.numel(); ++j) g[j] = 0.0f;

      for (std::size_t k = 0; k < batch_n; ++k) {
        const std::size_t ci = order[done + k];
        Tape<float> tape;
        Bound<float> bound = bind_params(tape, store, true);
        auto fwd = model.forward(tape, bound, data[ci].clip.frames, audio_windows[ci]);
        auto losses = model.losses(tape, fwd, data[ci].clip.fixmap);
        tape.backward(losses.l_final);
        for (std::size_t p = 0; p < store.size(); ++p) {
          const Tensor<float>& g = bound[p].grad();
          Tensor<float>& acc = grads[p];
          for (std::int64_t j = 0; j < g.numel(); ++j) acc[j] += g[j] * inv;
        }
        log.l_a += static_cast<double>(losses.l_a.value()[0]);
        log.l_ms += static_cast<double>(losses.l_ms.value()[0]);
        log.l_fuse += static_cast<double>(losses.l_fuse.value()[0]);
        log.l_final += static_cast<double>(losses.l_final.value()[0]);
      }
      adam.step(store, grads);
      done += batch_n;
    }
    const double inv_n = 1.0 / static_cast<double>(data.size());
    log.l_a *= inv_n;
    log.l_ms *= inv_n;
    log.l_fuse *= inv_n;
    log.l_final *= inv_n;
    run.logs.push_back(log);
    if (log_out)
      (*log_out) << "epoch " << epoch << " l_a " << log.l_a << " l_ms " << log.l_ms << " l_fuse "
                 << log.l_fuse << " l_final " << log.l_final << "\n";
    if (!ckpt_path.empty())
      save_checkpoint(ckpt_path, store, cfg, static_cast<std::uint64_t>(epoch), rng.state());
  }
  run.rng_state = rng.state();
  return run;
}

inline std::pair<Model<float>, LoadedCheckpoint> load_model(const std::string& ckpt_path) {
  LoadedCheckpoint lc = read_checkpoint(ckpt_path);
  Rng rng(lc.cfg.seed);
  Model<float> model(lc.cfg, rng);
  apply_checkpoint(lc, model.params());
  return {std::move(model), std::move(lc)};
}

// One inference pass over a stored clip: full 16-frame window, audio tapered
// about the clip's middle sample, exactly as during training.
inline Model<float>::Fwd forward_clip(const Model<float>& model, Tape<float>& tape,
                                      const AVClip& clip) {
  Bound<float> bound = bind_params(tape, model.params(), false);
  return model.forward(tape, bound, clip.frames, clip_audio_window(clip));
}

struct ClipMetricsRow {
  std::string id;
  MetricReport r;
  bool cc_degenerate = false, nss_degenerate = false;
};

inline MetricReport mean_report(const std::vector<ClipMetricsRow>& rows) {
  MetricReport m;
  if (rows.empty()) return m;
  for (const auto& row : rows) {
    m.cc += row.r.cc;
    m.nss += row.r.nss;
    m.auc_j += row.r.auc_j;
    m.sauc += row.r.sauc;
    m.sim += row.r.sim;
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  m.cc *= inv;
  m.nss *= inv;
  m.auc_j *= inv;
  m.sauc *= inv;
  m.sim *= inv;
  return m;
}

// Scores the saliency prediction for each clip's central frame against its
// fixation ground truth. Shuffled-AUC negatives pool the fixations of every
// other clip; with a single clip there is no pool and sAUC degenerates to 0.5.
inline std::vector<ClipMetricsRow> evaluate_model(const Model<float>& model,
                                                  const std::vector<DatasetClip>& data,
                                                  std::uint64_t sauc_seed) {
  if (data.empty()) throw ArgumentError("evaluate_model: empty dataset");
  std::vector<ClipMetricsRow> rows;
  rows.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    Tape<float> tape;
    auto fwd = forward_clip(model, tape, data[i].clip);
    const Tensor<double> p = fwd.f_map.value().template cast<double>();
    const Tensor<double> g = data[i].clip.fixmap.template cast<double>();

    FixPoints other;
    for (std::size_t j = 0; j < data.size(); ++j)
      if (j != i)
        other.insert(other.end(), data[j].clip.fixation_points.begin(),
                     data[j].clip.fixation_points.end());

    ClipMetricsRow row;
    row.id = data[i].id;
    const MetricValue cc = metric_cc(p, g);
    const MetricValue nss = metric_nss(p, data[i].clip.fixation_points);
    row.r.cc = cc.value;
    row.cc_degenerate = cc.degenerate;
    row.r.nss = nss.value;
    row.nss_degenerate = nss.degenerate;
    row.r.auc_j = metric_auc_judd(p, data[i].clip.fixation_points);
    row.r.sauc = other.empty() ? 0.5 : metric_sauc(p, data[i].clip.fixation_points, other, sauc_seed);
    row.r.sim = metric_sim(p, g);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_metrics_csv(const std::string& path, const std::vector<ClipMetricsRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError(cat("cannot write report ", path));
  out << "clip_id,cc,nss,auc_j,sauc,sim\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& row : rows)
    out << row.id << ',' << row.r.cc << ',' << row.r.nss << ',' << row.r.auc_j << ',' << row.r.sauc
        << ',' << row.r.sim << "\n";
  const MetricReport m = mean_report(rows);
  out << "MEAN," << m.cc << ',' << m.nss << ',' << m.auc_j << ',' << m.sauc << ',' << m.sim << "\n";
  if (!out) throw IoError(cat("failed writing report ", path));
}

// Streaming inference: one map per frame from the 16-frame window ending at
// that frame. Early frames replicate the first frame; the audio span slides
// with the window but is clamped to the waveform so it never pads when the
// recording covers it.
inline std::vector<Tensor<float>> predict_video(const Model<float>& model,
                                                const Tensor<float>& frames_tchw,
                                                const Tensor<float>& audio) {
  const Shape& fs = frames_tchw.shape();
  if (fs.size() != 4 || fs[1] != 3)
    throw ShapeError(cat("predict_video: want frames [N,3,H,W], got ", shape_str(fs)));
  if (audio.shape().size() != 1)
    throw ShapeError(cat("predict_video: want a rank-1 waveform, got ", shape_str(audio.shape())));
  const int n = fs[0], h = fs[2], w = fs[3];
  const std::int64_t len = audio.numel();
  if (len % n != 0)
    throw ArgumentError(cat("predict_video: ", len, " samples do not divide evenly over ", n, " frames"));
  const std::int64_t spf = len / n;
  const std::int64_t wl = 16 * spf;
  const std::int64_t hw3 = static_cast<std::int64_t>(3) * h * w;

  std::vector<Tensor<float>> maps;
  maps.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Tensor<float> window({16, 3, h, w});
    for (int k = 0; k < 16; ++k) {
      const int src = std::max(i - 15 + k, 0);
      for (std::int64_t j = 0; j < hw3; ++j)
        window[static_cast<std::int64_t>(k) * hw3 + j] = frames_tchw[static_cast<std::int64_t>(src) * hw3 + j];
    }
    std::int64_t start = static_cast<std::int64_t>(i - 15) * spf;
    start = std::max<std::int64_t>(0, std::min(start, std::max<std::int64_t>(0, len - wl)));
    Tensor<float> win_audio = window_audio(audio, start + wl / 2, wl);

    Tape<float> tape;
    Bound<float> bound = bind_params(tape, model.params(), false);
    auto fwd = model.forward(tape, bound, window, win_audio);
    maps.push_back(fwd.f_map.value());
  }
  return maps;
}

struct AblateRow {
  std::string variant;
  MetricReport mean;
};

// Trains each requested variant from the same base config and scores it on
// eval_dir (the training set when eval_dir is empty).
inline std::vector<AblateRow> run_ablation(const TrainConfig& base,
                                           const std::vector<std::string>& variants,
                                           const std::string& eval_dir = "",
                                           std::ostream* log_out = nullptr) {
  if (variants.empty()) throw ArgumentError("run_ablation: no variants given");
  std::vector<AblateRow> rows;
  rows.reserve(variants.size());
  for (const std::string& name : variants) {
    TrainConfig cfg = base;
    cfg.variant = parse_variant(name);
    if (log_out) (*log_out) << "== variant " << name << "\n";
    TrainRun run = train(cfg, "", log_out);
    std::vector<DatasetClip> eval_data =
        load_dataset(eval_dir.empty() ? cfg.dataset_path : eval_dir);
    const auto clip_rows = evaluate_model(run.model, eval_data, cfg.seed);
    rows.push_back({name, mean_report(clip_rows)});
  }
  return rows;
}

inline void write_ablation_csv(const std::string& path, const std::vector<AblateRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError(cat("cannot write report ", path));
  out << "variant,cc,nss,auc_j,sauc,sim\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& row : rows)
    out << row.variant << ',' << row.mean.cc << ',' << row.mean.nss << ',' << row.mean.auc_j << ','
        << row.mean.sauc << ',' << row.mean.sim << "\n";
  if (!out) throw IoError(cat("failed writing report ", path));
}

}  // namespace avsal

#endif  // AVSAL_TRAIN_HPP
