// Acceptance gate. Runs the eight release criteria end to end and prints one
// PASS/FAIL line per criterion with the measured numbers next to the pinned
// thresholds. Exit status is the number of failed criteria.
//
// With no arguments every criterion runs in order; a subset can be named on
// the command line (e.g. "acceptance A4 A6"). A2 and A3 share one training
// campaign, so asking for either runs it once.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "avsal/dataset.hpp"
#include "avsal/metrics.hpp"
#include "avsal/train.hpp"

using namespace avsal;
namespace fs = std::filesystem;

namespace {

struct Gate {
  int failed = 0;
  void line(const char* id, const char* name, bool ok, const std::string& detail) {
    std::printf("%s %s: %s (%s)\n", id, name, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failed;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string scratch(const std::string& leaf) {
  const fs::path root = fs::path("accept_tmp");
  fs::create_directories(root);
  return (root / leaf).string();
}

// ---- shared scene builders ---------------------------------------------------

// One bright sounding square drifting over a dark background.
SceneSpec single_object_spec(int canvas) {
  SceneSpec spec;
  spec.canvas_h = spec.canvas_w = canvas;
  spec.n_frames = 16;
  spec.fps = 8;
  spec.sample_rate = 3400;
  spec.fixation_mode = "on_sounding";
  spec.noise_level = 0.0;
  spec.fixation_downscale = 4;
  spec.position_jitter = 0.0;
  ObjectSpec a;
  a.shape = "square";
  a.size = canvas * 14 / 64;
  a.pos_r = canvas * 20 / 64;
  a.pos_c = canvas * 20 / 64;
  a.vel_r = 0.5 * canvas / 64;
  a.vel_c = 0.8 * canvas / 64;
  a.color = {1.0, 0.3, 0.2};
  a.tone_hz = 440;
  a.level = 0.8;
  a.sound = true;
  spec.objects = {a};
  return spec;
}

// Two moving objects; exactly one emits sound per clip (alternating), and the
// fixations follow the sounding one.
SceneSpec two_object_spec() {
  SceneSpec spec;
  spec.canvas_h = spec.canvas_w = 32;
  spec.n_frames = 16;
  spec.fps = 8;
  spec.sample_rate = 3400;
  spec.fixation_mode = "on_sounding";
  spec.noise_level = 0.02;
  spec.fixation_downscale = 4;
  spec.position_jitter = 0.5;
  spec.randomize_sounding = true;
  ObjectSpec a;
  a.shape = "square";
  a.size = 7;
  a.pos_r = 8;
  a.pos_c = 8;
  a.vel_r = 0.15;
  a.vel_c = 0.2;
  a.color = {1.0, 0.3, 0.2};
  a.tone_hz = 440;
  a.level = 0.8;
  ObjectSpec b;
  b.shape = "circle";
  b.size = 7;
  b.pos_r = 24;
  b.pos_c = 24;
  b.vel_r = -0.15;
  b.vel_c = 0.1;
  b.color = {0.2, 0.4, 1.0};
  b.tone_hz = 880;
  b.level = 0.8;
  spec.objects = {a, b};
  return spec;
}

std::pair<int, int> argmax_rc(const Tensor<float>& m) {
  const int w = m.shape()[1];
  std::int64_t best = 0;
  for (std::int64_t i = 1; i < m.numel(); ++i)
    if (m[i] > m[best]) best = i;
  return {static_cast<int>(best / w), static_cast<int>(best % w)};
}

// ---- A1 -----------------------------------------------------------------------

void run_a1(Gate& gate) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string dir = scratch("a1_data");
  generate_dataset(single_object_spec(64), 1, 7, dir);

  TrainConfig cfg;
  cfg.dataset_path = dir;
  cfg.channels = {8, 16, 32, 64};
  cfg.d_a = 32;
  cfg.batch_size = 1;
  cfg.learning_rate = 5e-3;
  cfg.epochs = 200;
  cfg.seed = 0;
  cfg.variant = Variant::kFull;
  TrainRun run = train(cfg);

  const auto data = load_dataset(dir);
  Tape<float> tape;
  auto fwd = forward_clip(run.model, tape, data[0].clip);
  const MetricValue cc =
      metric_cc(fwd.f_map.value().cast<double>(), data[0].clip.fixmap.cast<double>());
  const double l_fuse = run.logs.back().l_fuse;
  const double secs = seconds_since(t0);

  const bool ok = l_fuse < 0.05 && !cc.degenerate && cc.value > 0.95 && secs < 300.0;
  gate.line("A1", "overfit", ok,
            cat("l_fuse ", l_fuse, " < 0.05, cc ", cc.value, " > 0.95, ", secs, " s < 300 s"));
}

// ---- A2 / A3 (one shared campaign) ---------------------------------------------

struct Campaign {
  bool ran = false;
  int seeds = 3;
  int dir_ok = 0;
  std::array<double, 3> cc_full{}, cc_vis{};
  int audio_hits = 0, full_map_hits = 0, vis_map_hits = 0, clips = 0;
  double secs = 0;
};

struct EvalCounts {
  double mean_cc = 0;
  int audio_hits = 0, map_hits = 0, n = 0;
};

EvalCounts eval_on(const Model<float>& model, const std::vector<DatasetClip>& data,
                   bool has_audio) {
  EvalCounts out;
  for (const auto& d : data) {
    Tape<float> tape;
    auto fwd = forward_clip(model, tape, d.clip);
    out.mean_cc +=
        metric_cc(fwd.f_map.value().cast<double>(), d.clip.fixmap.cast<double>()).value;
    const auto& bb = d.clip.sounding_bbox;  // r0, c0, r1, c1 inclusive, map grid
    auto inside = [&](std::pair<int, int> rc) {
      return rc.first >= bb[0] && rc.first <= bb[2] && rc.second >= bb[1] && rc.second <= bb[3];
    };
    if (has_audio && inside(argmax_rc(fwd.f_audio.value()))) ++out.audio_hits;
    if (inside(argmax_rc(fwd.f_map.value()))) ++out.map_hits;
    ++out.n;
  }
  out.mean_cc /= out.n;
  return out;
}

const Campaign& campaign() {
  static Campaign c;
  if (c.ran) return c;
  const auto t0 = std::chrono::steady_clock::now();

  const std::string train_dir = scratch("a2_train");
  const std::string test_dir = scratch("a2_test");
  const SceneSpec spec = two_object_spec();
  generate_dataset(spec, 32, 500, train_dir);
  generate_dataset(spec, 16, 900, test_dir);
  const auto test_data = load_dataset(test_dir);

  for (int s = 0; s < c.seeds; ++s) {
    TrainConfig cfg;
    cfg.dataset_path = train_dir;
    cfg.channels = {4, 8, 12, 16};
    cfg.d_a = 16;
    cfg.batch_size = 4;
    cfg.learning_rate = 5e-3;
    cfg.epochs = 50;
    cfg.seed = static_cast<std::uint64_t>(s);

    cfg.variant = Variant::kFull;
    TrainRun full = train(cfg);
    cfg.variant = Variant::kVisualOnly;
    TrainRun vis = train(cfg);

    const EvalCounts ef = eval_on(full.model, test_data, true);
    const EvalCounts ev = eval_on(vis.model, test_data, false);
    c.cc_full[static_cast<std::size_t>(s)] = ef.mean_cc;
    c.cc_vis[static_cast<std::size_t>(s)] = ev.mean_cc;
    if (ef.mean_cc > ev.mean_cc) ++c.dir_ok;
    c.audio_hits += ef.audio_hits;
    c.full_map_hits += ef.map_hits;
    c.vis_map_hits += ev.map_hits;
    c.clips += ef.n;
  }
  c.secs = seconds_since(t0);
  c.ran = true;
  return c;
}

void run_a2(Gate& gate) {
  const Campaign& c = campaign();
  const bool ok = c.dir_ok == c.seeds && c.secs < 1800.0;
  std::string pairs;
  for (int s = 0; s < c.seeds; ++s)
    pairs += cat(s ? " " : "", "s", s, " ", c.cc_full[static_cast<std::size_t>(s)], "/",
                 c.cc_vis[static_cast<std::size_t>(s)]);
  gate.line("A2", "ablation direction", ok,
            cat("test cc full/visual_only: ", pairs, "; full ahead in ", c.dir_ok, "/", c.seeds,
                " seeds, ", c.secs, " s < 1800 s"));
}

void run_a3(Gate& gate) {
  const Campaign& c = campaign();
  const double frac = static_cast<double>(c.audio_hits) / c.clips;
  const bool ok = frac >= 0.70 && c.vis_map_hits < c.full_map_hits;
  gate.line("A3", "audio localization", ok,
            cat("audio-cue argmax in sounding box ", c.audio_hits, "/", c.clips, " = ",
                100.0 * frac, "% vs >= 70%; final-map argmax hits full ", c.full_map_hits,
                " vs visual_only ", c.vis_map_hits, " (need strictly more)"));
}

// ---- A4: metric brute-force oracles --------------------------------------------

double cc_naive(const Tensor<double>& p, const Tensor<double>& g) {
  const std::int64_t n = p.numel();
  double mp = 0, mg = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    mp += p[i];
    mg += g[i];
  }
  mp /= n;
  mg /= n;
  double cov = 0, vp = 0, vg = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    cov += (p[i] - mp) * (g[i] - mg);
    vp += (p[i] - mp) * (p[i] - mp);
    vg += (g[i] - mg) * (g[i] - mg);
  }
  if (vp <= 1e-30 || vg <= 1e-30) return 0.0;
  return cov / std::sqrt(vp * vg);
}

double nss_naive(const Tensor<double>& p, const FixPoints& fix) {
  const std::int64_t n = p.numel();
  double mean = 0;
  for (std::int64_t i = 0; i < n; ++i) mean += p[i];
  mean /= n;
  double var = 0;
  for (std::int64_t i = 0; i < n; ++i) var += (p[i] - mean) * (p[i] - mean);
  var /= n;
  if (var <= 1e-30) return 0.0;
  double acc = 0;
  const int w = p.shape()[1];
  for (const auto& pt : fix) acc += (p[pt.first * w + pt.second] - mean) / std::sqrt(var);
  return acc / static_cast<double>(fix.size());
}

// Pairwise Mann-Whitney area, ties half a win.
double pairwise_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0;
  for (double a : pos)
    for (double b : neg) wins += a > b ? 1.0 : a == b ? 0.5 : 0.0;
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double auc_judd_naive(const Tensor<double>& p, const FixPoints& fix) {
  const int w = p.shape()[1];
  std::set<std::int64_t> fixed;
  std::vector<double> pos;
  for (const auto& pt : fix) {
    pos.push_back(p[pt.first * w + pt.second]);
    fixed.insert(static_cast<std::int64_t>(pt.first) * w + pt.second);
  }
  std::vector<double> neg;
  for (std::int64_t i = 0; i < p.numel(); ++i)
    if (!fixed.count(i)) neg.push_back(p[i]);
  return pairwise_auc(pos, neg);
}

double sauc_naive_fullpool(const Tensor<double>& p, const FixPoints& fix, const FixPoints& pool) {
  const int w = p.shape()[1];
  std::vector<double> pos, neg;
  for (const auto& pt : fix) pos.push_back(p[pt.first * w + pt.second]);
  for (const auto& pt : pool) neg.push_back(p[pt.first * w + pt.second]);
  return pairwise_auc(pos, neg);
}

double sim_naive(const Tensor<double>& p, const Tensor<double>& g) {
  double acc = 0;
  for (std::int64_t i = 0; i < p.numel(); ++i) acc += std::min(p[i], g[i]);
  return acc;
}

void run_a4(Gate& gate) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(4242);
  double worst_plain = 0, worst_tie = 0;

  for (int it = 0; it < 100; ++it) {
    const int h = rng.uniform_int(2, 8), w = rng.uniform_int(2, 8);
    const bool tie_instance = it % 4 == 3;
    Tensor<double> p({h, w}), g({h, w});
    for (std::int64_t i = 0; i < p.numel(); ++i) {
      p[i] = rng.uniform();
      g[i] = rng.uniform();
    }
    // a coarse value grid forces tied saliency samples through the AUC ranking
    if (tie_instance)
      for (std::int64_t i = 0; i < p.numel(); ++i) p[i] = std::floor(p[i] * 4.0) / 4.0;

    const int nf = rng.uniform_int(1, 4);
    FixPoints fix;
    for (int i = 0; i < nf; ++i) fix.push_back({rng.uniform_int(0, h - 1), rng.uniform_int(0, w - 1)});
    // pool stays at most 10x the fixation count so no subsampling happens and
    // the oracle sees exactly the same negatives
    const int np = rng.uniform_int(nf, 10 * nf);
    FixPoints pool;
    for (int i = 0; i < np; ++i) pool.push_back({rng.uniform_int(0, h - 1), rng.uniform_int(0, w - 1)});

    // normalized copies for the histogram-intersection metric
    Tensor<double> pn = p, gn = g;
    double sp = 0, sg = 0;
    for (std::int64_t i = 0; i < p.numel(); ++i) {
      sp += pn[i];
      sg += gn[i];
    }
    for (std::int64_t i = 0; i < p.numel(); ++i) {
      pn[i] /= sp;
      gn[i] /= sg;
    }

    auto track = [&](double delta, bool tie_path) {
      double& slot = tie_path ? worst_tie : worst_plain;
      if (delta > slot) slot = delta;
    };
    track(std::abs(metric_cc(p, g).value - cc_naive(p, g)), false);
    track(std::abs(metric_nss(p, fix).value - nss_naive(p, fix)), false);
    track(std::abs(metric_sim(pn, gn) - sim_naive(pn, gn)), false);
    track(std::abs(metric_auc_judd(p, fix) - auc_judd_naive(p, fix)), tie_instance);
    track(std::abs(metric_sauc(p, fix, pool, 99) - sauc_naive_fullpool(p, fix, pool)), tie_instance);
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_plain < 1e-9 && worst_tie < 1e-6 && secs < 10.0;
  gate.line("A4", "metric oracles", ok,
            cat("100 instances, max |delta| ", worst_plain, " < 1e-9, tied-rank AUC max |delta| ",
                worst_tie, " < 1e-6, ", secs, " s < 10 s"));
}

// ---- A5: forward stages vs naive loop re-evaluation ------------------------------

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double worst = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

Tensor<double> conv2d_naive(const Tensor<double>& x, const Tensor<double>& w,
                            const Tensor<double>& b, int pad, bool clamp) {
  const int ci = x.shape()[0], h = x.shape()[1], wd = x.shape()[2];
  const int co = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
  Tensor<double> out({co, h + 2 * pad - kh + 1, wd + 2 * pad - kw + 1});
  const int ho = out.shape()[1], wo = out.shape()[2];
  for (int o = 0; o < co; ++o)
    for (int r = 0; r < ho; ++r)
      for (int c = 0; c < wo; ++c) {
        double acc = b.numel() ? b[o] : 0.0;
        for (int ic = 0; ic < ci; ++ic)
          for (int kr = 0; kr < kh; ++kr)
            for (int kc = 0; kc < kw; ++kc) {
              int sr = r + kr - pad, sc = c + kc - pad;
              if (clamp) {
                sr = std::clamp(sr, 0, h - 1);
                sc = std::clamp(sc, 0, wd - 1);
              } else if (sr < 0 || sr >= h || sc < 0 || sc >= wd) {
                continue;
              }
              acc += w[((o * ci + ic) * kh + kr) * kw + kc] * x[(ic * h + sr) * wd + sc];
            }
        out[(o * ho + r) * wo + c] = acc;
      }
  return out;
}

Tensor<double> resize_nearest_naive(const Tensor<double>& x, int ho, int wo) {
  const int c = x.shape()[0], hi = x.shape()[1], wi = x.shape()[2];
  Tensor<double> out({c, ho, wo});
  for (int ci = 0; ci < c; ++ci)
    for (int r = 0; r < ho; ++r)
      for (int cc = 0; cc < wo; ++cc)
        out[(ci * ho + r) * wo + cc] = x[(ci * hi + r * hi / ho) * wi + cc * wi / wo];
  return out;
}

Tensor<double> softplus_naive(const Tensor<double>& x) {
  Tensor<double> out(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i)
    out[i] = x[i] > 0 ? x[i] + std::log1p(std::exp(-x[i])) : std::log1p(std::exp(x[i]));
  return out;
}

Tensor<double> normalize_naive(const Tensor<double>& x) {
  double z = 0;
  for (std::int64_t i = 0; i < x.numel(); ++i) z += x[i];
  Tensor<double> out(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] / z;
  return out;
}

Tensor<double> softmax_naive(const Tensor<double>& x) {
  double m = x[0];
  for (std::int64_t i = 1; i < x.numel(); ++i) m = std::max(m, x[i]);
  Tensor<double> out(x.shape());
  double z = 0;
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    out[i] = std::exp(x[i] - m);
    z += out[i];
  }
  for (std::int64_t i = 0; i < x.numel(); ++i) out[i] /= z;
  return out;
}

// The shared cue-map head: optional pointwise mix, nearest upsample to the
// output grid, 3x3 border-clamped smoothing, softplus, sum-1 normalization.
Tensor<double> cue_head_naive(const ParamStore<double>& ps, const Tensor<double>& map_chw,
                              const std::string& prefix, bool pointwise, int oh, int ow) {
  Tensor<double> x = map_chw;
  if (pointwise)
    x = conv2d_naive(x, ps.value(prefix + ".pw.w"), ps.value(prefix + ".pw.b"), 0, false);
  x = resize_nearest_naive(x, oh, ow);
  x = conv2d_naive(x, ps.value(prefix + ".rc.w"), ps.value(prefix + ".rc.b"), 1, true);
  return normalize_naive(softplus_naive(x.reshaped({oh, ow})));
}

void run_a5(Gate& gate) {
  const auto t0 = std::chrono::steady_clock::now();

  TrainConfig cfg;
  cfg.channels = {4, 6, 8, 10};
  cfg.d_a = 6;
  cfg.output_h = cfg.output_w = 8;
  cfg.variant = Variant::kFull;
  Rng rng(11);
  Model<double> model(cfg, rng);
  const ParamStore<double>& ps = model.params();

  Tensor<double> frames({16, 3, 32, 32});
  for (std::int64_t i = 0; i < frames.numel(); ++i) frames[i] = rng.uniform();
  Tensor<double> audio({3400});
  for (std::int64_t i = 0; i < audio.numel(); ++i) audio[i] = 2.0 * rng.uniform() - 1.0;

  Tape<double> tape;
  Bound<double> bound = bind_params(tape, ps, false);
  auto fwd = model.forward(tape, bound, frames, audio);

  const int dh = cfg.d_h(), da = cfg.d_a, oh = cfg.output_h, ow = cfg.output_w;
  const Tensor<double> V = fwd.V.value();
  const int B = V.shape()[0];

  // location attention: embedding, bilinear scores, softmax, context, projection
  double d_loc = 0;
  {
    const Tensor<double>& s_a = fwd.s_a.value();
    const auto &e1w = ps.value("loc.embed1.w"), &e1b = ps.value("loc.embed1.b");
    const auto &e2w = ps.value("loc.embed2.w"), &e2b = ps.value("loc.embed2.b");
    Tensor<double> h1({dh});
    for (int k = 0; k < dh; ++k) {
      double acc = e1b[k];
      for (int j = 0; j < da; ++j) acc += e1w[k * da + j] * s_a[j];
      h1[k] = std::max(acc, 0.0);
    }
    Tensor<double> ha({dh});
    for (int k = 0; k < dh; ++k) {
      double acc = e2b[k];
      for (int j = 0; j < dh; ++j) acc += e2w[k * dh + j] * h1[j];
      ha[k] = acc;
    }
    d_loc = std::max(d_loc, max_abs_diff(ha, fwd.h_a.value()));

    const auto &w1 = ps.value("loc.w1"), &w2 = ps.value("loc.w2");
    Tensor<double> key({dh});
    for (int k = 0; k < dh; ++k) {
      double acc = 0;
      for (int j = 0; j < dh; ++j) acc += w2[k * dh + j] * ha[j];
      key[k] = acc;
    }
    Tensor<double> araw({B});
    for (int b = 0; b < B; ++b) {
      double acc = 0;
      for (int k = 0; k < dh; ++k) {
        double q = 0;
        for (int j = 0; j < dh; ++j) q += w1[k * dh + j] * V[b * dh + j];
        acc += q * key[k];
      }
      araw[b] = acc;
    }
    d_loc = std::max(d_loc, max_abs_diff(araw, fwd.a_raw.value()));

    Tensor<double> alpha = softmax_naive(araw);
    d_loc = std::max(d_loc, max_abs_diff(alpha, fwd.alpha.value()));

    Tensor<double> hz({dh});
    for (int j = 0; j < dh; ++j) {
      double acc = 0;
      for (int b = 0; b < B; ++b) acc += alpha[b] * V[b * dh + j];
      hz[j] = acc;
    }
    d_loc = std::max(d_loc, max_abs_diff(hz, fwd.h_z.value()));

    const auto &p1w = ps.value("loc.proj1.w"), &p1b = ps.value("loc.proj1.b");
    const auto &p2w = ps.value("loc.proj2.w"), &p2b = ps.value("loc.proj2.b");
    Tensor<double> q1({dh});
    for (int k = 0; k < dh; ++k) {
      double acc = p1b[k];
      for (int j = 0; j < dh; ++j) acc += p1w[k * dh + j] * hz[j];
      q1[k] = std::max(acc, 0.0);
    }
    Tensor<double> vhat({da});
    for (int k = 0; k < da; ++k) {
      double acc = p2b[k];
      for (int j = 0; j < dh; ++j) acc += p2w[k * dh + j] * q1[j];
      vhat[k] = acc;
    }
    d_loc = std::max(d_loc, max_abs_diff(vhat, fwd.v_hat.value()));
  }

  // audio cue map from the attention weights
  double d_audio = 0;
  {
    const int h4 = fwd.s_v[3].shape()[2], w4 = fwd.s_v[3].shape()[3];
    Tensor<double> grid = fwd.alpha.value().reshaped({1, h4, w4});
    d_audio = max_abs_diff(cue_head_naive(ps, grid, "cue.audio", false, oh, ow),
                           fwd.f_audio.value());
  }

  // motion cue maps: frame-difference scores through the cue head
  double d_motion = 0;
  for (int m = 0; m < 4; ++m) {
    const Tensor<double>& sv = fwd.s_v[static_cast<std::size_t>(m)].value();
    const int C = sv.shape()[0], T = sv.shape()[1], H = sv.shape()[2], W = sv.shape()[3];
    Tensor<double> mean_c({T, H, W});
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < H * W; ++i) {
        double acc = 0;
        for (int c = 0; c < C; ++c) acc += sv[(c * T + t) * H * W + i];
        mean_c[t * H * W + i] = acc / C;
      }
    Tensor<double> mt({H, W});
    for (int i = 0; i < H * W; ++i) {
      double acc = 0;
      for (int t = 1; t < T; ++t)
        acc += 1.0 - (mean_c[t * H * W + i] - mean_c[(t - 1) * H * W + i]);
      mt[i] = acc;
    }
    d_motion = std::max(d_motion, max_abs_diff(mt, fwd.m_t[static_cast<std::size_t>(m)].value()));
    d_motion = std::max(
        d_motion, max_abs_diff(cue_head_naive(ps, mt.reshaped({1, H, W}), cat("cue.motion", m + 1),
                                              true, oh, ow),
                               fwd.f_motion[static_cast<std::size_t>(m)].value()));
  }

  // semantic cue maps: channel-descriptor gate times the mean feature
  double d_sem = 0;
  for (int m = 0; m < 4; ++m) {
    const Tensor<double>& sv = fwd.s_v[static_cast<std::size_t>(m)].value();
    const int C = sv.shape()[0], T = sv.shape()[1], H = sv.shape()[2], W = sv.shape()[3];
    Tensor<double> sc({C, H, W});
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H * W; ++i) {
        double acc = 0;
        for (int t = 0; t < T; ++t) acc += sv[(c * T + t) * H * W + i];
        sc[c * H * W + i] = acc / T;
      }
    Tensor<double> desc({2, H, W});
    for (int i = 0; i < H * W; ++i) {
      double mx = sc[i], mn = 0;
      for (int c = 0; c < C; ++c) {
        mx = std::max(mx, sc[c * H * W + i]);
        mn += sc[c * H * W + i];
      }
      desc[i] = mx;
      desc[H * W + i] = mn / C;
    }
    Tensor<double> att = conv2d_naive(desc, ps.value(cat("cue.sem", m + 1, ".att.w")),
                                      ps.value(cat("cue.sem", m + 1, ".att.b")), 3, true);
    Tensor<double> wmap({H, W});
    for (int i = 0; i < H * W; ++i) wmap[i] = 1.0 / (1.0 + std::exp(-att[i]));
    d_sem = std::max(d_sem, max_abs_diff(wmap, fwd.m_weight[static_cast<std::size_t>(m)].value()));

    Tensor<double> ms({C, H, W});
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H * W; ++i) ms[c * H * W + i] = sc[c * H * W + i] * wmap[i];
    d_sem = std::max(d_sem,
                     max_abs_diff(cue_head_naive(ps, ms, cat("cue.sem", m + 1), true, oh, ow),
                                  fwd.f_semantic[static_cast<std::size_t>(m)].value()));
  }

  // center prior: normalized anisotropic gaussian on the output grid
  double d_center = 0;
  {
    const double sx = std::exp(ps.value("cue.center.rho_x")[0]);
    const double sy = std::exp(ps.value("cue.center.rho_y")[0]);
    const double x0 = (ow - 1) / 2.0, y0 = (oh - 1) / 2.0;
    Tensor<double> surf({oh, ow});
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c)
        surf[r * ow + c] = 1.0 / (2.0 * 3.14159265358979323846 * sx * sy) *
                           std::exp(-((c - x0) * (c - x0) / (2 * sx * sx) +
                                      (r - y0) * (r - y0) / (2 * sy * sy)));
    d_center = max_abs_diff(normalize_naive(surf), fwd.f_center.value());
  }

  // fusion: channel gate from pooled cues, per-pixel mixing, gated product, readout
  double d_fuse = 0;
  {
    const Tensor<double>& mc = fwd.m_conc.value();
    const int C = mc.shape()[0], HW = oh * ow;
    auto affine = [&](Tensor<double>& x, const std::string& prefix) {
      const auto &gm = ps.value(prefix + ".g"), &bt = ps.value(prefix + ".b");
      const std::int64_t inner = x.numel() / x.shape()[0];
      for (int c = 0; c < x.shape()[0]; ++c)
        for (std::int64_t i = 0; i < inner; ++i) x[c * inner + i] = x[c * inner + i] * gm[c] + bt[c];
    };
    auto fc = [&](const Tensor<double>& x, const std::string& prefix) {
      const auto &w = ps.value(prefix + ".w"), &b = ps.value(prefix + ".b");
      const int out_n = w.shape()[0], in_n = w.shape()[1];
      Tensor<double> y({out_n});
      for (int o = 0; o < out_n; ++o) {
        double acc = b[o];
        for (int j = 0; j < in_n; ++j) acc += w[o * in_n + j] * x[j];
        y[o] = acc;
      }
      return y;
    };

    Tensor<double> gap({C});
    for (int c = 0; c < C; ++c) {
      double acc = 0;
      for (int i = 0; i < HW; ++i) acc += mc[c * HW + i];
      gap[c] = acc / HW;
    }
    Tensor<double> z = fc(gap, "fuse.glob.fc1");
    affine(z, "fuse.glob.bn1");
    for (std::int64_t i = 0; i < z.numel(); ++i) z[i] = 1.0 / (1.0 + std::exp(-z[i]));
    z = fc(z, "fuse.glob.fc2");
    affine(z, "fuse.glob.bn2");
    for (std::int64_t i = 0; i < z.numel(); ++i) z[i] = 1.0 / (1.0 + std::exp(-z[i]));
    d_fuse = std::max(d_fuse, max_abs_diff(z, fwd.g.value()));

    Tensor<double> l1 =
        conv2d_naive(mc, ps.value("fuse.loc.pw1.w"), ps.value("fuse.loc.pw1.b"), 0, false);
    affine(l1, "fuse.loc.bn1");
    for (std::int64_t i = 0; i < l1.numel(); ++i) l1[i] = std::max(l1[i], 0.0);
    Tensor<double> l2 =
        conv2d_naive(l1, ps.value("fuse.loc.pw2.w"), ps.value("fuse.loc.pw2.b"), 0, false);
    affine(l2, "fuse.loc.bn2");
    d_fuse = std::max(d_fuse, max_abs_diff(l2, fwd.l_ctx.value()));

    Tensor<double> mf({C, oh, ow});
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < HW; ++i) mf[c * HW + i] = l2[c * HW + i] * z[c];
    d_fuse = std::max(d_fuse, max_abs_diff(mf, fwd.m_fusion.value()));

    Tensor<double> r0 =
        conv2d_naive(mf, ps.value("readout.conv0.w"), ps.value("readout.conv0.b"), 0, false);
    for (std::int64_t i = 0; i < r0.numel(); ++i) r0[i] = std::max(r0[i], 0.0);
    Tensor<double> r1 =
        conv2d_naive(r0, ps.value("readout.conv1.w"), ps.value("readout.conv1.b"), 0, false);
    for (std::int64_t i = 0; i < r1.numel(); ++i) r1[i] = std::max(r1[i], 0.0);
    Tensor<double> r2 =
        conv2d_naive(r1, ps.value("readout.conv2.w"), ps.value("readout.conv2.b"), 0, false);
    d_fuse = std::max(d_fuse, max_abs_diff(softmax_naive(r2.reshaped({oh, ow})), fwd.f_map.value()));
  }

  const double secs = seconds_since(t0);
  const double worst = std::max({d_loc, d_audio, d_motion, d_sem, d_center, d_fuse});
  const bool ok = worst < 1e-6 && secs < 10.0;
  gate.line("A5", "component exactness", ok,
            cat("max |delta|: location ", d_loc, ", audio cue ", d_audio, ", motion ", d_motion,
                ", semantic ", d_sem, ", center ", d_center, ", fusion ", d_fuse,
                "; all < 1e-6, ", secs, " s < 10 s"));
}

// ---- A6: finite-difference gradient checks --------------------------------------

struct FdResult {
  double worst = 0;
  int skipped = 0, total = 0;
};

// Central differences against the recorded analytic gradient, perturbing pv in
// place. When skip_kinks is set (for the relu/max network targets, which are
// only piecewise smooth), a stencil whose one-sided slopes disagree straddles
// a kink, where no difference quotient estimates the derivative; those are
// excluded and counted, and the caller bounds how many are tolerable. Smooth
// targets scan every coordinate.
template <typename EvalFn>
FdResult fd_scan(Tensor<double>& pv, const Tensor<double>& analytic, EvalFn eval, double eps,
                 double tol, bool skip_kinks) {
  FdResult r;
  r.total = static_cast<int>(pv.numel());
  const double f0 = eval();
  for (std::int64_t i = 0; i < pv.numel(); ++i) {
    const double keep = pv[i];
    pv[i] = keep + eps;
    const double fp = eval();
    pv[i] = keep - eps;
    const double fm = eval();
    pv[i] = keep;
    if (skip_kinks) {
      const double fd_hi = (fp - f0) / eps, fd_lo = (f0 - fm) / eps;
      if (std::abs(fd_hi - fd_lo) / std::max({1.0, std::abs(fd_hi), std::abs(fd_lo)}) > tol) {
        ++r.skipped;
        continue;
      }
    }
    const double fd = (fp - fm) / (2 * eps);
    r.worst =
        std::max(r.worst, std::abs(analytic[i] - fd) / std::max({1.0, std::abs(analytic[i]), std::abs(fd)}));
  }
  return r;
}

struct FdModel {
  Model<double> model;
  Tensor<double> frames, audio, y;

  double eval(int which) {
    Tape<double> t;
    Bound<double> b = bind_params(t, model.params(), false);
    auto fwd = model.forward(t, b, frames, audio);
    auto L = model.losses(t, fwd, y);
    return (which == 0 ? L.l_a : which == 1 ? L.l_fuse : L.l_final).value()[0];
  }

  FdResult check(const std::string& pname, int which, double eps, double tol) {
    Tensor<double> analytic;
    {
      Tape<double> t;
      Bound<double> b = bind_params(t, model.params(), true);
      auto fwd = model.forward(t, b, frames, audio);
      auto L = model.losses(t, fwd, y);
      t.backward(which == 0 ? L.l_a : which == 1 ? L.l_fuse : L.l_final);
      analytic = b[model.params().find(pname)].grad();
    }
    return fd_scan(model.params().value(pname), analytic, [&] { return eval(which); }, eps, tol, true);
  }
};

void run_a6(Gate& gate) {
  const auto t0 = std::chrono::steady_clock::now();
  const double eps = 1e-3, tol = 1e-3;

  TrainConfig cfg;
  cfg.channels = {3, 4, 6, 8};
  cfg.d_a = 6;
  cfg.output_h = cfg.output_w = 8;
  cfg.variant = Variant::kFull;
  Rng rng(23);
  Model<double> model(cfg, rng);

  Tensor<double> frames({16, 3, 32, 32});
  for (std::int64_t i = 0; i < frames.numel(); ++i) frames[i] = rng.uniform();
  Tensor<double> audio({1200});
  for (std::int64_t i = 0; i < audio.numel(); ++i) audio[i] = 2.0 * rng.uniform() - 1.0;
  Tensor<double> y({8, 8});
  double z = 0;
  for (std::int64_t i = 0; i < y.numel(); ++i) z += (y[i] = 0.05 + rng.uniform());
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] /= z;

  FdModel fd{std::move(model), std::move(frames), std::move(audio), y};

  const FdResult e_loc = fd.check("loc.w1", 0, eps, tol);
  const FdResult e_readout = fd.check("readout.conv0.w", 1, eps, tol);
  const FdResult e_end = fd.check("audio.conv0.w", 2, eps, tol);

  // loss term against a probability map, checked at the op level. The map is
  // kept away from zero: the term's log curvature must stay inside the
  // truncation budget of a 1e-3 central difference.
  FdResult e_kl;
  {
    Rng r2(31);
    Tensor<double> f({4, 4}), yy({4, 4});
    double zf = 0, zy = 0;
    for (std::int64_t i = 0; i < f.numel(); ++i) {
      zf += (f[i] = 1.0 + r2.uniform());
      yy[i] = i % 4 == 0 ? 0.0 : r2.uniform();  // zeros exercise the skipped terms
      zy += yy[i];
    }
    for (std::int64_t i = 0; i < f.numel(); ++i) {
      f[i] /= zf;
      yy[i] /= zy;
    }
    Tensor<double> analytic;
    {
      Tape<double> t;
      Var<double> fv = t.leaf(f, true);
      Var<double> root = kl_term(t, fv, yy, 1e-7);
      t.backward(root);
      analytic = fv.grad();
    }
    e_kl = fd_scan(f, analytic,
                   [&] {
                     Tape<double> t;
                     return kl_term(t, t.leaf(f, false), yy, 1e-7).value()[0];
                   },
                   eps, tol, false);
  }

  // center prior spread, checked through the normalized map
  FdResult e_center;
  {
    Tensor<double> rho_x = Tensor<double>::full({1}, std::log(2.0));
    const Tensor<double> rho_y = Tensor<double>::full({1}, std::log(1.5));
    double analytic = 0;
    {
      Tape<double> t;
      Var<double> vx = t.leaf(rho_x, true), vy = t.leaf(rho_y, false);
      Var<double> root = kl_term(t, normalize_sum1(t, center_surface(t, vx, vy, 8, 8)), y, 1e-7);
      t.backward(root);
      analytic = vx.grad()[0];
    }
    e_center = fd_scan(rho_x, Tensor<double>::full({1}, analytic),
                       [&] {
                         Tape<double> t;
                         Var<double> vx = t.leaf(rho_x, false), vy = t.leaf(rho_y, false);
                         return kl_term(t, normalize_sum1(t, center_surface(t, vx, vy, 8, 8)), y,
                                        1e-7)
                             .value()[0];
                       },
                       eps, tol, false);
  }

  const double secs = seconds_since(t0);
  const std::array<const FdResult*, 5> all{&e_loc, &e_kl, &e_center, &e_readout, &e_end};
  bool ok = secs < 60.0;
  int skipped = 0, total = 0;
  for (const FdResult* r : all) {
    // a handful of stencils may sit on kinks, but the scan must stay meaningful
    ok = ok && r->worst < tol && r->skipped * 20 <= r->total * 3;
    skipped += r->skipped;
    total += r->total;
  }
  gate.line("A6", "gradient checks", ok,
            cat("max rel err: location-attention loss/W1 ", e_loc.worst, ", divergence/map ",
                e_kl.worst, ", center spread ", e_center.worst, ", readout conv ", e_readout.worst,
                ", end-to-end/audio conv ", e_end.worst, "; all < 1e-3 at eps 1e-3, ", skipped,
                "/", total, " kink-straddled stencils excluded, ", secs, " s < 60 s"));
}

// ---- A7: distribution invariants under fuzzing -----------------------------------

void run_a7(Gate& gate) {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr std::array<Variant, 6> kVariants{Variant::kFull,      Variant::kVisualOnly,
                                             Variant::kAvInnerProduct, Variant::kConcatFusion,
                                             Variant::kNoSa,      Variant::kNoTa};
  Rng rng(777);
  double worst_sum = 0, worst_alpha = 0, min_entry = 0;

  std::vector<Model<float>> models;
  for (int canvas : {16, 32})
    for (Variant v : kVariants) {
      TrainConfig cfg;
      cfg.channels = {3, 4, 6, 8};
      cfg.d_a = 6;
      cfg.output_h = cfg.output_w = canvas / 4;
      cfg.variant = v;
      Rng init(static_cast<std::uint64_t>(canvas) * 100 + static_cast<std::uint64_t>(v));
      models.emplace_back(cfg, init);
    }

  for (int it = 0; it < 1000; ++it) {
    const bool big = it % 5 == 4;
    Model<float>& model = models[static_cast<std::size_t>((big ? 6 : 0) + it % 6)];
    const int canvas = big ? 32 : 16;
    Tensor<float> frames({16, 3, canvas, canvas});
    for (std::int64_t i = 0; i < frames.numel(); ++i)
      frames[i] = static_cast<float>(0.05 + 0.9 * rng.uniform());
    Tensor<float> audio({425 + rng.uniform_int(0, 2975)});
    for (std::int64_t i = 0; i < audio.numel(); ++i)
      audio[i] = static_cast<float>(2.0 * rng.uniform() - 1.0);

    Tape<float> tape;
    Bound<float> bound = bind_params(tape, model.params(), false);
    auto fwd = model.forward(tape, bound, frames, audio);

    auto check_map = [&](const Tensor<float>& m) {
      double sum = 0;
      for (std::int64_t i = 0; i < m.numel(); ++i) {
        sum += m[i];
        min_entry = std::min(min_entry, static_cast<double>(m[i]));
      }
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    };
    check_map(fwd.f_audio.value());
    for (int m = 0; m < 4; ++m) {
      check_map(fwd.f_motion[static_cast<std::size_t>(m)].value());
      check_map(fwd.f_semantic[static_cast<std::size_t>(m)].value());
    }
    check_map(fwd.f_center.value());
    check_map(fwd.f_map.value());
    if (fwd.audio_active) {
      double sum = 0;
      const Tensor<float>& a = fwd.alpha.value();
      for (std::int64_t i = 0; i < a.numel(); ++i) sum += a[i];
      worst_alpha = std::max(worst_alpha, std::abs(sum - 1.0));
    }
  }

  const double secs = seconds_since(t0);
  const bool ok = worst_sum <= 1e-6 && worst_alpha <= 1e-6 && min_entry >= 0.0;
  gate.line("A7", "distribution invariants", ok,
            cat("1000 forwards over all six variants: max map-sum deviation ", worst_sum,
                " <= 1e-6, min entry ", min_entry, " >= 0, max alpha-sum deviation ", worst_alpha,
                " <= 1e-6, ", secs, " s"));
}

// ---- A8: determinism and persistence ----------------------------------------------

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void run_a8(Gate& gate) {
  const std::string dir = scratch("a8_data");
  generate_dataset(single_object_spec(16), 2, 21, dir);

  TrainConfig cfg;
  cfg.dataset_path = dir;
  cfg.channels = {3, 4, 6, 8};
  cfg.d_a = 6;
  cfg.batch_size = 1;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 2;
  cfg.seed = 5;
  cfg.variant = Variant::kFull;

  const std::string p1 = scratch("a8_run1.ckpt"), p2 = scratch("a8_run2.ckpt");
  TrainRun run1 = train(cfg, p1);
  TrainRun run2 = train(cfg, p2);

  const std::string b1 = file_bytes(p1), b2 = file_bytes(p2);
  const bool identical = !b1.empty() && b1 == b2;

  auto [loaded, lc] = load_model(p1);
  bool params_equal = loaded.params().size() == run1.model.params().size();
  if (params_equal)
    for (std::size_t i = 0; i < loaded.params().size(); ++i) {
      const Tensor<float>&a = loaded.params().value(i), &b = run1.model.params().value(i);
      if (!a.same_shape(b) ||
          std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.numel())) != 0) {
        params_equal = false;
        break;
      }
    }

  const auto data = load_dataset(dir);
  Tape<float> t1, t2;
  auto f1 = forward_clip(run1.model, t1, data[0].clip);
  auto f2 = forward_clip(loaded, t2, data[0].clip);
  const Tensor<float>&m1 = f1.f_map.value(), &m2 = f2.f_map.value();
  const bool forward_equal =
      m1.same_shape(m2) &&
      std::memcmp(m1.data(), m2.data(), sizeof(float) * static_cast<std::size_t>(m1.numel())) == 0;

  const bool ok = identical && params_equal && forward_equal;
  gate.line("A8", "determinism and persistence", ok,
            cat("same config+seed checkpoints byte-identical: ", identical ? "yes" : "no",
                " (", b1.size(), " bytes); round-trip parameters bit-equal: ",
                params_equal ? "yes" : "no", "; round-trip forward bit-equal: ",
                forward_equal ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> want;
  for (int i = 1; i < argc; ++i) want.insert(argv[i]);
  auto wanted = [&](const char* id) { return want.empty() || want.count(id); };

  Gate gate;
  try {
    if (wanted("A1")) run_a1(gate);
    if (wanted("A2")) run_a2(gate);
    if (wanted("A3")) run_a3(gate);
    if (wanted("A4")) run_a4(gate);
    if (wanted("A5")) run_a5(gate);
    if (wanted("A6")) run_a6(gate);
    if (wanted("A7")) run_a7(gate);
    if (wanted("A8")) run_a8(gate);
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 100;
  }
  std::printf("%d criterion(s) failed\n", gate.failed);
  return gate.failed;
}
