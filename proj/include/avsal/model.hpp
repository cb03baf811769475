#ifndef AVSAL_MODEL_HPP
#define AVSAL_MODEL_HPP

#include <array>
#include <cmath>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "avsal/config.hpp"
#include "avsal/conv.hpp"
#include "avsal/params.hpp"
#include "avsal/rng.hpp"
#include "avsal/tape.hpp"

namespace avsal {

constexpr int kAudioKernel = 9;
constexpr std::array<int, 4> kAudioStrides{4, 4, 2, 2};

// Minimum waveform length the audio stack can consume: one full receptive field.
inline int audio_receptive_field() {
  int rf = 1, jump = 1;
  for (int s : kAudioStrides) {
    rf += (kAudioKernel - 1) * jump;
    jump *= s;
  }
  return rf;  // 425 with the default stack
}

// Per-forward leaf handles for every parameter, aligned with store order.
template <typename S>
struct Bound {
  std::vector<Var<S>> vars;
  Var<S> operator[](std::size_t i) const { return vars.at(i); }
};

template <typename S>
Bound<S> bind_params(Tape<S>& tape, const ParamStore<S>& store, bool trainable) {
  Bound<S> b;
  b.vars.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) b.vars.push_back(tape.leaf(store.value(i), trainable));
  return b;
}

template <typename S>
class Model {
 public:
  // Everything a forward pass produces. Vars for severed branches are invalid
  // (valid() == false); the *_active flags say which loss terms apply.
  struct Fwd {
    Var<S> s_a;                          // audio feature [d_a]
    std::array<Var<S>, 4> s_v;           // per-block visual features
    Var<S> V;                            // spatial descriptors [B, d_h]
    Var<S> h_a;                          // audio embedding [d_h]
    Var<S> a_raw, alpha;                 // attention scores and weights [B]
    Var<S> h_z, v_hat;                   // context vector [d_h], its projection [d_a]
    Var<S> f_audio;                      // cue maps, each [out_h, out_w]
    std::array<Var<S>, 4> m_t;           // raw motion maps, block resolution
    std::array<Var<S>, 4> f_motion;
    std::array<Var<S>, 4> m_weight;      // spatial weights, block resolution
    std::array<Var<S>, 4> f_semantic;
    Var<S> f_center;
    Var<S> m_conc;                       // stacked cues [10, out_h, out_w]
    Var<S> g, l_ctx, m_fusion;           // fusion internals
    Var<S> f_map;                        // final map [out_h, out_w]
    bool audio_active = true, motion_active = true, semantic_active = true;
  };

  struct Losses {
    Var<S> l_a, l_ms, l_fuse, l_final;
  };

  Model(TrainConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    if (cfg_.output_h < 1 || cfg_.output_w < 1)
      throw ConfigError("output_h/output_w: must be resolved before model construction");
    build(rng);
  }

  const TrainConfig& config() const { return cfg_; }
  ParamStore<S>& params() { return store_; }
  const ParamStore<S>& params() const { return store_; }
  int cue_channels() const { return kCueChannels; }

  Var<S> param(const Bound<S>& p, const std::string& name) const { return p[store_.find(name)]; }

  // ---- encoders -------------------------------------------------------------

  // wave: [L] raw samples. Four strided 1-D convolutions with ReLU, then a
  // global temporal max so the feature length is fixed for any L.
  Var<S> encode_audio(Tape<S>& t, const Bound<S>& p, Var<S> wave) const {
    if (wave.shape().size() != 1)
      throw ShapeError(cat("encode_audio: want rank-1 waveform, got ", shape_str(wave.shape())));
    const int L = wave.shape()[0];
    const int need = audio_receptive_field();
    if (L < need)
      throw ShapeError(cat("encode_audio: waveform length ", L, " shorter than the stack's receptive field ", need));
    Var<S> x = reshape(t, wave, {1, L});
    for (int i = 0; i < 4; ++i) {
      x = conv1d(t, x, param(p, cat("audio.conv", i, ".w")), param(p, cat("audio.conv", i, ".b")),
                 kAudioStrides[static_cast<std::size_t>(i)], kAudioKernel / 2);
      x = relu(t, x);
    }
    return max_axis(t, x, 1);  // [d_a]
  }

  // frames: [3, T, H, W] with T = 16 and H, W multiples of 16. Four residual
  // blocks; spatial size halves every block, temporal size halves at 3 and 4.
  std::array<Var<S>, 4> encode_visual(Tape<S>& t, const Bound<S>& p, Var<S> frames) const {
    const Shape& s = frames.shape();
    if (s.size() != 4 || s[0] != 3)
      throw ShapeError(cat("encode_visual: want [3,T,H,W], got ", shape_str(s)));
    if (s[1] != 16) throw ShapeError(cat("encode_visual: clip length must be 16 frames, got ", s[1]));
    if (s[2] < 16 || s[3] < 16 || s[2] % 16 != 0 || s[3] % 16 != 0)
      throw ShapeError(cat("encode_visual: H and W must be positive multiples of 16, got ", s[2], "x", s[3]));
    std::array<Var<S>, 4> out;
    Var<S> x = frames;
    for (int m = 1; m <= 4; ++m) {
      const int st = m >= 3 ? 2 : 1;
      Var<S> h = conv3d(t, x, param(p, cat("visual.block", m, ".conv1.w")),
                        param(p, cat("visual.block", m, ".conv1.b")), {st, 2, 2}, {1, 1, 1});
      h = relu(t, h);
      h = conv3d(t, h, param(p, cat("visual.block", m, ".conv2.w")),
                 param(p, cat("visual.block", m, ".conv2.b")), {1, 1, 1}, {1, 1, 1});
      Var<S> r = conv3d(t, x, param(p, cat("visual.block", m, ".proj.w")),
                        param(p, cat("visual.block", m, ".proj.b")), {st, 2, 2}, {0, 0, 0});
      x = relu(t, add(t, h, r));
      out[static_cast<std::size_t>(m - 1)] = x;
    }
    return out;
  }

  // ---- sounding-object location ----------------------------------------------

  // Block-4 feature -> per-cell descriptors: temporal mean, cells row-major.
  Var<S> pool_visual(Tape<S>& t, Var<S> s_v4) const {
    const Shape& s = s_v4.shape();
    if (s.size() != 4) throw ShapeError(cat("pool_visual: want [C,T,H,W], got ", shape_str(s)));
    Var<S> m = mean_axis(t, s_v4, 1);              // [C,H,W]
    m = reshape(t, m, {s[0], s[2] * s[3]});        // [C,B]
    return transpose2d(t, m);                      // [B,C]
  }

  Var<S> embed_audio(Tape<S>& t, const Bound<S>& p, Var<S> s_a) const {
    Var<S> h = linear(t, s_a, param(p, "loc.embed1.w"), param(p, "loc.embed1.b"));
    h = relu(t, h);
    return linear(t, h, param(p, "loc.embed2.w"), param(p, "loc.embed2.b"));
  }

  // Per-cell audio affinity. Bilinear form <W1 v_b, W2 h_a>; the plain variant
  // scores with the raw inner product <v_b, h_a>.
  Var<S> sounding_scores(Tape<S>& t, const Bound<S>& p, Var<S> V, Var<S> h_a, bool bilinear) const {
    const int dh = V.shape()[1];
    Var<S> q = V;
    Var<S> key = h_a;
    if (bilinear) {
      q = matmul(t, V, transpose2d(t, param(p, "loc.w1")));
      key = linear(t, h_a, param(p, "loc.w2"));
    }
    Var<S> a = matmul(t, q, reshape(t, key, {dh, 1}));
    return reshape(t, a, {V.shape()[0]});
  }

  Var<S> context_vector(Tape<S>& t, Var<S> alpha, Var<S> V) const {
    Var<S> z = matmul(t, reshape(t, alpha, {1, alpha.shape()[0]}), V);
    return reshape(t, z, {V.shape()[1]});
  }

  Var<S> project_context(Tape<S>& t, const Bound<S>& p, Var<S> h_z) const {
    Var<S> h = linear(t, h_z, param(p, "loc.proj1.w"), param(p, "loc.proj1.b"));
    h = relu(t, h);
    return linear(t, h, param(p, "loc.proj2.w"), param(p, "loc.proj2.b"));
  }

  // Attention weights laid out on the block-4 grid, upsampled to a cue map.
  Var<S> audio_saliency(Tape<S>& t, const Bound<S>& p, Var<S> alpha, int h4, int w4) const {
    if (alpha.numel() != static_cast<std::int64_t>(h4) * w4)
      throw ShapeError(cat("audio_saliency: ", alpha.numel(), " weights for a ", h4, "x", w4, " grid"));
    if (cfg_.output_h < h4 || cfg_.output_w < w4)
      throw ArgumentError(cat("audio_saliency: target ", cfg_.output_h, "x", cfg_.output_w,
                              " smaller than source ", h4, "x", w4));
    return cue_head(t, p, reshape(t, alpha, {1, h4, w4}), "cue.audio", false);
  }

  // ---- cue maps ---------------------------------------------------------------

  // Sum over consecutive-frame differences of the channel-averaged feature:
  // sum_t (1 - (S_t - S_{t-1})). Returns the raw map and the cue map.
  std::pair<Var<S>, Var<S>> temporal_attention(Tape<S>& t, const Bound<S>& p, Var<S> s_vm, int m) const {
    const Shape& s = s_vm.shape();
    if (s.size() != 4) throw ShapeError(cat("temporal_attention: want [C,T,H,W], got ", shape_str(s)));
    const int tm = s[1];
    if (tm < 2) throw ShapeError(cat("temporal_attention: needs at least 2 frames, got ", tm));
    Var<S> sv = mean_axis(t, s_vm, 0);             // [T,H,W]
    Var<S> cur = slice_axis0(t, sv, 1, tm);
    Var<S> prev = slice_axis0(t, sv, 0, tm - 1);
    Var<S> terms = offset(t, neg(t, sub(t, cur, prev)), S(1));
    Var<S> m_t = sum_axis(t, terms, 0);            // [H,W]
    Var<S> f = cue_head(t, p, reshape(t, m_t, {1, s[2], s[3]}), cat("cue.motion", m), true);
    return {m_t, f};
  }

  // Channel max/mean descriptor -> 7x7 conv -> sigmoid weight, applied to the
  // temporally averaged feature. Returns (weight, weighted feature, cue map).
  std::tuple<Var<S>, Var<S>, Var<S>> spatial_attention(Tape<S>& t, const Bound<S>& p, Var<S> s_vm,
                                                       int m) const {
    const Shape& s = s_vm.shape();
    if (s.size() != 4) throw ShapeError(cat("spatial_attention: want [C,T,H,W], got ", shape_str(s)));
    const int h = s[2], w = s[3];
    Var<S> sc = mean_axis(t, s_vm, 1);             // [C,H,W]
    Var<S> mx = max_axis(t, sc, 0);
    Var<S> mn = mean_axis(t, sc, 0);
    Var<S> desc = concat_axis0(t, std::vector<Var<S>>{reshape(t, mx, {1, h, w}), reshape(t, mn, {1, h, w})});
    Var<S> att = conv2d(t, desc, param(p, cat("cue.sem", m, ".att.w")),
                        param(p, cat("cue.sem", m, ".att.b")), 1, 3, PadMode::kClamp);
    Var<S> wmap = reshape(t, sigmoid(t, att), {h, w});
    Var<S> ms = spatial_scale(t, sc, wmap);
    Var<S> f = cue_head(t, p, ms, cat("cue.sem", m), true);
    return {wmap, ms, f};
  }

  // Gaussian prior on the output grid; spread is learned through log-std
  // parameters so it stays positive.
  Var<S> center_map(Tape<S>& t, const Bound<S>& p) const {
    Var<S> surf = center_surface(t, param(p, "cue.center.rho_x"), param(p, "cue.center.rho_y"),
                                 cfg_.output_h, cfg_.output_w);
    return normalize_sum1(t, surf);
  }

  // ---- aggregation ------------------------------------------------------------

  Var<S> concat_cues(Tape<S>& t, Var<S> f_audio, const std::array<Var<S>, 4>& f_motion,
                     const std::array<Var<S>, 4>& f_semantic, Var<S> f_center) const {
    std::vector<Var<S>> parts;
    parts.reserve(kCueChannels);
    auto push = [&](Var<S> v, const std::string& which) {
      if (v.shape() != Shape{cfg_.output_h, cfg_.output_w})
        throw ShapeError(cat("concat_cues: ", which, " has shape ", shape_str(v.shape()), ", want ",
                             cfg_.output_h, "x", cfg_.output_w));
      parts.push_back(reshape(t, v, {1, cfg_.output_h, cfg_.output_w}));
    };
    push(f_audio, "audio");
    for (int m = 0; m < 4; ++m) push(f_motion[static_cast<std::size_t>(m)], cat("motion", m + 1));
    for (int m = 0; m < 4; ++m) push(f_semantic[static_cast<std::size_t>(m)], cat("semantic", m + 1));
    push(f_center, "center");
    return concat_axis0(t, parts);
  }

  // Channel gate from globally pooled cues: two channel-mixing layers, each
  // batch-normalized and squashed; widths 10 -> 5 -> 10.
  Var<S> global_context(Tape<S>& t, const Bound<S>& p, Var<S> m_conc) const {
    const Shape& s = m_conc.shape();
    Var<S> gap = mean_axis(t, reshape(t, m_conc, {s[0], s[1] * s[2]}), 1);
    Var<S> z = linear(t, gap, param(p, "fuse.glob.fc1.w"), param(p, "fuse.glob.fc1.b"));
    z = channel_affine(t, z, param(p, "fuse.glob.bn1.g"), param(p, "fuse.glob.bn1.b"));
    z = sigmoid(t, z);
    z = linear(t, z, param(p, "fuse.glob.fc2.w"), param(p, "fuse.glob.fc2.b"));
    z = channel_affine(t, z, param(p, "fuse.glob.bn2.g"), param(p, "fuse.glob.bn2.b"));
    return sigmoid(t, z);
  }

  // Per-pixel channel mixing, widths 10 -> 5 -> 10, ReLU inside, no final
  // activation.
  Var<S> local_context(Tape<S>& t, const Bound<S>& p, Var<S> m_conc) const {
    Var<S> z = conv2d(t, m_conc, param(p, "fuse.loc.pw1.w"), param(p, "fuse.loc.pw1.b"), 1, 0);
    z = channel_affine(t, z, param(p, "fuse.loc.bn1.g"), param(p, "fuse.loc.bn1.b"));
    z = relu(t, z);
    z = conv2d(t, z, param(p, "fuse.loc.pw2.w"), param(p, "fuse.loc.pw2.b"), 1, 0);
    return channel_affine(t, z, param(p, "fuse.loc.bn2.g"), param(p, "fuse.loc.bn2.b"));
  }

  // Three pointwise convolutions (10 -> 8 -> 4 -> 1) and a spatial softmax.
  Var<S> readout(Tape<S>& t, const Bound<S>& p, Var<S> m) const {
    Var<S> z = conv2d(t, m, param(p, "readout.conv0.w"), param(p, "readout.conv0.b"), 1, 0);
    z = relu(t, z);
    z = conv2d(t, z, param(p, "readout.conv1.w"), param(p, "readout.conv1.b"), 1, 0);
    z = relu(t, z);
    z = conv2d(t, z, param(p, "readout.conv2.w"), param(p, "readout.conv2.b"), 1, 0);
    z = reshape(t, z, {m.shape()[1], m.shape()[2]});
    return softmax_flat(t, z);
  }

  // ---- full pass ----------------------------------------------------------------

  // frames_tchw: [T,3,H,W] as stored on disk; audio: tapered window samples.
  Fwd forward(Tape<S>& t, const Bound<S>& p, const Tensor<S>& frames_tchw,
              const Tensor<S>& audio) const {
    Fwd f;
    f.audio_active = cfg_.variant != Variant::kVisualOnly;
    f.motion_active = cfg_.variant != Variant::kNoTa;
    f.semantic_active = cfg_.variant != Variant::kNoSa;

    const Shape& fs = frames_tchw.shape();
    if (fs.size() != 4 || fs[1] != 3)
      throw ShapeError(cat("forward: want frames [T,3,H,W], got ", shape_str(fs)));
    if (fs[2] / 4 != cfg_.output_h || fs[3] / 4 != cfg_.output_w)
      throw ShapeError(cat("forward: frames ", fs[2], "x", fs[3], " do not map to the configured output ",
                           cfg_.output_h, "x", cfg_.output_w));
    f.s_v = encode_visual(t, p, t.constant(to_cthw(frames_tchw)));
    const int h4 = f.s_v[3].shape()[2], w4 = f.s_v[3].shape()[3];

    if (f.audio_active) {
      f.s_a = encode_audio(t, p, t.constant(audio));
      f.V = pool_visual(t, f.s_v[3]);
      f.h_a = embed_audio(t, p, f.s_a);
      f.a_raw = sounding_scores(t, p, f.V, f.h_a, cfg_.variant != Variant::kAvInnerProduct);
      f.alpha = softmax_flat(t, f.a_raw);
      f.h_z = context_vector(t, f.alpha, f.V);
      f.v_hat = project_context(t, p, f.h_z);
      f.f_audio = audio_saliency(t, p, f.alpha, h4, w4);
    } else {
      f.f_audio = uniform_map(t);
    }

    for (int m = 0; m < 4; ++m) {
      const auto mi = static_cast<std::size_t>(m);
      if (f.motion_active) {
        auto [m_t, fm] = temporal_attention(t, p, f.s_v[mi], m + 1);
        f.m_t[mi] = m_t;
        f.f_motion[mi] = fm;
      } else {
        f.f_motion[mi] = uniform_map(t);
      }
      if (f.semantic_active) {
        auto [wmap, ms, fsem] = spatial_attention(t, p, f.s_v[mi], m + 1);
        f.m_weight[mi] = wmap;
        (void)ms;
        f.f_semantic[mi] = fsem;
      } else {
        f.f_semantic[mi] = uniform_map(t);
      }
    }
    f.f_center = center_map(t, p);
    f.m_conc = concat_cues(t, f.f_audio, f.f_motion, f.f_semantic, f.f_center);

    if (cfg_.variant == Variant::kConcatFusion) {
      f.m_fusion = f.m_conc;
    } else {
      f.g = global_context(t, p, f.m_conc);
      f.l_ctx = local_context(t, p, f.m_conc);
      f.m_fusion = channel_scale(t, f.l_ctx, f.g);
    }
    f.f_map = readout(t, p, f.m_fusion);
    return f;
  }

  // y: fixation density at output resolution.
  Losses losses(Tape<S>& t, const Fwd& f, const Tensor<S>& y) const {
    const S eps = static_cast<S>(cfg_.epsilon);
    Losses L;
    if (f.audio_active)
      L.l_a = add(t, kl_term(t, f.f_audio, y, eps), l2_distance(t, f.v_hat, f.s_a));
    else
      L.l_a = t.constant(Tensor<S>::scalar(0));

    Var<S> ms;
    for (int m = 0; m < 4; ++m) {
      const auto mi = static_cast<std::size_t>(m);
      if (f.motion_active) ms = add_or_init(t, ms, kl_term(t, f.f_motion[mi], y, eps));
      if (f.semantic_active) ms = add_or_init(t, ms, kl_term(t, f.f_semantic[mi], y, eps));
    }
    L.l_ms = ms.valid() ? ms : t.constant(Tensor<S>::scalar(0));
    L.l_fuse = kl_term(t, f.f_map, y, eps);
    L.l_final = add(t, add(t, scale(t, L.l_a, static_cast<S>(cfg_.w1)), scale(t, L.l_ms, static_cast<S>(cfg_.w2))),
                    scale(t, L.l_fuse, static_cast<S>(cfg_.w3)));
    return L;
  }

  // [T,3,H,W] -> [3,T,H,W]
  static Tensor<S> to_cthw(const Tensor<S>& frames) {
    const Shape& s = frames.shape();
    if (s.size() != 4 || s[1] != 3) throw ShapeError(cat("to_cthw: want [T,3,H,W], got ", shape_str(s)));
    const int T = s[0], H = s[2], W = s[3];
    Tensor<S> out({3, T, H, W});
    const std::int64_t hw = static_cast<std::int64_t>(H) * W;
    for (int ti = 0; ti < T; ++ti)
      for (int c = 0; c < 3; ++c)
        for (std::int64_t i = 0; i < hw; ++i)
          out[(static_cast<std::int64_t>(c) * T + ti) * hw + i] = frames[(static_cast<std::int64_t>(ti) * 3 + c) * hw + i];
    return out;
  }

 private:
  static constexpr int kCueChannels = 10;  // audio + 4 motion + 4 semantic + center

  Var<S> uniform_map(Tape<S>& t) const {
    const S v = static_cast<S>(1.0 / (static_cast<double>(cfg_.output_h) * cfg_.output_w));
    return t.constant(Tensor<S>::full({cfg_.output_h, cfg_.output_w}, v));
  }

  static Var<S> add_or_init(Tape<S>& t, Var<S> acc, Var<S> term) {
    return acc.valid() ? add(t, acc, term) : term;
  }

  // Shared cue-map head: optional pointwise conv at block resolution, nearest
  // resize to the output grid, a 3x3 conv that starts as a box blur, then a
  // positivity squash and sum-1 normalization.
  Var<S> cue_head(Tape<S>& t, const Bound<S>& p, Var<S> map_chw, const std::string& prefix,
                  bool pointwise) const {
    Var<S> x = map_chw;
    if (pointwise) x = conv2d(t, x, param(p, prefix + ".pw.w"), param(p, prefix + ".pw.b"), 1, 0);
    x = resize_nearest(t, x, cfg_.output_h, cfg_.output_w);
    x = conv2d(t, x, param(p, prefix + ".rc.w"), param(p, prefix + ".rc.b"), 1, 1, PadMode::kClamp);
    x = softplus(t, x);
    x = reshape(t, x, {cfg_.output_h, cfg_.output_w});
    return normalize_sum1(t, x);
  }

  void build(Rng& rng) {
    const auto& c = cfg_.channels;
    const int da = cfg_.d_a, dh = cfg_.d_h();
    auto samp = [&](std::string n, Shape s) { store_.add_sampled(std::move(n), std::move(s), rng); };
    auto fixed = [&](std::string n, Tensor<S> v) { store_.add(std::move(n), std::move(v), false); };
    auto resize_conv = [&](const std::string& prefix) {
      fixed(prefix + ".w", Tensor<S>::full({1, 1, 3, 3}, static_cast<S>(1.0 / 9.0)));
      fixed(prefix + ".b", Tensor<S>::full({1}, S(0)));
    };

    const std::array<int, 4> ac{16, 32, 64, da};
    int prev = 1;
    for (int i = 0; i < 4; ++i) {
      const int ch = ac[static_cast<std::size_t>(i)];
      samp(cat("audio.conv", i, ".w"), {ch, prev, kAudioKernel});
      samp(cat("audio.conv", i, ".b"), {ch});
      prev = ch;
    }

    prev = 3;
    for (int m = 1; m <= 4; ++m) {
      const int ch = c[static_cast<std::size_t>(m - 1)];
      samp(cat("visual.block", m, ".conv1.w"), {ch, prev, 3, 3, 3});
      samp(cat("visual.block", m, ".conv1.b"), {ch});
      samp(cat("visual.block", m, ".conv2.w"), {ch, ch, 3, 3, 3});
      samp(cat("visual.block", m, ".conv2.b"), {ch});
      samp(cat("visual.block", m, ".proj.w"), {ch, prev, 1, 1, 1});
      samp(cat("visual.block", m, ".proj.b"), {ch});
      prev = ch;
    }

    samp("loc.embed1.w", {dh, da});
    samp("loc.embed1.b", {dh});
    samp("loc.embed2.w", {dh, dh});
    samp("loc.embed2.b", {dh});
    samp("loc.w1", {dh, dh});
    samp("loc.w2", {dh, dh});
    samp("loc.proj1.w", {dh, dh});
    samp("loc.proj1.b", {dh});
    samp("loc.proj2.w", {da, dh});
    samp("loc.proj2.b", {da});

    resize_conv("cue.audio.rc");
    for (int m = 1; m <= 4; ++m) {
      samp(cat("cue.motion", m, ".pw.w"), {1, 1, 1, 1});
      samp(cat("cue.motion", m, ".pw.b"), {1});
      resize_conv(cat("cue.motion", m, ".rc"));
      samp(cat("cue.sem", m, ".att.w"), {1, 2, 7, 7});
      samp(cat("cue.sem", m, ".att.b"), {1});
      samp(cat("cue.sem", m, ".pw.w"), {1, c[static_cast<std::size_t>(m - 1)], 1, 1});
      samp(cat("cue.sem", m, ".pw.b"), {1});
      resize_conv(cat("cue.sem", m, ".rc"));
    }

    const double sigma0 = 0.25 * std::min(cfg_.output_h, cfg_.output_w);
    fixed("cue.center.rho_x", Tensor<S>::full({1}, static_cast<S>(std::log(sigma0))));
    fixed("cue.center.rho_y", Tensor<S>::full({1}, static_cast<S>(std::log(sigma0))));

    const int cf = kCueChannels, mid = cf / 2;
    auto bn = [&](const std::string& prefix, int n) {
      fixed(prefix + ".g", Tensor<S>::full({n}, S(1)));
      fixed(prefix + ".b", Tensor<S>::full({n}, S(0)));
    };
    samp("fuse.glob.fc1.w", {mid, cf});
    samp("fuse.glob.fc1.b", {mid});
    bn("fuse.glob.bn1", mid);
    samp("fuse.glob.fc2.w", {cf, mid});
    samp("fuse.glob.fc2.b", {cf});
    bn("fuse.glob.bn2", cf);
    samp("fuse.loc.pw1.w", {mid, cf, 1, 1});
    samp("fuse.loc.pw1.b", {mid});
    bn("fuse.loc.bn1", mid);
    samp("fuse.loc.pw2.w", {cf, mid, 1, 1});
    samp("fuse.loc.pw2.b", {cf});
    bn("fuse.loc.bn2", cf);

    samp("readout.conv0.w", {8, cf, 1, 1});
    samp("readout.conv0.b", {8});
    samp("readout.conv1.w", {4, 8, 1, 1});
    samp("readout.conv1.b", {4});
    samp("readout.conv2.w", {1, 4, 1, 1});
    samp("readout.conv2.b", {1});
  }

  TrainConfig cfg_;
  ParamStore<S> store_;
};

}  // namespace avsal

#endif  // AVSAL_MODEL_HPP
