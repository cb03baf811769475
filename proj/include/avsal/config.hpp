#ifndef AVSAL_CONFIG_HPP
#define AVSAL_CONFIG_HPP

#include <array>
#include <cstdint>
#include <sstream>
#include <string>

#include "avsal/kv.hpp"

namespace avsal {

enum class Variant { kFull, kVisualOnly, kAvInnerProduct, kConcatFusion, kNoSa, kNoTa };

inline Variant parse_variant(const std::string& s) {
  if (s == "full") return Variant::kFull;
  if (s == "visual_only") return Variant::kVisualOnly;
  if (s == "av_inner_product") return Variant::kAvInnerProduct;
  if (s == "concat_fusion") return Variant::kConcatFusion;
  if (s == "no_sa") return Variant::kNoSa;
  if (s == "no_ta") return Variant::kNoTa;
  throw ConfigError(cat("variant: unknown value ", s));
}

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kVisualOnly: return "visual_only";
    case Variant::kAvInnerProduct: return "av_inner_product";
    case Variant::kConcatFusion: return "concat_fusion";
    case Variant::kNoSa: return "no_sa";
    case Variant::kNoTa: return "no_ta";
  }
  return "full";
}

struct TrainConfig {
  std::string dataset_path;
  int epochs = 50;
  int batch_size = 8;
  double learning_rate = 1e-4;
  double epsilon = 1e-7;
  double w1 = 1.0, w2 = 1.0, w3 = 1.0;
  Variant variant = Variant::kFull;
  std::uint64_t seed = 0;
  std::array<int, 4> channels{16, 32, 64, 128};
  int d_a = 64;
  // 0 means "derive from the dataset"; when set they must match it.
  int output_h = 0, output_w = 0;

  int d_h() const { return channels[3]; }

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs: must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size: must be at least 1");
    if (learning_rate <= 0) throw ConfigError("learning_rate: must be positive");
    if (epsilon < 0) throw ConfigError("epsilon: must be nonnegative");
    for (int c : channels)
      if (c < 1) throw ConfigError("channels: entries must be positive");
    if (d_a < 1) throw ConfigError("d_a: must be positive");
    if (output_h < 0 || output_w < 0) throw ConfigError("output_h/output_w: must be nonnegative");
  }
};

inline TrainConfig parse_train_config(const std::string& text) {
  TrainConfig cfg;
  bool d_h_seen = false;
  std::int64_t d_h_value = 0;
  for (const auto& [key, val] : parse_kv_text(text, "config")) {
    if (key == "dataset_path") cfg.dataset_path = val;
    else if (key == "epochs") cfg.epochs = static_cast<int>(kv_int(key, val));
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(kv_int(key, val));
    else if (key == "learning_rate") cfg.learning_rate = kv_double(key, val);
    else if (key == "epsilon") cfg.epsilon = kv_double(key, val);
    else if (key == "w1") cfg.w1 = kv_double(key, val);
    else if (key == "w2") cfg.w2 = kv_double(key, val);
    else if (key == "w3") cfg.w3 = kv_double(key, val);
    else if (key == "variant") cfg.variant = parse_variant(val);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(kv_int(key, val));
    else if (key == "channels") {
      const auto v = kv_list(key, val);
      if (v.size() != 4) throw ConfigError("channels: expected four comma-separated counts");
      for (int i = 0; i < 4; ++i) cfg.channels[static_cast<std::size_t>(i)] = static_cast<int>(v[static_cast<std::size_t>(i)]);
    } else if (key == "d_a") cfg.d_a = static_cast<int>(kv_int(key, val));
    else if (key == "d_h") {
      d_h_seen = true;
      d_h_value = kv_int(key, val);
    } else if (key == "output_h") cfg.output_h = static_cast<int>(kv_int(key, val));
    else if (key == "output_w") cfg.output_w = static_cast<int>(kv_int(key, val));
    else throw ConfigError(cat("unknown config key ", key));
  }
  // The attention space is spanned by the block-4 descriptors, so its width
  // is the fourth channel count; an explicit d_h may only restate that.
  if (d_h_seen && d_h_value != cfg.d_h())
    throw ConfigError(cat("d_h: must equal the fourth channels entry (", cfg.d_h(), "), got ", d_h_value));
  cfg.validate();
  return cfg;
}

inline std::string serialize_train_config(const TrainConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "dataset_path=" << cfg.dataset_path << "\n";
  out << "epochs=" << cfg.epochs << "\n";
  out << "batch_size=" << cfg.batch_size << "\n";
  out << "learning_rate=" << cfg.learning_rate << "\n";
  out << "epsilon=" << cfg.epsilon << "\n";
  out << "w1=" << cfg.w1 << "\nw2=" << cfg.w2 << "\nw3=" << cfg.w3 << "\n";
  out << "variant=" << variant_name(cfg.variant) << "\n";
  out << "seed=" << cfg.seed << "\n";
  out << "channels=" << cfg.channels[0] << "," << cfg.channels[1] << "," << cfg.channels[2] << ","
      << cfg.channels[3] << "\n";
  out << "d_a=" << cfg.d_a << "\n";
  out << "output_h=" << cfg.output_h << "\n";
  out << "output_w=" << cfg.output_w << "\n";
  return out.str();
}

}  // namespace avsal

#endif  // AVSAL_CONFIG_HPP
