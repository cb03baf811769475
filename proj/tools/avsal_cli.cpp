// Command-line front end: synthetic data generation, training, evaluation,
// per-frame prediction, and ablation sweeps.

#include <exception>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "avsal/dataset.hpp"
#include "avsal/image.hpp"
#include "avsal/train.hpp"

namespace {

using namespace avsal;

void cmd_gen_data(const std::string& spec_path, int n, std::uint64_t seed, const std::string& out) {
  const SceneSpec spec = parse_scene_spec(read_text_file(spec_path));
  const auto dirs = generate_dataset(spec, n, seed, out);
  std::cout << "wrote " << dirs.size() << " clips under " << out << "\n";
}

void cmd_train(const std::string& config_path, const std::string& out) {
  const TrainConfig cfg = parse_train_config(read_text_file(config_path));
  TrainRun run = train(cfg, out, &std::cout);
  std::cout << "saved checkpoint " << out << " after " << run.logs.size() << " epochs\n";
}

void cmd_eval(const std::string& ckpt, const std::string& data_dir, const std::string& report) {
  auto [model, lc] = load_model(ckpt);
  const auto data = load_dataset(data_dir);
  const auto rows = evaluate_model(model, data, lc.cfg.seed);
  write_metrics_csv(report, rows);
  const MetricReport m = mean_report(rows);
  std::cout << std::fixed << std::setprecision(4) << "mean over " << rows.size() << " clips: cc "
            << m.cc << " nss " << m.nss << " auc_j " << m.auc_j << " sauc " << m.sauc << " sim "
            << m.sim << "\n"
            << "report written to " << report << "\n";
}

// Emits per-frame saliency maps (grayscale + raw floats) and, for inspection,
// the cue maps of each clip's central-frame window.
void cmd_predict(const std::string& ckpt, const std::string& data_dir, const std::string& out_dir) {
  auto [model, lc] = load_model(ckpt);
  const auto data = load_dataset(data_dir);
  std::filesystem::create_directories(out_dir);
  for (const auto& d : data) {
    const std::string clip_out = out_dir + "/" + d.id;
    std::filesystem::create_directories(clip_out);
    const auto maps = predict_video(model, d.clip.frames, d.clip.audio);
    for (std::size_t i = 0; i < maps.size(); ++i) {
      std::ostringstream stem;
      stem << clip_out << "/frame_" << std::setw(4) << std::setfill('0') << i;
      write_pgm(stem.str() + ".pgm", maps[i]);
      write_float_map(stem.str() + ".bin", maps[i]);
    }

    Tape<float> tape;
    auto fwd = forward_clip(model, tape, d.clip);
    write_pgm(clip_out + "/cue_center.pgm", fwd.f_center.value());
    if (fwd.f_audio.valid()) write_pgm(clip_out + "/cue_audio.pgm", fwd.f_audio.value());
    for (int m = 0; m < 4; ++m) {
      write_pgm(cat(clip_out, "/cue_motion", m + 1, ".pgm"),
                fwd.f_motion[static_cast<std::size_t>(m)].value());
      write_pgm(cat(clip_out, "/cue_semantic", m + 1, ".pgm"),
                fwd.f_semantic[static_cast<std::size_t>(m)].value());
    }
  }
  std::cout << "predictions written under " << out_dir << "\n";
}

void cmd_ablate(const std::string& config_path, const std::string& variants_csv,
                const std::string& report, const std::string& eval_data) {
  const TrainConfig cfg = parse_train_config(read_text_file(config_path));
  std::vector<std::string> variants;
  std::istringstream in(variants_csv);
  std::string name;
  while (std::getline(in, name, ','))
    if (!name.empty()) variants.push_back(name);
  const auto rows = run_ablation(cfg, variants, eval_data, &std::cout);
  write_ablation_csv(report, rows);
  std::cout << "ablation report written to " << report << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"audio-visual saliency toolkit"};
  app.require_subcommand(1);

  std::string spec_path, out, config_path, ckpt, data_dir, report, variants, eval_data;
  int n = 8;
  std::uint64_t seed = 0;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic clip dataset");
  gen->add_option("--spec", spec_path, "scene spec file (key=value)")->required();
  gen->add_option("--n", n, "number of clips")->required();
  gen->add_option("--seed", seed, "base RNG seed");
  gen->add_option("--out", out, "output dataset directory")->required();

  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--config", config_path, "training config file (key=value)")->required();
  tr->add_option("--out", ckpt, "checkpoint path, overwritten each epoch")->required();

  auto* ev = app.add_subcommand("eval", "score a checkpoint against a dataset");
  ev->add_option("--ckpt", ckpt, "checkpoint path")->required();
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--report", report, "metrics CSV to write")->required();

  auto* pr = app.add_subcommand("predict", "emit per-frame saliency maps");
  pr->add_option("--ckpt", ckpt, "checkpoint path")->required();
  pr->add_option("--data", data_dir, "dataset directory")->required();
  pr->add_option("--out", out, "output directory")->required();

  auto* ab = app.add_subcommand("ablate", "train and score several variants");
  ab->add_option("--config", config_path, "training config file")->required();
  ab->add_option("--variants", variants, "comma-separated variant names")->required();
  ab->add_option("--report", report, "CSV to write")->required();
  ab->add_option("--eval-data", eval_data, "dataset for scoring (default: the training set)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) cmd_gen_data(spec_path, n, seed, out);
    else if (tr->parsed()) cmd_train(config_path, ckpt);
    else if (ev->parsed()) cmd_eval(ckpt, data_dir, report);
    else if (pr->parsed()) cmd_predict(ckpt, data_dir, out);
    else if (ab->parsed()) cmd_ablate(config_path, variants, report, eval_data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
