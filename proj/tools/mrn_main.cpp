// Command-line front end: train, eval, profile, perturb-eval, gen-scenes.
#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mrn/error.hpp"
#include "mrn/profile.hpp"
#include "mrn/scene_io.hpp"
#include "mrn/train.hpp"

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string zero_padded(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04d", i);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked recurrent semantic scene completion on synthetic voxel scenes"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint, scenes_dir;
  bool resume = false;
  int stop_after = 0;
  auto* train = app.add_subcommand("train", "train a model and write checkpoint, logs and metrics");
  train->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_flag("--resume", resume, "continue from <out>/checkpoint.bin");
  train->add_option("--stop-after", stop_after, "stop after this many epochs");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a scene directory");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--scenes", scenes_dir, "directory of scenes")->required()->check(CLI::ExistingDirectory);

  double occupancy = 0.15;
  std::uint64_t seed = 1;
  auto* profile = app.add_subcommand("profile", "MAC counts of GRU against MS-GRU at a mask occupancy");
  profile->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  profile->add_option("--occupancy", occupancy, "mask occupancy in [0, 1]")->required()->check(CLI::Range(0.0, 1.0));
  profile->add_option("--seed", seed, "mask seed");

  std::string kinds = "dark,motion,bright,fog", levels = "weak,strong";
  auto* perturb = app.add_subcommand("perturb-eval", "coarse against refined metrics under image perturbations");
  perturb->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  perturb->add_option("--kinds", kinds, "comma list of none,dark,motion,bright,fog");
  perturb->add_option("--levels", levels, "comma list of weak,strong");
  perturb->add_option("--scenes", scenes_dir, "scene directory (default: the config's evaluation scenes)");

  int count = 1;
  auto* gen = app.add_subcommand("gen-scenes", "write synthetic scenes");
  gen->add_option("--seed", seed, "base seed")->required();
  gen->add_option("--count", count, "number of scenes")->required()->check(CLI::PositiveNumber);
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--config", config_path, "config file for scene settings")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      mrn::TrainOptions opts;
      opts.resume = resume;
      if (stop_after > 0) opts.stop_after_epochs = stop_after;
      opts.progress = &std::cerr;
      const auto result = mrn::train(mrn::load_config(config_path), out_dir, opts);
      if (result.eval) {
        std::vector<std::pair<std::string, mrn::MetricsReport>> rows;
        for (std::size_t s = 0; s < result.eval->stages.size(); ++s)
          rows.emplace_back("y" + std::to_string(s), result.eval->stages[s]);
        std::cout << mrn::metrics_table(rows);
      }
    } else if (*eval) {
      mrn::Model model = mrn::load_model(checkpoint);
      const auto scenes = mrn::load_scenes(scenes_dir);
      if (scenes.empty()) throw mrn::FormatError("no scenes found in " + scenes_dir);
      const auto report = mrn::evaluate(model, scenes);
      std::vector<std::pair<std::string, mrn::MetricsReport>> rows;
      for (std::size_t s = 0; s < report.stages.size(); ++s) rows.emplace_back("y" + std::to_string(s), report.stages[s]);
      std::cout << mrn::eval_json(report) << "\n" << mrn::metrics_table(rows);
    } else if (*profile) {
      const auto report = mrn::profile_gru(mrn::load_config(config_path), occupancy, seed);
      std::cout << mrn::profile_table(report);
    } else if (*perturb) {
      mrn::Model model = mrn::load_model(checkpoint);
      const auto scenes = scenes_dir.empty()
                              ? mrn::generate_scenes(model.config.seed, mrn::kEvalStream, model.config.eval_scenes,
                                                     model.config)
                              : mrn::load_scenes(scenes_dir);
      std::vector<mrn::PerturbKind> k;
      std::vector<mrn::PerturbLevel> l;
      for (const auto& s : split_list(kinds)) k.push_back(mrn::parse_perturb_kind(s));
      for (const auto& s : split_list(levels)) l.push_back(mrn::parse_perturb_level(s));
      std::cout << mrn::robustness_table(mrn::robustness_report(model, scenes, k, l));
    } else if (*gen) {
      const mrn::ExperimentConfig config = config_path.empty() ? mrn::ExperimentConfig{} : mrn::load_config(config_path);
      const auto scenes = mrn::generate_scenes(seed, mrn::kTrainStream, count, config);
      for (int i = 0; i < count; ++i) mrn::save_scene(std::filesystem::path(out_dir) / zero_padded(i), scenes[std::size_t(i)]);
      std::cout << "wrote " << count << " scene(s) to " << out_dir << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
