#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mrn/recurrent.hpp"
#include "mrn/tensor.hpp"

namespace mrn {

enum class ProjectionKind { Surface, Sight, Dap };

/// Everything needed to rebuild a run: scene generator, model, objective
/// and optimiser settings plus the ablation toggles.
struct ExperimentConfig {
  // scene
  GridShape grid{32, 16, 32, 1};
  double voxel_size = 0.08;
  int image_width = 64;
  int image_height = 48;
  double hfov_degrees = 60.0;
  double depth_rms = 0.05;
  double feature_noise = 0.05;
  int boxes = 4;
  bool wall = true;
  int train_scenes = 200;
  int eval_scenes = 20;

  // model
  int classes = 5;  // semantic classes, plus empty
  int image_channels = 8;
  int hidden = 16;
  int iterations = 2;
  int gate_kernel = 3;
  int attention_reduction = 4;
  int mask_channels = 8;
  double dropout = 0.1;
  double mask_threshold = 0.6;
  int topk = 5;

  // objective and optimiser
  double gamma_mssc = 0.8;
  double gamma_mask = 0.6;
  bool balanced_bce = true;
  double lr = 0.1;
  double poly_power = 0.9;
  double grad_clip = 5.0;  // global gradient-norm bound, 0 disables
  int epochs = 4;
  std::uint64_t seed = 1;

  // toggles
  bool mrn = true;
  bool mask_update = true;
  bool mask_init = true;
  bool mask_loss = true;
  bool tied_weights = true;
  ProjectionKind projection = ProjectionKind::Dap;
  CellKind cell = CellKind::MsGru;
  CandidateConv candidate = CandidateConv::Sparse;

  // Throws ContractViolation naming the first inconsistent field.
  void validate() const;
};

// Flat `key = value` lines, '#' comments. Unknown keys and malformed values
// throw FormatError. Keys not mentioned keep their defaults.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Canonical text of every field; parse_config(to_text(c)) reproduces c.
std::string to_text(const ExperimentConfig& config);

std::string to_string(ProjectionKind kind);
std::string to_string(CellKind kind);
std::string to_string(CandidateConv kind);

}  // namespace mrn
