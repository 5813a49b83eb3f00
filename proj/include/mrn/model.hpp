#pragma once

#include <random>
#include <vector>

#include "mrn/autodiff.hpp"
#include "mrn/config.hpp"
#include "mrn/recurrent.hpp"
#include "mrn/scene.hpp"

namespace mrn {

/// Coarse network plus the masked recurrent refinement, as named parameters.
struct Model {
  ExperimentConfig config;
  ParameterStore params;
};

// Registers every parameter the config needs, initialised from `config.seed`.
Model build_model(const ExperimentConfig& config);

// Scalars in one recurrent cell.
std::size_t gru_parameter_count(const ExperimentConfig& config);

struct ForwardOptions {
  bool training = false;
  std::mt19937_64* dropout_rng = nullptr;
};

struct ForwardResult {
  Var coarse_features;             // h_0
  std::vector<Var> logits;         // y_0 .. y_N (only y_0 without refinement)
  std::vector<Var> occupancy;      // predicted occupied probability, masks 1 .. N-1
  std::vector<VoxelMask> masks;    // masks fed to each recurrent step
};

// Projected 2D features for the recurrent branch, per `config.projection`.
DenseVoxelTensor project_features(const SceneSample& scene, ProjectionKind kind);

ForwardResult forward(Tape& tape, Model& model, const SceneSample& scene, const ForwardOptions& options = {});

RefineOptions refine_options(const ExperimentConfig& config, const ForwardOptions& options = {});

}  // namespace mrn
