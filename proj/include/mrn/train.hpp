#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrn/metrics.hpp"
#include "mrn/model.hpp"
#include "mrn/objective.hpp"
#include "mrn/perturb.hpp"

namespace mrn {

class NonFiniteLossError : public std::runtime_error {
 public:
  explicit NonFiniteLossError(const std::string& what) : std::runtime_error(what) {}
};

struct StepRecord {
  std::uint64_t step = 0;
  double lr = 0.0;
  double grad_norm = 0.0;  // before clipping
  LossBreakdown loss;
};

// Metrics of every prediction y_0 .. y_N over a scene set.
struct EvalReport {
  std::vector<MetricsReport> stages;
  const MetricsReport& coarse() const { return stages.front(); }
  const MetricsReport& refined() const { return stages.back(); }
};

// Mask head in eval mode; accumulates confusion counts over all scenes.
EvalReport evaluate(Model& model, const std::vector<SceneSample>& scenes);

struct TrainOptions {
  bool resume = false;                  // continue from <out>/checkpoint.bin
  std::optional<int> stop_after_epochs;  // stop early (the schedule still spans config.epochs)
  bool evaluate = true;                  // write metrics after the final epoch
  std::ostream* progress = nullptr;
};

struct TrainResult {
  Model model;
  std::vector<StepRecord> history;  // steps run by this call
  std::uint64_t steps_done = 0;
  std::uint64_t epochs_done = 0;
  std::optional<EvalReport> eval;
};

// Writes into `out_dir`: config.cfg, train_log.jsonl (one record per step),
// checkpoint.bin after every epoch, and metrics.json / metrics.txt at the end.
TrainResult train(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                  const TrainOptions& options = {});

// One optimisation step on one scene; returns the loss breakdown.
// `grad_norm`, when given, receives the global gradient norm before clipping.
LossBreakdown train_step(Model& model, const SceneSample& scene, double lr, std::uint64_t dropout_seed,
                         double* grad_norm = nullptr);

// Rebuilds the model recorded in a checkpoint.
Model load_model(const std::filesystem::path& checkpoint);

struct RobustnessRow {
  PerturbKind kind = PerturbKind::None;
  PerturbLevel level = PerturbLevel::Weak;
  MetricsReport coarse;
  MetricsReport refined;
};

std::vector<RobustnessRow> robustness_report(Model& model, const std::vector<SceneSample>& scenes,
                                             const std::vector<PerturbKind>& kinds,
                                             const std::vector<PerturbLevel>& levels);
std::string robustness_table(const std::vector<RobustnessRow>& rows);

std::string loss_json(std::uint64_t step, const LossBreakdown& loss, double grad_norm);
std::string metrics_json(const MetricsReport& report);
std::string eval_json(const EvalReport& report);

}  // namespace mrn
