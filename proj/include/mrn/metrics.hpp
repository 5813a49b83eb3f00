#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrn/tensor.hpp"

namespace mrn {

struct MetricsReport {
  double sc_iou = 0.0;
  double sc_precision = 0.0;
  double sc_recall = 0.0;
  // Classes 1..N; empty when the class appears in neither prediction nor
  // ground truth, and then left out of the mean.
  std::vector<std::optional<double>> class_iou;
  double ssc_miou = 0.0;
};

// Per-voxel argmax over classes; the lowest class wins ties.
std::vector<std::uint8_t> argmax_labels(const DenseVoxelTensor& logits);

/// Confusion counts accumulated over a dataset. Voxels labelled 255 in the
/// ground truth are skipped.
class ConfusionAccumulator {
 public:
  explicit ConfusionAccumulator(int classes);  // semantic classes, excluding empty

  void add(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);
  void merge(const ConfusionAccumulator& other);
  MetricsReport report() const;

 private:
  int classes_;
  std::uint64_t tp_ = 0, fp_ = 0, fn_ = 0;
  std::vector<std::uint64_t> inter_, uni_;
};

MetricsReport evaluate_labels(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth,
                              int classes);

// Aligned plain-text rendering, one row per named report.
std::string metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace mrn
