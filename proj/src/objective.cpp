#include "mrn/objective.hpp"

#include <cmath>

#include "mrn/error.hpp"
#include "mrn/ops.hpp"

namespace mrn {

std::vector<double> mssc_stage_weights(std::size_t predictions, double gamma) {
  std::vector<double> w(predictions);
  for (std::size_t i = 0; i < predictions; ++i) w[i] = std::pow(gamma, double(i));
  return w;
}

std::vector<double> mask_stage_weights(std::size_t masks, double gamma) {
  // With N - 1 masks, mask i (1-based) gets gamma^(N - i).
  const std::size_t n = masks + 1;
  std::vector<double> w(masks);
  for (std::size_t i = 1; i <= masks; ++i) w[i - 1] = std::pow(gamma, double(n - i));
  return w;
}

Var sequential_mssc_loss(std::span<const Var> logits, std::span<const std::uint8_t> labels, double gamma,
                         std::vector<double>* stages) {
  require(!logits.empty(), "sequential loss needs at least one prediction");
  const auto weights = mssc_stage_weights(logits.size(), gamma);
  Var total;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const Var ce = ad::cross_entropy(logits[i], labels);
    if (stages) stages->push_back(ce.scalar());
    const Var term = weights[i] == 1.0 ? ce : ad::scale(ce, weights[i]);
    total = i == 0 ? term : ad::add(total, term);
  }
  return total;
}

Var sequential_mask_loss(Tape& tape, std::span<const Var> occupancy, std::span<const std::uint8_t> labels,
                         double gamma, bool balanced, std::vector<double>* stages) {
  if (occupancy.empty()) return tape.constant(Layout::flat(1), {0.0});
  const GridShape shape = occupancy.front().layout.shape;
  const VoxelMask gt = mask_gt(labels, shape);
  std::vector<std::uint8_t> valid(labels.size());
  for (std::size_t v = 0; v < labels.size(); ++v) valid[v] = labels[v] != kIgnoreLabel;
  const auto weights = mask_stage_weights(occupancy.size(), gamma);
  Var total;
  for (std::size_t i = 0; i < occupancy.size(); ++i) {
    const Var bce = ad::weighted_bce(occupancy[i], gt.bits, valid, balanced);
    if (stages) stages->push_back(bce.scalar());
    const Var term = ad::scale(bce, weights[i]);
    total = i == 0 ? term : ad::add(total, term);
  }
  return total;
}

Var zero_scal(Tape& tape, std::span<const Var>) { return tape.constant(Layout::flat(1), {0.0}); }

TotalLoss total_loss(Tape& tape, std::span<const Var> logits, std::span<const Var> occupancy,
                     std::span<const std::uint8_t> labels, const LossOptions& options) {
  TotalLoss out;
  LossBreakdown& b = out.breakdown;
  const Var mssc = sequential_mssc_loss(logits, labels, options.gamma_mssc, &b.stage_ce);
  const Var mask = options.mask_loss
                       ? sequential_mask_loss(tape, occupancy, labels, options.gamma_mask, options.balanced_bce,
                                              &b.stage_wbce)
                       : tape.constant(Layout::flat(1), {0.0});
  const Var scal = options.scal ? options.scal(tape, logits) : zero_scal(tape, logits);
  require(scal.layout.size() == 1, "scal hook must return a scalar");
  out.total = ad::add(ad::add(mssc, mask), scal);
  b.l_mssc = mssc.scalar();
  b.l_mask = mask.scalar();
  b.l_scal = scal.scalar();
  b.total = out.total.scalar();
  return out;
}

}  // namespace mrn
