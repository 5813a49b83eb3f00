#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mrn/autodiff.hpp"
#include "mrn/mask.hpp"

namespace mrn {

inline constexpr double kMsscGamma = 0.8;
inline constexpr double kMaskGamma = 0.6;

struct LossBreakdown {
  double l_mssc = 0.0;
  double l_mask = 0.0;
  double l_scal = 0.0;
  double total = 0.0;
  std::vector<double> stage_ce;     // per prediction y_0 .. y_N
  std::vector<double> stage_wbce;   // per mask m_1 .. m_{N-1}
};

// Stage weights gamma^i, i = 0..N, for N + 1 predictions.
std::vector<double> mssc_stage_weights(std::size_t predictions, double gamma = kMsscGamma);
// Weights gamma^(N - i), i = 1..N-1, for N - 1 masks.
std::vector<double> mask_stage_weights(std::size_t masks, double gamma = kMaskGamma);

// sum_i gamma^i CE(y_i, labels). Appends per-stage CE values to `stages`
// when given.
Var sequential_mssc_loss(std::span<const Var> logits, std::span<const std::uint8_t> labels,
                         double gamma = kMsscGamma, std::vector<double>* stages = nullptr);

// sum_{i=1}^{N-1} gamma^(N-i) WBCE(m_i, m_gt) over non-ignored voxels. Zero
// (a constant) when there are no masks.
Var sequential_mask_loss(Tape& tape, std::span<const Var> occupancy, std::span<const std::uint8_t> labels,
                         double gamma = kMaskGamma, bool balanced = true, std::vector<double>* stages = nullptr);

// Extra loss term; the default contributes nothing.
using ScalHook = std::function<Var(Tape&, std::span<const Var> logits)>;
Var zero_scal(Tape& tape, std::span<const Var> logits);

struct LossOptions {
  double gamma_mssc = kMsscGamma;
  double gamma_mask = kMaskGamma;
  bool mask_loss = true;
  bool balanced_bce = true;
  ScalHook scal = zero_scal;
};

struct TotalLoss {
  Var total;
  LossBreakdown breakdown;
};

TotalLoss total_loss(Tape& tape, std::span<const Var> logits, std::span<const Var> occupancy,
                     std::span<const std::uint8_t> labels, const LossOptions& options = {});

}  // namespace mrn
