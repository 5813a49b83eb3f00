#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrn/config.hpp"
#include "mrn/mask.hpp"

namespace mrn {

struct StageMacs {
  std::string name;
  std::uint64_t dense = 0;   // ordinary GRU, in-grid taps only
  std::uint64_t masked = 0;  // MS-GRU on the mask
};

/// Multiply-accumulate counts of one recurrent step, dense against masked.
struct ProfileReport {
  double occupancy = 0.0;
  std::size_t mask_voxels = 0;
  std::size_t grid_voxels = 0;
  int iterations = 1;
  std::vector<StageMacs> stages;  // update gate, reset gate, candidate

  std::uint64_t dense_step = 0;
  std::uint64_t dense_step_padded = 0;  // closed form counting zero padding
  std::uint64_t masked_step = 0;        // from the kernel maps
  std::uint64_t measured_step = 0;      // counted while running the step
  double predicted_ratio = 0.0;         // expectation for a uniform random mask

  std::uint64_t dense_cumulative() const { return dense_step * std::uint64_t(iterations); }
  std::uint64_t masked_cumulative() const { return masked_step * std::uint64_t(iterations); }
  double ratio() const { return dense_step == 0 ? 0.0 : double(masked_step) / double(dense_step); }
};

// round(occupancy * voxels) voxels chosen uniformly without replacement.
VoxelMask random_mask(GridShape shape, double occupancy, std::uint64_t seed);

ProfileReport profile_gru(const ExperimentConfig& config, const VoxelMask& mask);
ProfileReport profile_gru(const ExperimentConfig& config, double occupancy, std::uint64_t seed);

std::string profile_table(const ProfileReport& report);

}  // namespace mrn
