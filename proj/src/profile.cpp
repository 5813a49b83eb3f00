#include "mrn/profile.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "mrn/conv.hpp"
#include "mrn/error.hpp"
#include "mrn/kernels.hpp"
#include "mrn/recurrent.hpp"

namespace mrn {

VoxelMask random_mask(GridShape shape, double occupancy, std::uint64_t seed) {
  require(occupancy >= 0.0 && occupancy <= 1.0, "occupancy must lie in [0, 1]");
  VoxelMask m(shape);
  const std::size_t n = m.bits.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto take = std::size_t(std::llround(occupancy * double(n)));
  for (std::size_t i = 0; i < take; ++i) m.bits[order[i]] = 1;
  return m;
}

ProfileReport profile_gru(const ExperimentConfig& config, const VoxelMask& mask) {
  config.validate();
  require(mask.shape.same_spatial(config.grid), "mask grid does not match config");
  const Extent e{config.gate_kernel, config.gate_kernel, config.gate_kernel};
  const int c_in = config.hidden + config.image_channels, c_out = config.hidden;
  const GridShape grid = config.grid.with_channels(1);
  const auto active = mask.active_set();
  const std::uint64_t per_pair = std::uint64_t(c_in) * std::uint64_t(c_out);

  ProfileReport r;
  r.grid_voxels = grid.voxels();
  r.mask_voxels = active->size();
  r.occupancy = double(r.mask_voxels) / double(r.grid_voxels);
  r.iterations = config.iterations;

  const std::uint64_t dense_pairs = dense_map(grid, e).pair_count();
  const std::uint64_t dense_gate = dense_pairs * per_pair;
  const std::uint64_t sub = count_macs({ConvKind::Submanifold, e, c_in, c_out, grid}, active.get());
  const std::uint64_t cand = config.candidate == CandidateConv::Sparse
                                 ? count_macs({ConvKind::Sparse, e, c_in, c_out, grid}, active.get())
                                 : sub;
  r.stages = {{"update gate", dense_gate, sub}, {"reset gate", dense_gate, sub}, {"candidate", dense_gate, cand}};
  for (const auto& s : r.stages) {
    r.dense_step += s.dense;
    r.masked_step += s.masked;
  }
  r.dense_step_padded = 3 * count_macs({ConvKind::Dense, e, c_in, c_out, grid});

  // Expected pair counts when each voxel is in the mask independently of
  // the others with the observed density.
  const double v = double(r.grid_voxels), n = double(r.mask_voxels);
  const double density = n / v;
  const double neighbour = v > 1.0 ? (n - 1.0) / (v - 1.0) : 0.0;
  const double sub_pairs = density * (v + (double(dense_pairs) - v) * neighbour);
  const double sparse_pairs = density * double(dense_pairs);
  const double cand_pairs = config.candidate == CandidateConv::Sparse ? sparse_pairs : sub_pairs;
  r.predicted_ratio = (2.0 * sub_pairs + cand_pairs) / (3.0 * double(dense_pairs));

  if (!active->empty()) {
    std::mt19937_64 rng(7);
    const MSGRUParams params = MSGRUParams::random(c_out, config.image_channels, e, rng);
    const DenseVoxelTensor h(config.grid.with_channels(c_out)), x(config.grid.with_channels(config.image_channels));
    kernels::reset_executed_macs();
    (void)msgru_step(h, x, mask, params, config.candidate);
    r.measured_step = kernels::executed_macs();
  }
  return r;
}

ProfileReport profile_gru(const ExperimentConfig& config, double occupancy, std::uint64_t seed) {
  return profile_gru(config, random_mask(config.grid, occupancy, seed));
}

std::string profile_table(const ProfileReport& r) {
  std::string out;
  char buf[256];
  auto g = [](std::uint64_t m) { return double(m) / 1e6; };
  std::snprintf(buf, sizeof buf, "mask %zu / %zu voxels (occupancy %.4f), %d iteration(s)\n", r.mask_voxels,
                r.grid_voxels, r.occupancy, r.iterations);
  out += buf;
  std::snprintf(buf, sizeof buf, "%-12s  %14s  %14s\n", "stage", "GRU MMACs", "MS-GRU MMACs");
  out += buf;
  for (const auto& s : r.stages) {
    std::snprintf(buf, sizeof buf, "%-12s  %14.3f  %14.3f\n", s.name.c_str(), g(s.dense), g(s.masked));
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-12s  %14.3f  %14.3f\n", "step", g(r.dense_step), g(r.masked_step));
  out += buf;
  std::snprintf(buf, sizeof buf, "%-12s  %14.3f  %14.3f\n", "cumulative", g(r.dense_cumulative()),
                g(r.masked_cumulative()));
  out += buf;
  std::snprintf(buf, sizeof buf, "measured MS-GRU step %.3f MMACs; ratio %.4f (expected %.4f); padded dense step %.3f MMACs\n",
                g(r.measured_step), r.ratio(), r.predicted_ratio, g(r.dense_step_padded));
  out += buf;
  return out;
}

}  // namespace mrn
