#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mrn/autodiff.hpp"
#include "mrn/tensor.hpp"

namespace mrn {

inline constexpr std::uint8_t kIgnoreLabel = 255;

/// Binary occupancy indicator per voxel; bits are exactly 0 or 1.
struct VoxelMask {
  GridShape shape;
  std::vector<std::uint8_t> bits;

  VoxelMask() = default;
  explicit VoxelMask(GridShape s, std::uint8_t fill = 0) : shape(s.with_channels(1)), bits(s.voxels(), fill) {}
  static VoxelMask from_active(const ActiveSet& active);

  std::size_t count() const;
  bool binary() const;
  std::shared_ptr<const ActiveSet> active_set() const;
  bool operator==(const VoxelMask&) const = default;
};

// s = 1 - softmax(logits)[0] per voxel; one-channel result.
DenseVoxelTensor occupancy_score(const DenseVoxelTensor& logits);

// 1 where score >= threshold.
VoxelMask init_mask(const DenseVoxelTensor& score, double threshold);

// 1 where the label is neither empty (0) nor ignored.
VoxelMask mask_gt(std::span<const std::uint8_t> labels, GridShape shape);

// Inverted dropout: each entry is 0 with probability `rate`, else 1 / (1 - rate).
std::vector<double> dropout_scale(std::size_t n, double rate, std::mt19937_64& rng);

struct MaskHeadOptions {
  bool training = false;
  double dropout_rate = 0.1;
  std::mt19937_64* rng = nullptr;  // required when training
};

// conv 3^3 -> 2x average pool -> dropout -> conv 3^3 -> nearest upsample ->
// softmax over {occupied, empty}. Channel 0 of the result is the occupied
// probability. Extents of the input grid must be even.
void add_mask_head(ParameterStore& store, const std::string& prefix, int in_channels, int mid_channels,
                   std::mt19937_64& rng);
Var mask_head(Tape& tape, ParameterStore& store, const std::string& prefix, const Var& ssc_logits,
              const MaskHeadOptions& options = {});

// Adds the `k` highest `occupied` scores among unmasked voxels and removes
// the `k` highest `empty` scores among masked voxels. Fewer are taken when
// candidates run out; ties go to the lexicographically smaller coordinate.
VoxelMask apply_topk_update(const VoxelMask& prev, std::span<const double> occupied, std::span<const double> empty,
                            int k);

// Text header "MRNMASK X Y Z" then alternating run lengths, zeros first.
std::string encode_mask_rle(const VoxelMask& mask);
VoxelMask decode_mask_rle(const std::string& text);
void save_mask(const std::filesystem::path& path, const VoxelMask& mask);
VoxelMask load_mask(const std::filesystem::path& path);

}  // namespace mrn
