#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "mrn/tensor.hpp"

namespace mrn {

/// Centered kernel extent. Tap `a` enumerates offsets (dx, dy, dz) with
/// dx in [-x/2, x/2] etc. in lexicographic order.
struct Extent {
  int x = 3;
  int y = 3;
  int z = 3;

  int taps() const { return x * y * z; }
  bool odd() const { return x % 2 == 1 && y % 2 == 1 && z % 2 == 1 && x > 0 && y > 0 && z > 0; }
  Coord offset(int tap) const {
    const int dz = tap % z;
    const int dy = (tap / z) % y;
    const int dx = tap / (y * z);
    return {dx - x / 2, dy - y / 2, dz - z / 2};
  }
  bool operator==(const Extent&) const = default;
};

/// Input/output row correspondence for one convolution, stored both ways:
/// `gather[j * taps + a]` is the input row read by output row j through tap
/// a, and `scatter[i * taps + a]` is the output row fed by input row i
/// through tap a (-1 when absent).
struct KernelMap {
  int taps = 0;
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  std::vector<std::int32_t> gather;
  std::vector<std::int32_t> scatter;

  // (input row, output row) pairs for tap `a`, ordered by output row.
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs(int tap) const;
  std::uint64_t pair_count() const;
};

// Output row j reads input row gather[j][a]; fills `scatter` from `gather`.
KernelMap finish_kernel_map(int taps, std::size_t n_in, std::size_t n_out, std::vector<std::int32_t> gather);

// Output active set == input active set; only active neighbours contribute.
KernelMap submanifold_map(const ActiveSet& active, Extent extent);

struct SparseConvPlan {
  std::shared_ptr<const ActiveSet> output;
  KernelMap map;
};

// Output active set = union of the kernel neighbourhoods of every input
// site, clipped to the grid.
SparseConvPlan sparse_conv_plan(const ActiveSet& input, Extent extent);

// Every voxel of the grid, zero padding at the borders.
KernelMap dense_map(const GridShape& shape, Extent extent);

// Transposed convolution with stride 2: input voxel i feeds output voxels
// 2i - e/2 + a along each axis, clipped to the doubled grid.
KernelMap deconv_up2_map(const GridShape& input, Extent extent);

}  // namespace mrn
