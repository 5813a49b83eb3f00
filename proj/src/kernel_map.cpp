#include "mrn/kernel_map.hpp"

#include <algorithm>
#include <unordered_set>

#include "mrn/error.hpp"

namespace mrn {

std::vector<std::pair<std::int32_t, std::int32_t>> KernelMap::pairs(int tap) const {
  std::vector<std::pair<std::int32_t, std::int32_t>> out;
  for (std::size_t j = 0; j < n_out; ++j) {
    const std::int32_t i = gather[j * taps + tap];
    if (i >= 0) out.emplace_back(i, std::int32_t(j));
  }
  return out;
}

std::uint64_t KernelMap::pair_count() const {
  return std::uint64_t(std::count_if(gather.begin(), gather.end(), [](std::int32_t i) { return i >= 0; }));
}

KernelMap finish_kernel_map(int taps, std::size_t n_in, std::size_t n_out, std::vector<std::int32_t> gather) {
  KernelMap m;
  m.taps = taps;
  m.n_in = n_in;
  m.n_out = n_out;
  m.gather = std::move(gather);
  m.scatter.assign(n_in * taps, -1);
  for (std::size_t j = 0; j < n_out; ++j) {
    for (int a = 0; a < taps; ++a) {
      const std::int32_t i = m.gather[j * taps + a];
      if (i < 0) continue;
      // Each (input, tap) reaches at most one output for stride-1 and
      // stride-2 transposed maps alike.
      m.scatter[std::size_t(i) * taps + a] = std::int32_t(j);
    }
  }
  return m;
}

KernelMap submanifold_map(const ActiveSet& active, Extent extent) {
  require(extent.odd(), "kernel extents must be odd");
  const int taps = extent.taps();
  std::vector<std::int32_t> gather(active.size() * taps, -1);
  for (std::size_t j = 0; j < active.size(); ++j) {
    const Coord c = active.coord(j);
    for (int a = 0; a < taps; ++a) {
      const Coord d = extent.offset(a);
      gather[j * taps + a] = active.find({c.x + d.x, c.y + d.y, c.z + d.z});
    }
  }
  return finish_kernel_map(taps, active.size(), active.size(), std::move(gather));
}

SparseConvPlan sparse_conv_plan(const ActiveSet& input, Extent extent) {
  require(extent.odd(), "kernel extents must be odd");
  const GridShape& s = input.shape();
  const int taps = extent.taps();
  std::unordered_set<std::int64_t> seen;
  std::vector<Coord> out_coords;
  for (const Coord& c : input.coords()) {
    for (int a = 0; a < taps; ++a) {
      const Coord d = extent.offset(a);
      const Coord o{c.x - d.x, c.y - d.y, c.z - d.z};
      if (!in_bounds(s, o)) continue;
      if (seen.insert(linear_index(s, o)).second) out_coords.push_back(o);
    }
  }
  SparseConvPlan plan;
  plan.output = ActiveSet::from_coords(s, std::move(out_coords));
  const ActiveSet& out = *plan.output;
  std::vector<std::int32_t> gather(out.size() * taps, -1);
  for (std::size_t j = 0; j < out.size(); ++j) {
    const Coord c = out.coord(j);
    for (int a = 0; a < taps; ++a) {
      const Coord d = extent.offset(a);
      gather[j * taps + a] = input.find({c.x + d.x, c.y + d.y, c.z + d.z});
    }
  }
  plan.map = finish_kernel_map(taps, input.size(), out.size(), std::move(gather));
  return plan;
}

KernelMap dense_map(const GridShape& s, Extent extent) {
  require(extent.odd(), "kernel extents must be odd");
  const int taps = extent.taps();
  std::vector<std::int32_t> gather(s.voxels() * taps, -1);
  std::size_t j = 0;
  for (int x = 0; x < s.x; ++x)
    for (int y = 0; y < s.y; ++y)
      for (int z = 0; z < s.z; ++z, ++j)
        for (int a = 0; a < taps; ++a) {
          const Coord d = extent.offset(a);
          const Coord n{x + d.x, y + d.y, z + d.z};
          if (in_bounds(s, n)) gather[j * taps + a] = std::int32_t(linear_index(s, n));
        }
  return finish_kernel_map(taps, s.voxels(), s.voxels(), std::move(gather));
}

KernelMap deconv_up2_map(const GridShape& in, Extent extent) {
  require(extent.odd(), "kernel extents must be odd");
  const GridShape out{in.x * 2, in.y * 2, in.z * 2, 1};
  const int taps = extent.taps();
  // Along one axis with extent e: output o reads input i = (o + e/2 - k) / 2
  // through kernel index k when that division is exact.
  auto source = [](int o, int k, int e, int n) {
    const int num = o + e / 2 - k;
    if (num < 0 || num % 2 != 0) return -1;
    const int i = num / 2;
    return i < n ? i : -1;
  };
  std::vector<std::int32_t> gather(out.voxels() * taps, -1);
  std::size_t j = 0;
  for (int x = 0; x < out.x; ++x)
    for (int y = 0; y < out.y; ++y)
      for (int z = 0; z < out.z; ++z, ++j)
        for (int a = 0; a < taps; ++a) {
          const int kz = a % extent.z;
          const int ky = (a / extent.z) % extent.y;
          const int kx = a / (extent.y * extent.z);
          const int ix = source(x, kx, extent.x, in.x);
          const int iy = source(y, ky, extent.y, in.y);
          const int iz = source(z, kz, extent.z, in.z);
          if (ix < 0 || iy < 0 || iz < 0) continue;
          gather[j * taps + a] = std::int32_t(linear_index(in, {ix, iy, iz}));
        }
  return finish_kernel_map(taps, in.voxels(), out.voxels(), std::move(gather));
}

}  // namespace mrn
