#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

namespace mrn {

struct GridShape {
  int x = 1;
  int y = 1;
  int z = 1;
  int channels = 1;

  std::size_t voxels() const { return std::size_t(x) * y * z; }
  std::size_t size() const { return voxels() * channels; }
  bool valid() const { return x >= 1 && y >= 1 && z >= 1 && channels >= 1; }
  bool same_spatial(const GridShape& o) const { return x == o.x && y == o.y && z == o.z; }
  GridShape with_channels(int c) const { return {x, y, z, c}; }

  bool operator==(const GridShape&) const = default;
};

struct Coord {
  int x = 0;
  int y = 0;
  int z = 0;

  auto operator<=>(const Coord&) const = default;
};

inline bool in_bounds(const GridShape& s, const Coord& c) {
  return c.x >= 0 && c.y >= 0 && c.z >= 0 && c.x < s.x && c.y < s.y && c.z < s.z;
}

// Linear voxel index; x-major so the ordering matches lexicographic (x, y, z).
inline std::int64_t linear_index(const GridShape& s, const Coord& c) {
  return (std::int64_t(c.x) * s.y + c.y) * s.z + c.z;
}

inline Coord coord_of(const GridShape& s, std::int64_t index) {
  const int z = int(index % s.z);
  index /= s.z;
  const int y = int(index % s.y);
  return {int(index / s.y), y, z};
}

/// Dense voxel grid with values laid out as [x][y][z][channel].
class DenseVoxelTensor {
 public:
  DenseVoxelTensor() = default;
  explicit DenseVoxelTensor(GridShape shape);
  DenseVoxelTensor(GridShape shape, std::vector<double> values);

  const GridShape& shape() const { return shape_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::vector<double>& storage() { return values_; }

  double& at(int x, int y, int z, int c) {
    return values_[std::size_t(linear_index(shape_, {x, y, z})) * shape_.channels + c];
  }
  double at(int x, int y, int z, int c) const {
    return values_[std::size_t(linear_index(shape_, {x, y, z})) * shape_.channels + c];
  }
  std::span<const double> voxel(std::int64_t index) const {
    return std::span<const double>(values_).subspan(std::size_t(index) * shape_.channels,
                                                    shape_.channels);
  }

  bool all_finite() const;

 private:
  GridShape shape_;
  std::vector<double> values_;
};

/// Sorted, duplicate-free set of active voxel coordinates with O(1) lookup.
/// Coordinates are kept in lexicographic (x, y, z) order so every traversal,
/// and therefore every floating-point reduction, happens in a fixed order.
class ActiveSet {
 public:
  // `shape.channels` is ignored; only the spatial extent matters.
  static std::shared_ptr<const ActiveSet> from_coords(GridShape shape, std::vector<Coord> coords);
  static std::shared_ptr<const ActiveSet> full(GridShape shape);
  static std::shared_ptr<const ActiveSet> empty(GridShape shape);

  const GridShape& shape() const { return shape_; }
  std::size_t size() const { return coords_.size(); }
  bool empty() const { return coords_.empty(); }
  const std::vector<Coord>& coords() const { return coords_; }
  const Coord& coord(std::size_t i) const { return coords_[i]; }
  std::int64_t linear(std::size_t i) const { return linear_[i]; }

  // Active index of `c`, or -1 when inactive or out of bounds.
  std::int32_t find(const Coord& c) const;
  bool contains(const Coord& c) const { return find(c) >= 0; }

  bool operator==(const ActiveSet& o) const { return shape_.same_spatial(o.shape_) && coords_ == o.coords_; }

 private:
  GridShape shape_;
  std::vector<Coord> coords_;
  std::vector<std::int64_t> linear_;
  std::unordered_map<std::int64_t, std::int32_t> index_;
};

/// Active coordinates plus one feature row per coordinate. Inactive
/// coordinates are semantically zero.
class SparseVoxelTensor {
 public:
  SparseVoxelTensor() = default;
  SparseVoxelTensor(std::shared_ptr<const ActiveSet> active, int channels);
  SparseVoxelTensor(std::shared_ptr<const ActiveSet> active, int channels, std::vector<double> features);

  GridShape shape() const { return active_->shape().with_channels(channels_); }
  int channels() const { return channels_; }
  const ActiveSet& active() const { return *active_; }
  const std::shared_ptr<const ActiveSet>& active_ptr() const { return active_; }
  std::size_t size() const { return active_->size(); }

  std::span<const double> features() const { return features_; }
  std::span<double> features() { return features_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features_).subspan(i * channels_, channels_);
  }
  std::span<double> row(std::size_t i) {
    return std::span<double>(features_).subspan(i * channels_, channels_);
  }

 private:
  std::shared_ptr<const ActiveSet> active_;
  int channels_ = 1;
  std::vector<double> features_;
};

// Active set = voxels where any channel satisfies |value| > epsilon.
SparseVoxelTensor sparsify(const DenseVoxelTensor& dense, double epsilon);

// Rows of `dense` at the coordinates of `active`, whatever their values.
SparseVoxelTensor gather(const DenseVoxelTensor& dense, std::shared_ptr<const ActiveSet> active);

DenseVoxelTensor densify(const SparseVoxelTensor& sparse);

}  // namespace mrn
