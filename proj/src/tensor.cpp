#include "mrn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "mrn/error.hpp"

namespace mrn {

DenseVoxelTensor::DenseVoxelTensor(GridShape shape) : shape_(shape), values_(shape.size(), 0.0) {
  require(shape.valid(), "grid extents must be >= 1");
}

DenseVoxelTensor::DenseVoxelTensor(GridShape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  require(shape.valid(), "grid extents must be >= 1");
  require(values_.size() == shape.size(), "dense tensor value count does not match its shape");
}

bool DenseVoxelTensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::shared_ptr<const ActiveSet> ActiveSet::from_coords(GridShape shape, std::vector<Coord> coords) {
  shape.channels = 1;
  require(shape.valid(), "grid extents must be >= 1");
  for (const Coord& c : coords) require(in_bounds(shape, c), "active coordinate outside the grid");
  std::sort(coords.begin(), coords.end());
  coords.erase(std::unique(coords.begin(), coords.end()), coords.end());

  auto set = std::make_shared<ActiveSet>();
  set->shape_ = shape;
  set->coords_ = std::move(coords);
  set->linear_.reserve(set->coords_.size());
  set->index_.reserve(set->coords_.size() * 2);
  for (std::size_t i = 0; i < set->coords_.size(); ++i) {
    const std::int64_t key = linear_index(shape, set->coords_[i]);
    set->linear_.push_back(key);
    set->index_.emplace(key, std::int32_t(i));
  }
  return set;
}

std::shared_ptr<const ActiveSet> ActiveSet::full(GridShape shape) {
  std::vector<Coord> coords;
  coords.reserve(shape.voxels());
  for (int x = 0; x < shape.x; ++x)
    for (int y = 0; y < shape.y; ++y)
      for (int z = 0; z < shape.z; ++z) coords.push_back({x, y, z});
  return from_coords(shape, std::move(coords));
}

std::shared_ptr<const ActiveSet> ActiveSet::empty(GridShape shape) { return from_coords(shape, {}); }

std::int32_t ActiveSet::find(const Coord& c) const {
  if (!in_bounds(shape_, c)) return -1;
  auto it = index_.find(linear_index(shape_, c));
  return it == index_.end() ? -1 : it->second;
}

SparseVoxelTensor::SparseVoxelTensor(std::shared_ptr<const ActiveSet> active, int channels)
    : active_(std::move(active)), channels_(channels), features_(active_->size() * channels, 0.0) {
  require(channels >= 1, "sparse tensor needs at least one channel");
}

SparseVoxelTensor::SparseVoxelTensor(std::shared_ptr<const ActiveSet> active, int channels,
                                     std::vector<double> features)
    : active_(std::move(active)), channels_(channels), features_(std::move(features)) {
  require(channels >= 1, "sparse tensor needs at least one channel");
  require(features_.size() == active_->size() * std::size_t(channels),
          "feature count does not match active set size");
}

SparseVoxelTensor sparsify(const DenseVoxelTensor& dense, double epsilon) {
  require(epsilon >= 0.0, "sparsify epsilon must be non-negative");
  const GridShape& s = dense.shape();
  std::vector<Coord> coords;
  std::vector<double> features;
  for (std::size_t v = 0; v < s.voxels(); ++v) {
    auto row = dense.voxel(std::int64_t(v));
    if (std::any_of(row.begin(), row.end(), [&](double a) { return std::abs(a) > epsilon; })) {
      coords.push_back(coord_of(s, std::int64_t(v)));
      features.insert(features.end(), row.begin(), row.end());
    }
  }
  // Dense traversal is already lexicographic, so row order survives sorting.
  return SparseVoxelTensor(ActiveSet::from_coords(s, std::move(coords)), s.channels, std::move(features));
}

SparseVoxelTensor gather(const DenseVoxelTensor& dense, std::shared_ptr<const ActiveSet> active) {
  require(dense.shape().same_spatial(active->shape()), "gather: spatial shapes differ");
  const int c = dense.shape().channels;
  std::vector<double> features(active->size() * c);
  for (std::size_t i = 0; i < active->size(); ++i) {
    auto row = dense.voxel(active->linear(i));
    std::copy(row.begin(), row.end(), features.begin() + std::ptrdiff_t(i * c));
  }
  return SparseVoxelTensor(std::move(active), c, std::move(features));
}

DenseVoxelTensor densify(const SparseVoxelTensor& sparse) {
  DenseVoxelTensor out(sparse.shape());
  const int c = sparse.channels();
  auto values = out.values();
  for (std::size_t i = 0; i < sparse.size(); ++i) {
    auto row = sparse.row(i);
    std::copy(row.begin(), row.end(), values.begin() + std::ptrdiff_t(sparse.active().linear(i) * c));
  }
  return out;
}

}  // namespace mrn
