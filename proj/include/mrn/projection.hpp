#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrn/autodiff.hpp"
#include "mrn/camera.hpp"
#include "mrn/tensor.hpp"

namespace mrn {

/// Per-pixel range (metres along the pixel's ray) to the observed surface.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<std::uint8_t> valid;
  double rms = 0.0;  // expected depth error, metres

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), depth(std::size_t(w) * h, 0.0), valid(std::size_t(w) * h, 0) {}
  std::size_t index(int px, int py) const { return std::size_t(py) * width + px; }
};

/// Row-major [py][px][channel] feature raster.
struct FeatureImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> values;

  FeatureImage() = default;
  FeatureImage(int w, int h, int c) : width(w), height(h), channels(c), values(std::size_t(w) * h * c, 0.0) {}
  const double* pixel(int px, int py) const { return values.data() + (std::size_t(py) * width + px) * channels; }
  double* pixel(int px, int py) { return values.data() + (std::size_t(py) * width + px) * channels; }
};

struct RayHit {
  Coord voxel;
  double t_in = 0.0;
  double t_out = 0.0;
};

// Voxels crossed by the ray for t >= 0, in order, via a 3D DDA walk.
// Segments shorter than 1e-12 m (edge and corner grazes) are dropped.
std::vector<RayHit> traverse_ray(const VoxelGridGeometry& geom, const Ray& ray);

// Each valid pixel's feature lands in the voxel holding its back-projected
// surface point; pixels sharing a voxel are averaged.
SparseVoxelTensor surface_project(const FeatureImage& img, const DepthMap& depth, const CameraModel& cam,
                                  const VoxelGridGeometry& geom);

// Every voxel crossed by a pixel's ray receives its feature; averaged over
// the rays crossing the voxel.
DenseVoxelTensor sight_project(const FeatureImage& img, const CameraModel& cam, const VoxelGridGeometry& geom);

// Weight for a point at ray distance d when the surface is at d_prime:
//   1 / (d - d' + 1)   d > d'
//   1                  |d - d'| <= equal_tolerance
//   0.5                delta < d < d'
//   0                  d <= delta
double distance_attention_weight(double d, double d_prime, double delta, double equal_tolerance = 0.0);

// Near threshold below which the line of sight carries nothing.
inline double near_threshold(double d_prime, double rms) { return d_prime - rms > 0.0 ? d_prime - rms : 0.0; }

// Line-of-sight projection weighted per voxel-ray pair. A voxel's distance
// is the point of its ray segment closest to the surface, so the voxel
// holding the surface sees d = d'. Each voxel stores sum(w f) / (rays with
// w > 0). Pixels without valid depth contribute nothing.
DenseVoxelTensor distance_attention_project(const FeatureImage& img, const DepthMap& depth, const CameraModel& cam,
                                            const VoxelGridGeometry& geom);

// One AIC block over the projected volume; its output is the recurrent input.
Var dap_context(Tape& tape, ParameterStore& store, const std::string& prefix, const Var& projected);

}  // namespace mrn
