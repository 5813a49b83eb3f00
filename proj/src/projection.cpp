#include "mrn/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mrn/blocks.hpp"
#include "mrn/error.hpp"

namespace mrn {
namespace {

constexpr double kMinSegment = 1e-12;

void check_sizes(const FeatureImage& img, const CameraModel& cam) {
  require(img.width == cam.width && img.height == cam.height, "feature image size does not match camera");
  require(img.values.size() == std::size_t(img.width) * img.height * img.channels, "feature image storage mismatch");
}

// Parametric interval of the ray inside the grid box, clipped to t >= 0.
bool clip_to_box(const VoxelGridGeometry& geom, const Ray& ray, double& t0, double& t1) {
  const Eigen::Vector3d lo = geom.origin, hi = geom.extent_max();
  t0 = 0.0;
  t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (ray.dir[a] == 0.0) {
      if (ray.origin[a] < lo[a] || ray.origin[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - ray.origin[a]) / ray.dir[a];
    double tb = (hi[a] - ray.origin[a]) / ray.dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t1 - t0 > kMinSegment;
}

}  // namespace

std::vector<RayHit> traverse_ray(const VoxelGridGeometry& geom, const Ray& ray) {
  std::vector<RayHit> hits;
  double t_enter, t_exit;
  if (!clip_to_box(geom, ray, t_enter, t_exit)) return hits;

  const GridShape& s = geom.shape;
  const int n[3] = {s.x, s.y, s.z};
  const double vs = geom.voxel_size;
  // Start voxel from the midpoint of the first tiny step inside the box so
  // that entry exactly on a face resolves to the inner voxel.
  const double t_probe = t_enter + std::min(1e-9, 0.5 * (t_exit - t_enter));
  const Eigen::Vector3d p = ray.origin + t_probe * ray.dir;
  int cell[3], step[3];
  double t_max[3], t_delta[3];
  for (int a = 0; a < 3; ++a) {
    cell[a] = std::clamp(int(std::floor((p[a] - geom.origin[a]) / vs)), 0, n[a] - 1);
    if (ray.dir[a] > 0.0) {
      step[a] = 1;
      t_max[a] = (geom.origin[a] + (cell[a] + 1) * vs - ray.origin[a]) / ray.dir[a];
      t_delta[a] = vs / ray.dir[a];
    } else if (ray.dir[a] < 0.0) {
      step[a] = -1;
      t_max[a] = (geom.origin[a] + cell[a] * vs - ray.origin[a]) / ray.dir[a];
      t_delta[a] = -vs / ray.dir[a];
    } else {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }

  double t = t_enter;
  while (true) {
    const int axis = t_max[0] <= t_max[1] ? (t_max[0] <= t_max[2] ? 0 : 2) : (t_max[1] <= t_max[2] ? 1 : 2);
    const double t_next = std::min(t_max[axis], t_exit);
    if (t_next - t > kMinSegment) hits.push_back({{cell[0], cell[1], cell[2]}, t, t_next});
    if (t_max[axis] >= t_exit) break;
    t = std::max(t, t_next);
    cell[axis] += step[axis];
    if (cell[axis] < 0 || cell[axis] >= n[axis]) break;
    t_max[axis] += t_delta[axis];
  }
  return hits;
}

SparseVoxelTensor surface_project(const FeatureImage& img, const DepthMap& depth, const CameraModel& cam,
                                  const VoxelGridGeometry& geom) {
  check_sizes(img, cam);
  require(depth.width == img.width && depth.height == img.height, "depth map size does not match feature image");
  const int c = img.channels;
  const GridShape& s = geom.shape;
  // Accumulate in pixel order so averaging is deterministic.
  std::vector<double> sum(s.voxels() * c, 0.0);
  std::vector<int> count(s.voxels(), 0);
  for (int py = 0; py < img.height; ++py)
    for (int px = 0; px < img.width; ++px) {
      const std::size_t k = depth.index(px, py);
      if (!depth.valid[k] || !(depth.depth[k] > 0.0)) continue;
      const Ray ray = pixel_ray(cam, px, py);
      const auto voxel = geom.voxel_of(ray.origin + depth.depth[k] * ray.dir);
      if (!voxel) continue;
      const auto v = std::size_t(linear_index(s, *voxel));
      const double* f = img.pixel(px, py);
      for (int ch = 0; ch < c; ++ch) sum[v * c + ch] += f[ch];
      ++count[v];
    }
  std::vector<Coord> coords;
  std::vector<double> features;
  for (std::size_t v = 0; v < s.voxels(); ++v) {
    if (count[v] == 0) continue;
    coords.push_back(coord_of(s, std::int64_t(v)));
    for (int ch = 0; ch < c; ++ch) features.push_back(sum[v * c + ch] / count[v]);
  }
  return SparseVoxelTensor(ActiveSet::from_coords(s, std::move(coords)), c, std::move(features));
}

namespace {

// Ray hits for every pixel, traversed in parallel and returned in pixel order.
std::vector<std::vector<RayHit>> all_pixel_hits(const CameraModel& cam, const VoxelGridGeometry& geom) {
  const int n = cam.width * cam.height;
  std::vector<std::vector<RayHit>> hits(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (int k = 0; k < n; ++k) hits[k] = traverse_ray(geom, pixel_ray(cam, k % cam.width, k / cam.width));
  return hits;
}

}  // namespace

DenseVoxelTensor sight_project(const FeatureImage& img, const CameraModel& cam, const VoxelGridGeometry& geom) {
  check_sizes(img, cam);
  const int c = img.channels;
  const GridShape s = geom.shape.with_channels(c);
  const auto hits = all_pixel_hits(cam, geom);
  DenseVoxelTensor out(s);
  std::vector<int> count(s.voxels(), 0);
  auto values = out.values();
  for (int k = 0; k < cam.width * cam.height; ++k) {
    const double* f = img.pixel(k % cam.width, k / cam.width);
    for (const RayHit& h : hits[k]) {
      const auto v = std::size_t(linear_index(s, h.voxel));
      for (int ch = 0; ch < c; ++ch) values[v * c + ch] += f[ch];
      ++count[v];
    }
  }
  for (std::size_t v = 0; v < s.voxels(); ++v)
    if (count[v] > 1)
      for (int ch = 0; ch < c; ++ch) values[v * c + ch] /= count[v];
  return out;
}

double distance_attention_weight(double d, double d_prime, double delta, double equal_tolerance) {
  if (std::abs(d - d_prime) <= equal_tolerance) return 1.0;
  if (d > d_prime) return 1.0 / (d - d_prime + 1.0);
  if (d > delta) return 0.5;
  return 0.0;
}

DenseVoxelTensor distance_attention_project(const FeatureImage& img, const DepthMap& depth, const CameraModel& cam,
                                            const VoxelGridGeometry& geom) {
  check_sizes(img, cam);
  require(depth.width == img.width && depth.height == img.height, "depth map size does not match feature image");
  const int c = img.channels;
  const GridShape s = geom.shape.with_channels(c);
  const auto hits = all_pixel_hits(cam, geom);
  const double tolerance = 0.5 * geom.voxel_size;
  DenseVoxelTensor out(s);
  std::vector<int> count(s.voxels(), 0);
  auto values = out.values();
  for (int k = 0; k < cam.width * cam.height; ++k) {
    const int px = k % cam.width, py = k / cam.width;
    const std::size_t di = depth.index(px, py);
    if (!depth.valid[di] || !(depth.depth[di] > 0.0)) continue;
    const double d_prime = depth.depth[di];
    const double delta = near_threshold(d_prime, depth.rms);
    const double* f = img.pixel(px, py);
    for (const RayHit& h : hits[k]) {
      const double d = std::clamp(d_prime, h.t_in, h.t_out);
      const double w = distance_attention_weight(d, d_prime, delta, tolerance);
      if (w <= 0.0) continue;
      const auto v = std::size_t(linear_index(s, h.voxel));
      for (int ch = 0; ch < c; ++ch) values[v * c + ch] += w * f[ch];
      ++count[v];
    }
  }
  for (std::size_t v = 0; v < s.voxels(); ++v)
    if (count[v] > 1)
      for (int ch = 0; ch < c; ++ch) values[v * c + ch] /= count[v];
  return out;
}

Var dap_context(Tape& tape, ParameterStore& store, const std::string& prefix, const Var& projected) {
  return aic_block(tape, store, prefix, projected);
}

}  // namespace mrn
