#include "mrn/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "mrn/error.hpp"

namespace mrn {
namespace {

constexpr std::array<std::array<double, 3>, 6> kClassColor = {{
    {0.0, 0.0, 0.0},
    {0.6, 0.5, 0.3},
    {0.8, 0.8, 0.8},
    {0.9, 0.1, 0.1},
    {0.1, 0.8, 0.1},
    {0.1, 0.2, 0.9},
}};

double to_float(double v) { return double(float(v)); }

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int entry_axis(const VoxelGridGeometry& geom, const Coord& voxel, const Eigen::Vector3d& p) {
  const Eigen::Vector3d lo = geom.voxel_min(voxel);
  int best = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double gap = std::min(std::abs(p[a] - lo[a]), std::abs(p[a] - lo[a] - geom.voxel_size));
    if (gap < best_gap) best_gap = gap, best = a;
  }
  return best;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  return splitmix(splitmix(splitmix(base) ^ stream) + index);
}

VoxelGridGeometry scene_geometry(const ExperimentConfig& config) {
  VoxelGridGeometry g;
  g.shape = config.grid.with_channels(1);
  g.voxel_size = config.voxel_size;
  g.origin = Eigen::Vector3d(-0.5 * g.shape.x * g.voxel_size, -0.5 * g.shape.y * g.voxel_size, 0.0);
  return g;
}

std::optional<SurfaceHit> first_surface(const VoxelGridGeometry& geom, std::span<const std::uint8_t> labels,
                                        const Ray& ray) {
  for (const RayHit& h : traverse_ray(geom, ray)) {
    const std::uint8_t l = labels[std::size_t(linear_index(geom.shape, h.voxel))];
    if (l == kEmpty || l == kIgnoreLabel) continue;
    return SurfaceHit{h.voxel, h.t_in, entry_axis(geom, h.voxel, ray.origin + h.t_in * ray.dir)};
  }
  return std::nullopt;
}

SceneSample generate_scene(std::uint64_t seed, const ExperimentConfig& config) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  SceneSample s;
  s.geometry = scene_geometry(config);
  const GridShape g = s.grid();
  const double vs = s.geometry.voxel_size;

  // Camera in front of the grid, above its top face, looking down into it.
  const double depth_extent = g.z * vs, height = g.y * vs;
  const Eigen::Vector3d eye(0.1 * depth_extent * jitter(rng), -0.5 * height - 0.25 * depth_extent + 0.05 * jitter(rng),
                            -0.3 * depth_extent + 0.05 * jitter(rng));
  const Eigen::Vector3d target(0.05 * depth_extent * jitter(rng), 0.4 * height, 0.55 * depth_extent);
  s.camera = look_at(eye, target, Eigen::Vector3d(0, -1, 0), config.image_width, config.image_height,
                     config.hfov_degrees * std::numbers::pi / 180.0);

  auto& labels = s.labels;
  labels.assign(g.voxels(), kEmpty);
  auto set = [&](int x, int y, int z, std::uint8_t c) { labels[std::size_t(linear_index(g, {x, y, z}))] = c; };
  for (int x = 0; x < g.x; ++x)
    for (int z = 0; z < g.z; ++z) set(x, g.y - 1, z, kFloor);
  if (config.wall)
    for (int x = 0; x < g.x; ++x)
      for (int y = 0; y < g.y - 1; ++y) set(x, y, g.z - 1, kWall);
  for (int b = 0; b < config.boxes; ++b) {
    auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    const int sx = uniform_int(std::max(1, g.x / 10), std::max(1, g.x / 4));
    const int sy = uniform_int(std::max(1, g.y / 8), std::max(1, g.y / 2));
    const int sz = uniform_int(std::max(1, g.z / 10), std::max(1, g.z / 4));
    const int x0 = uniform_int(0, g.x - sx);
    const int z0 = uniform_int(0, std::max(0, g.z - 1 - sz));
    const auto cls = std::uint8_t(uniform_int(kBoxA, kBoxC));
    for (int x = x0; x < x0 + sx; ++x)
      for (int y = g.y - 1 - sy; y < g.y - 1; ++y)
        for (int z = z0; z < std::min(z0 + sz, g.z); ++z) set(x, y, z, cls);
  }

  const int W = config.image_width, H = config.image_height, C = config.image_channels;
  s.features = FeatureImage(W, H, C);
  s.depth = DepthMap(W, H);
  s.depth.rms = config.depth_rms;
  std::normal_distribution<double> feature_noise(0.0, 1.0);
  for (int py = 0; py < H; ++py)
    for (int px = 0; px < W; ++px) {
      double* f = s.features.pixel(px, py);
      const auto hit = first_surface(s.geometry, labels, pixel_ray(s.camera, px, py));
      if (hit) {
        const std::size_t k = s.depth.index(px, py);
        s.depth.depth[k] = to_float(hit->range);
        s.depth.valid[k] = 1;
        const auto& color = kClassColor[labels[std::size_t(linear_index(g, hit->voxel))]];
        for (int c = 0; c < kColorChannels; ++c) f[c] = color[std::size_t(c)];
        f[kNormalChannel + hit->axis] = 1.0;
        f[kPresenceChannel] = 1.0;
        f[kRangeChannel] = 1.0 / (1.0 + hit->range);
      }
      for (int c = 0; c < kColorChannels; ++c) f[c] += config.feature_noise * feature_noise(rng);
      for (int c = kRangeChannel + 1; c < C; ++c) f[c] = config.feature_noise * feature_noise(rng);
      for (int c = 0; c < C; ++c) f[c] = to_float(f[c]);
    }

  s.noisy_depth = s.depth;
  std::normal_distribution<double> depth_noise(0.0, config.depth_rms > 0.0 ? config.depth_rms : 1.0);
  for (std::size_t k = 0; k < s.noisy_depth.depth.size(); ++k) {
    const double e = config.depth_rms > 0.0 ? depth_noise(rng) : 0.0;
    if (s.noisy_depth.valid[k]) s.noisy_depth.depth[k] = to_float(std::max(1e-3, s.depth.depth[k] + e));
  }

  for (std::size_t v = 0; v < g.voxels(); ++v) {
    const Eigen::Vector3d c = s.geometry.voxel_center(coord_of(g, std::int64_t(v)));
    const Eigen::Vector3d cam = s.camera.R * c + s.camera.t;
    bool visible = cam.z() > 0.0;
    if (visible) {
      const PixelProjection p = project_point(s.camera, c);
      visible = p.u >= 0.0 && p.u < W && p.v >= 0.0 && p.v < H;
    }
    if (!visible) labels[v] = kIgnoreLabel;
  }
  return s;
}

std::vector<SceneSample> generate_scenes(std::uint64_t base_seed, std::uint64_t stream, int count,
                                         const ExperimentConfig& config) {
  require(count >= 0, "scene count must be non-negative");
  std::vector<SceneSample> out(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) out[std::size_t(i)] = generate_scene(derive_seed(base_seed, stream, std::uint64_t(i)), config);
  return out;
}

}  // namespace mrn
