#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mrn/camera.hpp"
#include "mrn/config.hpp"
#include "mrn/mask.hpp"
#include "mrn/projection.hpp"

namespace mrn {

// Synthetic label set; 0 is empty.
enum SceneClass : std::uint8_t { kEmpty = 0, kFloor = 1, kWall = 2, kBoxA = 3, kBoxB = 4, kBoxC = 5 };

// Feature image channels written by the renderer.
inline constexpr int kColorChannels = 3;     // 0..2: class colour
inline constexpr int kNormalChannel = 3;     // 3..5: one-hot of the face axis hit
inline constexpr int kPresenceChannel = 6;   // 1 where the ray hit something
inline constexpr int kRangeChannel = 7;      // inverse range, 1 / (1 + d)

/// One observation with its ground truth.
struct SceneSample {
  FeatureImage features;
  DepthMap depth;        // true range along each pixel ray
  DepthMap noisy_depth;  // depth + N(0, rms), the model's input
  CameraModel camera;
  VoxelGridGeometry geometry;
  std::vector<std::uint8_t> labels;  // [x][y][z], 255 = ignore

  GridShape grid() const { return geometry.shape.with_channels(1); }
};

struct SurfaceHit {
  Coord voxel;
  double range = 0.0;
  int axis = 0;  // axis of the face the ray entered through
};

// First voxel along the ray whose label is neither empty nor ignore.
// `labels` here are the unmasked occupancy labels.
std::optional<SurfaceHit> first_surface(const VoxelGridGeometry& geom, std::span<const std::uint8_t> labels,
                                        const Ray& ray);

// Random floor, optional back wall and `config.boxes` boxes; rendered depth
// and features; voxels outside the view frustum marked ignore.
SceneSample generate_scene(std::uint64_t seed, const ExperimentConfig& config);

// Geometry shared by every generated scene of a config.
VoxelGridGeometry scene_geometry(const ExperimentConfig& config);

// Independent per-purpose seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);
inline constexpr std::uint64_t kTrainStream = 1;
inline constexpr std::uint64_t kEvalStream = 2;
inline constexpr std::uint64_t kShuffleStream = 3;
inline constexpr std::uint64_t kDropoutStream = 4;
inline constexpr std::uint64_t kInitStream = 5;

std::vector<SceneSample> generate_scenes(std::uint64_t base_seed, std::uint64_t stream, int count,
                                         const ExperimentConfig& config);

}  // namespace mrn
