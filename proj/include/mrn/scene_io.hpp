#pragma once

#include <filesystem>
#include <vector>

#include "mrn/scene.hpp"

// One directory per scene:
//   camera.txt        K, [R|t], W H
//   features.f32      "MRNRASTER W H C\n" + little-endian float32 [py][px][c]
//   depth.f32         same header, C = 1, 0 where invalid
//   depth_noisy.f32   same
//   labels.u8         "MRNLABELS X Y Z\n" + one byte per voxel [x][y][z], 255 = ignore
//   meta.txt          origin, voxel size, depth rms
namespace mrn {

void save_scene(const std::filesystem::path& dir, const SceneSample& scene);
SceneSample load_scene(const std::filesystem::path& dir);

// Sub-directories of `root` holding a scene, in name order.
std::vector<std::filesystem::path> list_scenes(const std::filesystem::path& root);
std::vector<SceneSample> load_scenes(const std::filesystem::path& root);

}  // namespace mrn
