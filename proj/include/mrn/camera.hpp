#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "mrn/tensor.hpp"

namespace mrn {

class BehindCameraError : public std::domain_error {
 public:
  explicit BehindCameraError(const std::string& what) : std::domain_error(what) {}
};

/// Pinhole camera: pixel ~ K [R | t] p_world. Pixel (px, py) covers
/// [px, px + 1) x [py, py + 1); its ray passes through the pixel centre.
struct CameraModel {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  int width = 1;
  int height = 1;

  // K upper triangular with positive focal lengths, R orthonormal within 1e-9.
  bool valid() const;
  Eigen::Vector3d center() const { return -R.transpose() * t; }
};

struct PixelProjection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // camera-frame z
};

PixelProjection project_point(const CameraModel& cam, const Eigen::Vector3d& p);
// Inverse of project_point for a given camera-frame depth.
Eigen::Vector3d unproject(const CameraModel& cam, double u, double v, double depth);

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d dir;  // unit length
};
Ray pixel_ray(const CameraModel& cam, int px, int py);

// Camera looking from `eye` towards `target` with the given up hint
// (world frame); intrinsics from a horizontal field of view.
CameraModel look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up,
                    int width, int height, double hfov_radians);

// Plain text: 9 numbers of K, 12 numbers of [R|t] (row-major), then W H.
void save_camera(const std::filesystem::path& path, const CameraModel& cam);
CameraModel load_camera(const std::filesystem::path& path);

/// Axis-aligned voxel grid placed in the world frame.
struct VoxelGridGeometry {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  double voxel_size = 1.0;
  GridShape shape;

  std::optional<Coord> voxel_of(const Eigen::Vector3d& p) const;
  Eigen::Vector3d voxel_center(const Coord& c) const;
  Eigen::Vector3d voxel_min(const Coord& c) const;
  Eigen::Vector3d extent_max() const;
};

}  // namespace mrn
