#include "mrn/camera.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include <Eigen/Dense>

#include "mrn/error.hpp"

namespace mrn {

bool CameraModel::valid() const {
  if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0 || K(2, 2) != 1.0) return false;
  if (!(K(0, 0) > 0.0) || !(K(1, 1) > 0.0)) return false;
  if (width < 1 || height < 1) return false;
  return (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-9;
}

PixelProjection project_point(const CameraModel& cam, const Eigen::Vector3d& p) {
  const Eigen::Vector3d h = cam.K * (cam.R * p + cam.t);
  if (!(h.z() > 0.0)) throw BehindCameraError("point projects behind the camera");
  return {h.x() / h.z(), h.y() / h.z(), h.z()};
}

Eigen::Vector3d unproject(const CameraModel& cam, double u, double v, double depth) {
  const Eigen::Vector3d pc = depth * cam.K.triangularView<Eigen::Upper>().solve(Eigen::Vector3d(u, v, 1.0));
  return cam.R.transpose() * (pc - cam.t);
}

Ray pixel_ray(const CameraModel& cam, int px, int py) {
  const Eigen::Vector3d dc =
      cam.K.triangularView<Eigen::Upper>().solve(Eigen::Vector3d(px + 0.5, py + 0.5, 1.0));
  return {cam.center(), (cam.R.transpose() * dc).normalized()};
}

CameraModel look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up,
                    int width, int height, double hfov_radians) {
  // Camera frame: x right, y down, z forward.
  const Eigen::Vector3d z = (target - eye).normalized();
  const Eigen::Vector3d x = z.cross(up).normalized();
  const Eigen::Vector3d y = z.cross(x);
  CameraModel cam;
  cam.R.row(0) = x.transpose();
  cam.R.row(1) = y.transpose();
  cam.R.row(2) = z.transpose();
  cam.t = -cam.R * eye;
  const double f = 0.5 * width / std::tan(0.5 * hfov_radians);
  cam.K << f, 0.0, 0.5 * width, 0.0, f, 0.5 * height, 0.0, 0.0, 1.0;
  cam.width = width;
  cam.height = height;
  return cam;
}

void save_camera(const std::filesystem::path& path, const CameraModel& cam) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write camera file: " + path.string());
  out << std::setprecision(17);
  for (int r = 0; r < 3; ++r) out << cam.K(r, 0) << ' ' << cam.K(r, 1) << ' ' << cam.K(r, 2) << '\n';
  for (int r = 0; r < 3; ++r)
    out << cam.R(r, 0) << ' ' << cam.R(r, 1) << ' ' << cam.R(r, 2) << ' ' << cam.t(r) << '\n';
  out << cam.width << ' ' << cam.height << '\n';
}

CameraModel load_camera(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read camera file: " + path.string());
  CameraModel cam;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) in >> cam.K(r, c);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) in >> cam.R(r, c);
    in >> cam.t(r);
  }
  in >> cam.width >> cam.height;
  if (!in) throw FormatError("malformed camera file: " + path.string());
  if (!cam.valid()) throw FormatError("camera file describes an invalid camera: " + path.string());
  return cam;
}

std::optional<Coord> VoxelGridGeometry::voxel_of(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d q = (p - origin) / voxel_size;
  const Coord c{int(std::floor(q.x())), int(std::floor(q.y())), int(std::floor(q.z()))};
  if (!in_bounds(shape, c)) return std::nullopt;
  return c;
}

Eigen::Vector3d VoxelGridGeometry::voxel_center(const Coord& c) const {
  return origin + voxel_size * Eigen::Vector3d(c.x + 0.5, c.y + 0.5, c.z + 0.5);
}

Eigen::Vector3d VoxelGridGeometry::voxel_min(const Coord& c) const {
  return origin + voxel_size * Eigen::Vector3d(c.x, c.y, c.z);
}

Eigen::Vector3d VoxelGridGeometry::extent_max() const {
  return origin + voxel_size * Eigen::Vector3d(shape.x, shape.y, shape.z);
}

}  // namespace mrn
