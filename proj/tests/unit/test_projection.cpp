#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include <Eigen/Geometry>

#include "gradcheck.hpp"
#include "mrn/blocks.hpp"
#include "mrn/projection.hpp"
#include "oracles.hpp"

using namespace mrn;

namespace {

// Camera at the origin looking down +z with the principal point at the
// centre of an odd-sized image, so the middle pixel's ray is the z axis.
CameraModel axis_camera(int size, double focal) {
  CameraModel cam;
  cam.K << focal, 0, size / 2.0, 0, focal, size / 2.0, 0, 0, 1;
  cam.width = cam.height = size;
  return cam;
}

CameraModel random_camera(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Vector4d q(u(rng), u(rng), u(rng), u(rng));
  CameraModel cam;
  cam.R = Eigen::Quaterniond(q.normalized()).toRotationMatrix();
  cam.t = Eigen::Vector3d(u(rng), u(rng), u(rng)) * 3.0;
  cam.K << 100 + 400 * (u(rng) + 1), 0.3 * u(rng), 40 + 10 * u(rng), 0, 100 + 400 * (u(rng) + 1), 30 + 10 * u(rng),
      0, 0, 1;
  cam.width = 80;
  cam.height = 60;
  return cam;
}

VoxelGridGeometry grid(GridShape s, Eigen::Vector3d origin, double vs) {
  VoxelGridGeometry g;
  g.shape = s;
  g.origin = origin;
  g.voxel_size = vs;
  return g;
}

// A camera looking at a 6x5x7 grid from a random point outside it.
CameraModel camera_facing(const VoxelGridGeometry& g, std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Eigen::Vector3d centre = 0.5 * (g.origin + g.extent_max());
  Eigen::Vector3d dir(u(rng), u(rng), u(rng));
  const Eigen::Vector3d eye = centre + 1.5 * (g.extent_max() - g.origin).norm() * dir.normalized();
  const Eigen::Vector3d target = centre + 0.2 * Eigen::Vector3d(u(rng), u(rng), u(rng));
  return look_at(eye, target, Eigen::Vector3d(u(rng), u(rng), 1.0).normalized(), w, h, 0.9 + 0.3 * u(rng));
}

FeatureImage random_image(int w, int h, int c, std::mt19937_64& rng) {
  FeatureImage img(w, h, c);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (double& v : img.values) v = u(rng);
  return img;
}

}  // namespace

TEST_CASE("pinhole projection") {
  CameraModel cam;
  const auto a = project_point(cam, {0, 0, 2});
  CHECK(a.u == 0.0);
  CHECK(a.v == 0.0);
  CHECK(a.depth == 2.0);
  const auto b = project_point(cam, {2, 0, 2});
  CHECK(b.u == 1.0);
  CHECK(b.v == 0.0);
  CHECK_THROWS_AS(project_point(cam, {0, 0, -1}), BehindCameraError);
  CHECK_THROWS_AS(project_point(cam, {1, 1, 0}), BehindCameraError);

  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const CameraModel c = random_camera(rng);
    CHECK(c.valid());
    const Eigen::Vector3d pc(3 * u(rng), 3 * u(rng), 0.2 + 5 * (u(rng) + 1));
    const Eigen::Vector3d p = c.R.transpose() * (pc - c.t);
    const auto px = project_point(c, p);
    worst = std::max(worst, (unproject(c, px.u, px.v, px.depth) - p).norm());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("camera validity and files") {
  std::mt19937_64 rng(22);
  CameraModel cam = random_camera(rng);
  const auto path = std::filesystem::temp_directory_path() / "mrn_camera_test.txt";
  save_camera(path, cam);
  const CameraModel back = load_camera(path);
  CHECK((back.K - cam.K).norm() == 0.0);
  CHECK((back.R - cam.R).norm() == 0.0);
  CHECK((back.t - cam.t).norm() == 0.0);
  CHECK(back.width == cam.width);
  CHECK(back.height == cam.height);
  std::filesystem::remove(path);

  CameraModel bad = cam;
  bad.K(0, 0) = -1.0;
  CHECK_FALSE(bad.valid());
  bad = cam;
  bad.R(0, 0) += 1e-6;
  CHECK_FALSE(bad.valid());
}

TEST_CASE("ray traversal matches a per-voxel intersection test") {
  std::mt19937_64 rng(23);
  const auto g = grid({6, 5, 7, 1}, {-0.3, -0.25, 0.1}, 0.1);
  for (int trial = 0; trial < 20; ++trial) {
    const CameraModel cam = camera_facing(g, rng, 12, 9);
    for (int py = 0; py < cam.height; ++py)
      for (int px = 0; px < cam.width; ++px) {
        const Ray ray = pixel_ray(cam, px, py);
        const auto hits = traverse_ray(g, ray);
        std::set<Coord> walked;
        for (std::size_t i = 0; i < hits.size(); ++i) {
          walked.insert(hits[i].voxel);
          CHECK(hits[i].t_out > hits[i].t_in);
          if (i > 0) CHECK(std::abs(hits[i].t_in - hits[i - 1].t_out) < 1e-12);
        }
        CHECK(walked.size() == hits.size());
        CHECK(walked == oracle::voxels_on_ray(g, ray));
      }
  }
}

TEST_CASE("surface projection") {
  const CameraModel cam = axis_camera(5, 5.0);
  const auto g = grid({3, 3, 6, 1}, {-1.5, -1.5, 1.0}, 1.0);
  FeatureImage img(5, 5, 2);
  for (std::size_t i = 0; i < img.values.size(); ++i) img.values[i] = double(i);
  DepthMap depth(5, 5);

  SUBCASE("no valid pixels") { CHECK(surface_project(img, depth, cam, g).size() == 0); }
  SUBCASE("single pixel") {
    depth.depth[depth.index(2, 2)] = 3.5;
    depth.valid[depth.index(2, 2)] = 1;
    const auto s = surface_project(img, depth, cam, g);
    REQUIRE(s.size() == 1);
    CHECK(s.active().coords()[0] == Coord{1, 1, 2});
    CHECK(s.row(0)[0] == img.pixel(2, 2)[0]);
    CHECK(s.row(0)[1] == img.pixel(2, 2)[1]);
  }
  SUBCASE("pixels sharing a voxel are averaged") {
    // A wide-angle camera so neighbouring pixels land in one voxel.
    const CameraModel wide = axis_camera(5, 50.0);
    double mean[2] = {0, 0};
    for (int py = 1; py <= 2; ++py)
      for (int px = 1; px <= 2; ++px) {
        depth.depth[depth.index(px, py)] = 3.5;
        depth.valid[depth.index(px, py)] = 1;
        for (int c = 0; c < 2; ++c) mean[c] += img.pixel(px, py)[c] / 4.0;
      }
    const auto s = surface_project(img, depth, wide, g);
    REQUIRE(s.size() == 1);
    CHECK(std::abs(s.row(0)[0] - mean[0]) < 1e-12);
    CHECK(std::abs(s.row(0)[1] - mean[1]) < 1e-12);
  }
}

TEST_CASE("sight projection") {
  SUBCASE("the central ray fills its voxel column") {
    const CameraModel cam = axis_camera(5, 50.0);  // narrow: other rays stay in the central column too
    const auto g = grid({3, 3, 6, 1}, {-1.5, -1.5, 1.0}, 1.0);
    FeatureImage img(5, 5, 1);
    img.pixel(2, 2)[0] = 1.0;
    const auto d = sight_project(img, cam, g);
    for (int z = 0; z < 6; ++z) CHECK(d.at(1, 1, z, 0) > 0.0);
    CHECK(d.at(0, 1, 3, 0) == 0.0);
  }
  SUBCASE("rays that miss the grid contribute nothing") {
    CameraModel cam = axis_camera(5, 5.0);
    cam.t = Eigen::Vector3d(100, 0, 0);
    FeatureImage img(5, 5, 1);
    for (double& v : img.values) v = 1.0;
    const auto d = sight_project(img, cam, grid({3, 3, 6, 1}, {-1.5, -1.5, 1.0}, 1.0));
    for (double v : d.values()) CHECK(v == 0.0);
  }
  SUBCASE("touched voxels equal the per-voxel oracle union") {
    std::mt19937_64 rng(24);
    const auto g = grid({6, 5, 7, 1}, {-0.3, -0.25, 0.1}, 0.1);
    for (int trial = 0; trial < 10; ++trial) {
      const CameraModel cam = camera_facing(g, rng, 10, 8);
      const FeatureImage img = random_image(10, 8, 1, rng);
      std::set<Coord> expected;
      for (int py = 0; py < 8; ++py)
        for (int px = 0; px < 10; ++px) expected.merge(oracle::voxels_on_ray(g, pixel_ray(cam, px, py)));
      const auto d = sight_project(img, cam, g);
      std::set<Coord> touched;
      for (std::int64_t v = 0; v < std::int64_t(g.shape.voxels()); ++v)
        if (d.voxel(v)[0] != 0.0) touched.insert(coord_of(g.shape, v));
      CHECK(touched == expected);
    }
  }
}

TEST_CASE("distance attention weights") {
  CHECK(distance_attention_weight(6, 4, 1) == 1.0 / 3.0);
  CHECK(distance_attention_weight(4, 4, 1) == 1.0);
  CHECK(distance_attention_weight(2, 4, 1) == 0.5);
  CHECK(distance_attention_weight(1, 4, 1) == 0.0);
  CHECK(distance_attention_weight(0.5, 4, 1) == 0.0);
  CHECK(distance_attention_weight(13, 4, 1) == 0.1);
  CHECK(distance_attention_weight(4.3, 4, 1, 0.5) == 1.0);
  CHECK(distance_attention_weight(3.7, 4, 1, 0.5) == 1.0);
  CHECK(near_threshold(4.0, 0.5) == 3.5);
  CHECK(near_threshold(0.3, 0.5) == 0.0);

  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double dp = 0.1 + 10 * u(rng), delta = dp * u(rng) * 0.999, tol = 0.2 * u(rng);
    const double d1 = 12 * u(rng), d2 = 12 * u(rng);
    const double w1 = distance_attention_weight(d1, dp, delta, tol), w2 = distance_attention_weight(d2, dp, delta, tol);
    CHECK(w1 >= 0.0);
    CHECK(w1 <= 1.0);
    CHECK(distance_attention_weight(dp, dp, delta, tol) >= w1);
    if (d1 > dp + tol && d2 > d1) CHECK(w2 < w1);
  }
}

TEST_CASE("distance attention projection along one ray") {
  // Only the central pixel has depth; its ray is the z axis, so voxel k of
  // the centre column spans t in [1 + k, 2 + k].
  const CameraModel cam = axis_camera(5, 5.0);
  const auto g = grid({3, 3, 12, 1}, {-1.5, -1.5, 1.0}, 1.0);
  FeatureImage img(5, 5, 1);
  for (double& v : img.values) v = 1.0;
  DepthMap depth(5, 5);
  depth.rms = 0.5;
  depth.depth[depth.index(2, 2)] = 3.0;
  depth.valid[depth.index(2, 2)] = 1;
  const auto d = distance_attention_project(img, depth, cam, g);
  for (int k = 0; k < 12; ++k) {
    const double d_voxel = std::clamp(3.0, 1.0 + k, 2.0 + k);
    CHECK(d.at(1, 1, k, 0) == distance_attention_weight(d_voxel, 3.0, 2.5, 0.5));
  }
  CHECK(d.at(1, 1, 0, 0) == 0.0);
  CHECK(d.at(1, 1, 1, 0) == 1.0);
  CHECK(d.at(1, 1, 11, 0) == 0.1);
  double total = 0.0;
  for (double v : d.values()) total += v;
  double column = 0.0;
  for (int k = 0; k < 12; ++k) column += d.at(1, 1, k, 0);
  CHECK(total == column);
}

TEST_CASE("surface and distance attention agree at the surface") {
  std::mt19937_64 rng(26);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto g = grid({6, 5, 7, 1}, {-0.3, -0.25, 0.1}, 0.1);
  int behind_checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const CameraModel cam = camera_facing(g, rng, 16, 12);
    const FeatureImage img = random_image(16, 12, 3, rng);
    DepthMap depth(16, 12);
    depth.rms = 0.05;
    // Keep only pixels whose rays share no voxel with an earlier kept ray.
    std::set<Coord> used;
    for (int py = 0; py < 12; ++py)
      for (int px = 0; px < 16; ++px) {
        const auto hits = traverse_ray(g, pixel_ray(cam, px, py));
        if (hits.size() < 2) continue;
        bool clash = false;
        for (const auto& h : hits) clash = clash || used.count(h.voxel);
        if (clash) continue;
        for (const auto& h : hits) used.insert(h.voxel);
        const auto& mid = hits[hits.size() / 2];
        depth.depth[depth.index(px, py)] = mid.t_in + (0.2 + 0.6 * u(rng)) * (mid.t_out - mid.t_in);
        depth.valid[depth.index(px, py)] = 1;
      }
    const auto surface = surface_project(img, depth, cam, g);
    const auto dap = distance_attention_project(img, depth, cam, g);
    REQUIRE(surface.size() > 0);
    for (std::size_t i = 0; i < surface.size(); ++i) {
      const Coord c = surface.active().coords()[i];
      for (int ch = 0; ch < 3; ++ch) CHECK(std::abs(dap.at(c.x, c.y, c.z, ch) - surface.row(i)[ch]) < 1e-9);
    }
    // Occlusion coverage: voxels beyond the surface still carry features.
    for (int py = 0; py < 12; ++py)
      for (int px = 0; px < 16; ++px) {
        const std::size_t k = depth.index(px, py);
        if (!depth.valid[k]) continue;
        for (const auto& h : traverse_ray(g, pixel_ray(cam, px, py)))
          if (h.t_in > depth.depth[k]) {
            CHECK(dap.at(h.voxel.x, h.voxel.y, h.voxel.z, 0) > 0.0);
            ++behind_checked;
          }
      }
  }
  CHECK(behind_checked > 0);
}

TEST_CASE("context block over the projection") {
  std::mt19937_64 rng(27);
  ParameterStore store;
  add_aic_block(store, "context", 4, rng);
  const auto x = oracle::random_dense({3, 4, 3, 4}, rng);
  {
    Tape t;
    CHECK(dap_context(t, store, "context", t.constant(x)).dense().shape() == x.shape());
  }
  const auto r = gradcheck::check([&](Tape& t, const std::vector<Var>& in) { return dap_context(t, store, "context", in[0]); },
                                  {{Layout::dense(x.shape()), {x.values().begin(), x.values().end()}}}, rng);
  CHECK(r.rel_error < 1e-4);
  for (auto& p : store.all()) std::fill(p.value.begin(), p.value.end(), 0.0);
  Tape t;
  const auto y = dap_context(t, store, "context", t.constant(DenseVoxelTensor(x.shape()))).dense();
  for (double v : y.values()) CHECK(v == 0.0);
}
