// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Geometry>

#include "gradcheck.hpp"
#include "mrn/blocks.hpp"
#include "mrn/config.hpp"
#include "mrn/conv.hpp"
#include "mrn/mask.hpp"
#include "mrn/objective.hpp"
#include "mrn/ops.hpp"
#include "mrn/profile.hpp"
#include "mrn/projection.hpp"
#include "mrn/recurrent.hpp"
#include "mrn/scene.hpp"
#include "mrn/train.hpp"
#include "oracles.hpp"

using namespace mrn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> normal(std::size_t n, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& e : v) e = scale * d(rng);
  return v;
}

std::vector<double> uniform(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& e : v) e = d(rng);
  return v;
}

VoxelMask random_voxel_mask(GridShape g, double density, std::mt19937_64& rng) {
  VoxelMask m(g);
  std::bernoulli_distribution on(density);
  for (auto& b : m.bits) b = on(rng);
  return m;
}

std::vector<std::uint8_t> random_labels(std::size_t n, int classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> lab(0, classes + 1);
  std::vector<std::uint8_t> l(n);
  for (auto& e : l) {
    const int v = lab(rng);
    e = v == classes + 1 ? kIgnoreLabel : std::uint8_t(v);
  }
  l[0] = 1;
  return l;
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  constexpr int kInstances = 10;
  constexpr double kTol = 1e-4;
  struct Op {
    std::string name;
    std::function<gradcheck::Result(int)> run;
  };
  const Extent e{};
  std::vector<Op> ops;

  auto conv_op = [&](std::string name, auto fn, bool sparse_input) {
    ops.push_back({name, [&, fn, sparse_input](int i) {
                     const GridShape g{3 + i % 3, 3, 4, 2};
                     const int co = 2 + i % 2;
                     const std::size_t w = 27 * 2 * std::size_t(co);
                     Layout in = sparse_input ? Layout::sparse(oracle::random_sparse(g, 0.35, rng).active_ptr(), 2)
                                              : Layout::dense(g);
                     if (sparse_input && in.rows() == 0) in = Layout::sparse(ActiveSet::from_coords(g, {{1, 1, 1}}), 2);
                     return gradcheck::check(
                         [fn, co](Tape&, const std::vector<Var>& v) { return fn(v[0], v[1], v[2], co); },
                         {{in, normal(in.size(), 1.0, rng)}, {Layout::flat(w), normal(w, 0.3, rng)},
                          {Layout::flat(co), normal(co, 0.5, rng)}},
                         rng);
                   }});
  };
  conv_op("submanifold conv",
          [e](const Var& x, const Var& w, const Var& b, int co) { return ad::submanifold_conv(x, w, b, e, co); }, true);
  conv_op("sparse conv",
          [e](const Var& x, const Var& w, const Var& b, int co) { return ad::sparse_conv(x, w, b, e, co); }, true);
  conv_op("deconv", [e](const Var& x, const Var& w, const Var& b, int co) { return ad::deconv_up2(x, w, b, e, co); },
          false);

  ops.push_back({"aic block", [&](int i) {
                   ParameterStore store;
                   add_aic_block(store, "aic", 4, rng);
                   const auto x = oracle::random_dense({3, 2 + i % 2, 4, 4}, rng);
                   const auto rp = gradcheck::check_params(
                       [&](Tape& t) { return aic_block(t, store, "aic", t.constant(x)); }, store, rng);
                   const auto rx = gradcheck::check(
                       [&](Tape& t, const std::vector<Var>& v) { return aic_block(t, store, "aic", v[0]); },
                       {{Layout::dense(x.shape()), {x.values().begin(), x.values().end()}}}, rng);
                   return rp.rel_error > rx.rel_error ? rp : rx;
                 }});
  ops.push_back({"channel attention", [&](int i) {
                   ParameterStore store;
                   add_channel_attention(store, "ca", 8, 4, rng);
                   const auto x = oracle::random_dense({3, 3, 2 + i % 3, 8}, rng);
                   const auto rp = gradcheck::check_params(
                       [&](Tape& t) { return channel_attention(t, store, "ca", t.constant(x)); }, store, rng);
                   const auto rx = gradcheck::check(
                       [&](Tape& t, const std::vector<Var>& v) { return channel_attention(t, store, "ca", v[0]); },
                       {{Layout::dense(x.shape()), {x.values().begin(), x.values().end()}}}, rng);
                   return rp.rel_error > rx.rel_error ? rp : rx;
                 }});
  ops.push_back({"masked recurrent step", [&](int i) {
                   const GridShape g{4, 3, 4, 1};
                   const int hc = 3, xc = 2;
                   const std::size_t w = 27 * std::size_t(hc + xc) * hc;
                   const auto m = random_voxel_mask(g, i == 0 ? 1.0 : 0.4, rng);
                   return gradcheck::check(
                       [&m](Tape&, const std::vector<Var>& v) {
                         return msgru_step(v[0], v[1], m, GruWeights{v[2], v[3], v[4], v[5], v[6], v[7], {}});
                       },
                       {{Layout::dense(g.with_channels(hc)), normal(g.voxels() * hc, 1.0, rng)},
                        {Layout::dense(g.with_channels(xc)), normal(g.voxels() * xc, 1.0, rng)},
                        {Layout::flat(w), normal(w, 0.2, rng)},
                        {Layout::flat(hc), normal(hc, 0.5, rng)},
                        {Layout::flat(w), normal(w, 0.2, rng)},
                        {Layout::flat(hc), normal(hc, 0.5, rng)},
                        {Layout::flat(w), normal(w, 0.2, rng)},
                        {Layout::flat(hc), normal(hc, 0.5, rng)}},
                       rng);
                 }});
  ops.push_back({"cross entropy", [&](int) {
                   const GridShape g{3, 3, 3, 6};
                   const auto labels = random_labels(g.voxels(), 5, rng);
                   return gradcheck::check(
                       [&](Tape&, const std::vector<Var>& v) { return ad::cross_entropy(v[0], labels); },
                       {{Layout::dense(g), normal(g.voxels() * 6, 2.0, rng)}}, rng);
                 }});
  ops.push_back({"balanced bce", [&](int) {
                   const std::size_t n = 27;
                   std::vector<std::uint8_t> target(n), valid(n);
                   std::bernoulli_distribution b(0.3), keep(0.9);
                   for (std::size_t k = 0; k < n; ++k) {
                     target[k] = b(rng);
                     valid[k] = keep(rng);
                   }
                   valid[0] = 1;
                   return gradcheck::check(
                       [&](Tape&, const std::vector<Var>& v) { return ad::weighted_bce(v[0], target, valid); },
                       {{Layout::dense({3, 3, 3, 1}), uniform(n, 0.05, 0.95, rng)}}, rng);
                 }});
  ops.push_back({"sequential losses", [&](int) {
                   const GridShape g{3, 2, 3, 6};
                   const auto labels = random_labels(g.voxels(), 5, rng);
                   std::vector<gradcheck::Input> in;
                   for (int s = 0; s < 3; ++s) in.push_back({Layout::dense(g), normal(g.voxels() * 6, 1.5, rng)});
                   in.push_back({Layout::dense(g.with_channels(1)), uniform(g.voxels(), 0.1, 0.9, rng)});
                   return gradcheck::check(
                       [&](Tape& t, const std::vector<Var>& v) {
                         const std::vector<Var> logits(v.begin(), v.begin() + 3), occ(v.begin() + 3, v.end());
                         return total_loss(t, logits, occ, labels).total;
                       },
                       in, rng);
                 }});
  ops.push_back({"mask head", [&](int i) {
                   ParameterStore store;
                   add_mask_head(store, "mh", 6, 4, rng);
                   const auto x = oracle::random_dense({4, 2, 4 + 2 * (i % 2), 6}, rng);
                   return gradcheck::check_params(
                       [&](Tape& t) {
                         std::mt19937_64 d(std::uint64_t(i) + 1);
                         return mask_head(t, store, "mh", t.constant(x), {true, 0.1, &d});
                       },
                       store, rng);
                 }});

  Outcome out;
  std::string worst_name;
  double worst = 0.0;
  int failures = 0;
  for (const auto& op : ops)
    for (int i = 0; i < kInstances; ++i) {
      const auto r = op.run(i);
      if (!(r.rel_error < kTol) || r.analytic_norm == 0.0) ++failures;
      if (r.rel_error > worst) {
        worst = r.rel_error;
        worst_name = op.name;
      }
    }
  const double elapsed = seconds_since(t0);
  out.pass = failures == 0 && elapsed < 120.0;
  out.detail = fmt("%zu ops x %d instances, worst rel error %.2e (%s), %d failures, %.1f s", ops.size(), kInstances,
                   worst, worst_name.c_str(), failures, elapsed);
  return out;
}

Outcome sparsity_invariants() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<int> side(2, 16);
  std::uniform_real_distribution<double> density(0.0, 0.2);
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    const GridShape g{side(rng), side(rng), side(rng), 2};
    const auto x = oracle::random_sparse(g, density(rng), rng);
    const auto k = oracle::random_kernel({}, 2, 2, rng);
    if (!(submanifold_conv3d(x, k).active() == x.active())) ++bad;
    const auto expected = oracle::dilated_set(x.active(), {});
    if (std::vector<Coord>(expected.begin(), expected.end()) != sparse_conv3d(x, k).active().coords()) ++bad;
  }
  const double elapsed = seconds_since(t0);
  return {bad == 0 && elapsed < 30.0, fmt("100 tensors, %d mismatched active sets, %.1f s", bad, elapsed)};
}

Outcome dense_equivalence() {
  std::mt19937_64 rng(103);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const GridShape g{3 + i % 4, 3 + i % 3, 4 + i % 5, 1};
    const int hc = 2 + i % 3, xc = 1 + i % 4;
    const auto p = MSGRUParams::random(hc, xc, {}, rng);
    const auto h = oracle::random_dense(g.with_channels(hc), rng), x = oracle::random_dense(g.with_channels(xc), rng);
    const auto y = msgru_step(h, x, VoxelMask(g, 1), p);
    const auto ref = oracle::dense_gru(h, x, p);
    for (std::size_t k = 0; k < y.values().size(); ++k) worst = std::max(worst, std::abs(y.values()[k] - ref.values()[k]));
  }
  return {worst <= 1e-10, fmt("20 instances, max |diff| %.2e", worst)};
}

Outcome attention_formula() {
  // Each regime evaluated straight from its branch.
  int checked = 0, bad = 0;
  auto expect = [&](double d, double dp, double delta, double w) {
    ++checked;
    if (distance_attention_weight(d, dp, delta) != w) ++bad;
  };
  expect(6, 4, 1, 1.0 / 3.0);
  expect(4, 4, 1, 1.0);
  expect(2, 4, 1, 0.5);
  expect(13, 4, 1, 0.1);
  for (double dp : {0.5, 1.0, 2.5, 4.0, 7.25})
    for (double delta_frac : {0.0, 0.25, 0.5, 0.9}) {
      const double delta = dp * delta_frac;
      for (double d = 0.0; d <= 12.0; d += 0.125) {
        double w;
        if (d > dp) w = 1.0 / (d - dp + 1.0);
        else if (d == dp) w = 1.0;
        else if (d > delta) w = 0.5;
        else w = 0.0;
        expect(d, dp, delta, w);
      }
    }
  return {bad == 0, fmt("%d triples over all four regimes, %d mismatches", checked, bad)};
}

Outcome loss_weights() {
  const auto w = mssc_stage_weights(3);
  const auto m = mask_stage_weights(1);
  bool ok = w.size() == 3 && w[0] == 1.0 && w[1] == 0.8 && std::abs(w[2] - 0.64) <= 1e-15 && m.size() == 1 &&
            m[0] == 0.6;

  // Losses against direct weighted sums of their stage terms.
  std::mt19937_64 rng(105);
  const GridShape g{3, 3, 3, 6};
  const auto labels = random_labels(g.voxels(), 5, rng);
  Tape t;
  std::vector<Var> logits;
  double direct = 0.0;
  const double weights[3] = {1.0, 0.8, 0.64};
  for (int s = 0; s < 3; ++s) {
    logits.push_back(t.constant(Layout::dense(g), normal(g.voxels() * 6, 1.0, rng)));
    direct += weights[s] * ad::cross_entropy(logits.back(), labels).scalar();
  }
  const double mssc = sequential_mssc_loss(logits, labels).scalar();
  std::vector<std::uint8_t> target(labels.size()), valid(labels.size());
  for (std::size_t k = 0; k < labels.size(); ++k) {
    valid[k] = labels[k] != kIgnoreLabel;
    target[k] = valid[k] && labels[k] != 0;
  }
  const Var occ = t.constant(Layout::dense(g.with_channels(1)), uniform(g.voxels(), 0.1, 0.9, rng));
  const double mask = sequential_mask_loss(t, std::vector<Var>{occ}, labels).scalar();
  const double mask_direct = 0.6 * ad::weighted_bce(occ, target, valid).scalar();
  const double e1 = std::abs(mssc - direct) / direct, e2 = std::abs(mask - mask_direct) / mask_direct;
  ok = ok && e1 < 1e-14 && e2 < 1e-14;
  return {ok, fmt("stage weights (%.17g, %.17g, %.17g), mask weight %.17g; relative sum error %.1e / %.1e", w[0],
                  w[1], w[2], m[0], e1, e2)};
}

Outcome topk_update() {
  std::mt19937_64 rng(106);
  std::uniform_int_distribution<int> side(1, 8), kdist(0, 40);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatch = 0, bound = 0, beyond = 0;
  for (int i = 0; i < 1000; ++i) {
    const GridShape g{side(rng), side(rng), side(rng), 1};
    const auto prev = random_voxel_mask(g, u(rng), rng);
    std::vector<double> o(g.voxels()), e(g.voxels());
    for (std::size_t v = 0; v < o.size(); ++v) {
      o[v] = std::round(u(rng) * 16) / 16;
      e[v] = 1.0 - o[v];
    }
    const int k = kdist(rng);
    const std::size_t masked = prev.count();
    if (std::size_t(k) > masked || std::size_t(k) > prev.bits.size() - masked) ++beyond;
    const auto r = apply_topk_update(prev, o, e, k);
    if (!(r == oracle::topk_update(prev, o, e, k))) ++mismatch;
    std::size_t flips = 0;
    for (std::size_t v = 0; v < r.bits.size(); ++v) flips += r.bits[v] != prev.bits[v];
    if (flips > 2 * std::size_t(k) || !r.binary()) ++bound;
  }
  return {mismatch == 0 && bound == 0 && beyond > 0,
          fmt("1000 instances (%d with K above a candidate count), %d oracle mismatches, %d bound violations", beyond,
              mismatch, bound)};
}

// Brute-force pair enumeration over the mask: every (output, input) pair
// within the kernel reach, for the gates (outputs on the mask) and the
// candidate (outputs anywhere in the grid).
std::uint64_t enumerate_step_macs(const ExperimentConfig& c, const VoxelMask& m) {
  const GridShape g = c.grid;
  const int r = c.gate_kernel / 2;
  std::uint64_t gate_pairs = 0, cand_pairs = 0;
  for (int x = 0; x < g.x; ++x)
    for (int y = 0; y < g.y; ++y)
      for (int z = 0; z < g.z; ++z) {
        std::uint64_t n = 0;
        for (int dx = -r; dx <= r; ++dx)
          for (int dy = -r; dy <= r; ++dy)
            for (int dz = -r; dz <= r; ++dz) {
              const Coord q{x + dx, y + dy, z + dz};
              if (q.x < 0 || q.y < 0 || q.z < 0 || q.x >= g.x || q.y >= g.y || q.z >= g.z) continue;
              n += m.bits[std::size_t(linear_index(g, q))];
            }
        cand_pairs += n;
        if (m.bits[std::size_t(linear_index(g, {x, y, z}))]) gate_pairs += n;
      }
  const std::uint64_t per_pair = std::uint64_t(c.hidden + c.image_channels) * std::uint64_t(c.hidden);
  return (2 * gate_pairs + cand_pairs) * per_pair;
}

ExperimentConfig toy_config() { return load_config(fs::path(MRN_SOURCE_DIR) / "configs" / "toy.cfg"); }

Outcome mac_reduction() {
  ExperimentConfig c = toy_config();
  c.iterations = 2;
  c.tied_weights = true;
  const VoxelMask mask = random_mask(c.grid, 0.15, 7);
  const auto r = profile_gru(c, mask);
  const std::uint64_t oracle_macs = enumerate_step_macs(c, mask);
  const double err = std::abs(double(r.measured_step) - double(oracle_macs)) / double(oracle_macs);
  const bool ok = r.ratio() <= 0.40 && err <= 0.10 && r.masked_cumulative() == 2 * r.masked_step;
  return {ok, fmt("occupancy %.3f: MS-GRU/GRU %.4f (dense %llu, masked %llu MACs); measured vs enumeration %.2f%%; "
                  "N=2 cumulative %llu = 2 x %llu",
                  r.occupancy, r.ratio(), (unsigned long long)r.dense_step, (unsigned long long)r.masked_step,
                  100.0 * err, (unsigned long long)r.masked_cumulative(), (unsigned long long)r.masked_step)};
}

Outcome refinement_benefit(const fs::path& work) {
  const ExperimentConfig base = load_config(fs::path(MRN_SOURCE_DIR) / "configs" / "default.cfg");
  int seeds_ok = 0;
  double sc0 = 0, sc2 = 0, mi0 = 0, mi2 = 0, slowest = 0;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    ExperimentConfig c = base;
    c.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = train(c, work / ("refine_seed" + std::to_string(seed)));
    const double elapsed = seconds_since(t0);
    slowest = std::max(slowest, elapsed);
    const auto& y0 = r.eval->stages.at(0);
    const auto& y2 = r.eval->stages.at(2);
    if (y2.ssc_miou >= y0.ssc_miou) ++seeds_ok;
    sc0 += y0.sc_iou / 3;
    sc2 += y2.sc_iou / 3;
    mi0 += y0.ssc_miou / 3;
    mi2 += y2.ssc_miou / 3;
    per_seed += fmt(" seed %llu: mIoU %.4f -> %.4f, SC-IoU %.4f -> %.4f (%.0f s);", (unsigned long long)seed,
                    y0.ssc_miou, y2.ssc_miou, y0.sc_iou, y2.sc_iou, elapsed);
  }
  const bool ok = seeds_ok == 3 && sc2 >= sc0 && slowest < 1800.0;
  return {ok, fmt("%d/3 seeds with refined mIoU >= coarse; mean mIoU %.4f -> %.4f, mean SC-IoU %.4f -> %.4f;",
                  seeds_ok, mi0, mi2, sc0, sc2) +
                  per_seed};
}

Outcome projection_properties() {
  std::mt19937_64 rng(109);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double round_trip = 0.0;
  for (int i = 0; i < 1000; ++i) {
    CameraModel cam;
    cam.R = Eigen::Quaterniond(Eigen::Vector4d(u(rng), u(rng), u(rng), u(rng)).normalized()).toRotationMatrix();
    cam.t = 3.0 * Eigen::Vector3d(u(rng), u(rng), u(rng));
    cam.K << 300 + 200 * u(rng), 0.1 * u(rng), 32 + 5 * u(rng), 0, 300 + 200 * u(rng), 24 + 5 * u(rng), 0, 0, 1;
    const Eigen::Vector3d pc(2 * u(rng), 2 * u(rng), 3.0 + 2.5 * u(rng));
    const Eigen::Vector3d p = cam.R.transpose() * (pc - cam.t);
    const auto px = project_point(cam, p);
    round_trip = std::max(round_trip, (unproject(cam, px.u, px.v, px.depth) - p).norm());
  }

  // Generated scenes, keeping only pixels whose rays share no voxel so that
  // each surface voxel is reached by exactly one ray.
  const ExperimentConfig c = load_config(fs::path(MRN_SOURCE_DIR) / "configs" / "default.cfg");
  double agreement = 0.0;
  std::size_t surface_voxels = 0, behind = 0, behind_nonzero = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    SceneSample scene = generate_scene(derive_seed(77, kEvalStream, s), c);
    DepthMap depth = scene.noisy_depth;
    std::set<Coord> used;
    for (int py = 0; py < depth.height; ++py)
      for (int px = 0; px < depth.width; ++px) {
        const std::size_t k = depth.index(px, py);
        if (!depth.valid[k]) continue;
        const auto hits = traverse_ray(scene.geometry, pixel_ray(scene.camera, px, py));
        bool clash = false;
        for (const auto& h : hits) clash = clash || used.count(h.voxel);
        if (clash) {
          depth.valid[k] = 0;
          continue;
        }
        for (const auto& h : hits) used.insert(h.voxel);
      }
    const auto surface = surface_project(scene.features, depth, scene.camera, scene.geometry);
    const auto dap = distance_attention_project(scene.features, depth, scene.camera, scene.geometry);
    const int ch = scene.features.channels;
    for (std::size_t i = 0; i < surface.size(); ++i) {
      const Coord v = surface.active().coords()[i];
      for (int k = 0; k < ch; ++k)
        agreement = std::max(agreement, std::abs(dap.at(v.x, v.y, v.z, k) - surface.row(i)[std::size_t(k)]));
    }
    surface_voxels += surface.size();
    for (int py = 0; py < depth.height; ++py)
      for (int px = 0; px < depth.width; ++px) {
        const std::size_t k = depth.index(px, py);
        if (!depth.valid[k]) continue;
        for (const auto& h : traverse_ray(scene.geometry, pixel_ray(scene.camera, px, py)))
          if (h.t_in > depth.depth[k]) {
            ++behind;
            behind_nonzero += dap.at(h.voxel.x, h.voxel.y, h.voxel.z, kPresenceChannel) > 0.0;
          }
      }
  }
  const bool ok = round_trip < 1e-9 && agreement <= 1e-9 && surface_voxels > 0 && behind > 0 && behind_nonzero == behind;
  return {ok, fmt("round trip max %.2e over 1000 pairs; surface/DAP max diff %.2e over %zu voxels; %zu/%zu voxels "
                  "behind the surface carry features",
                  round_trip, agreement, surface_voxels, behind_nonzero, behind)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility(const fs::path& work) {
  const ExperimentConfig c = toy_config();
  train(c, work / "repro_a");
  train(c, work / "repro_b");
  bool ok = true;
  std::string detail;
  for (const char* f : {"checkpoint.bin", "metrics.json", "train_log.jsonl"}) {
    const auto a = slurp(work / "repro_a" / f), b = slurp(work / "repro_b" / f);
    const bool same = !a.empty() && a == b;
    ok = ok && same;
    detail += fmt("%s %s (%zu bytes); ", f, same ? "identical" : "DIFFERENT", a.size());
  }
  return {ok, detail};
}

Outcome ablation_reachability(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  struct Row {
    std::string name;
    std::function<void(ExperimentConfig&)> set;
  };
  auto plain_mrn = [](ExperimentConfig& c) {
    c.mask_update = false;
    c.mask_loss = false;
  };
  const std::vector<Row> rows = {
      // Component ablation
      {"baseline", [](ExperimentConfig& c) { c.mrn = false; }},
      {"+ms-gru", [&](ExperimentConfig& c) { plain_mrn(c); c.projection = ProjectionKind::Surface; }},
      {"+dap", [&](ExperimentConfig& c) { plain_mrn(c); c.projection = ProjectionKind::Dap; }},
      {"+mask update", [](ExperimentConfig&) {}},
      // Projection
      {"surface", [](ExperimentConfig& c) { c.projection = ProjectionKind::Surface; }},
      {"sight", [](ExperimentConfig& c) { c.projection = ProjectionKind::Sight; }},
      {"dap", [](ExperimentConfig& c) { c.projection = ProjectionKind::Dap; }},
      // Recurrent cell
      {"gru", [](ExperimentConfig& c) { c.cell = CellKind::Gru; }},
      {"ms-gru", [](ExperimentConfig& c) { c.cell = CellKind::MsGru; }},
      {"submanifold candidate", [](ExperimentConfig& c) { c.candidate = CandidateConv::Submanifold; }},
      {"untied", [](ExperimentConfig& c) { c.tied_weights = false; }},
      {"1 iteration", [](ExperimentConfig& c) { c.iterations = 1; }},
      {"2 iterations", [](ExperimentConfig& c) { c.iterations = 2; }},
      {"3 iterations", [](ExperimentConfig& c) { c.iterations = 3; }},
      {"4 iterations", [](ExperimentConfig& c) { c.iterations = 4; }},
      // Mask module
      {"no mask update", [](ExperimentConfig& c) { c.mask_update = false; }},
      {"no mask init", [](ExperimentConfig& c) { c.mask_init = false; }},
      {"no mask loss", [](ExperimentConfig& c) { c.mask_loss = false; }},
  };
  int ok_rows = 0;
  std::string failed;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ExperimentConfig c = toy_config();
    c.epochs = 1;
    rows[i].set(c);
    try {
      const auto r = train(c, work / ("ablation_" + std::to_string(i)));
      const auto& y = r.eval->refined();
      if (r.eval && std::isfinite(y.ssc_miou) && std::isfinite(y.sc_iou)) ++ok_rows;
      else failed += " " + rows[i].name;
    } catch (const std::exception& e) {
      failed += " " + rows[i].name + " (" + e.what() + ")";
    }
  }
  const double elapsed = seconds_since(t0);
  return {ok_rows == int(rows.size()) && elapsed < 600.0,
          fmt("%d/%zu toggle rows trained and evaluated, %.1f s", ok_rows, rows.size(), elapsed) +
              (failed.empty() ? "" : "; failed:" + failed)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> only;
  std::string workdir = (fs::temp_directory_path() / "mrn_acceptance").string();
  app.add_option("--only", only, "criteria to run (default: all)")->check(CLI::Range(1, 11));
  app.add_option("--workdir", workdir, "scratch directory for training runs");
  CLI11_PARSE(app, argc, argv);

  const fs::path work(workdir);
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"sparsity invariants", sparsity_invariants},
      {"dense equivalence", dense_equivalence},
      {"distance attention formula", attention_formula},
      {"loss weighting", loss_weights},
      {"top-k mask update", topk_update},
      {"MAC reduction", mac_reduction},
      {"refinement benefit", [&] { return refinement_benefit(work); }},
      {"projection properties", projection_properties},
      {"reproducibility", [&] { return reproducibility(work); }},
      {"ablation reachability", [&] { return ablation_reachability(work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(work);
  return failed;
}
