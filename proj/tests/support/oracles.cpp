#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracle {

using mrn::DenseVoxelTensor;

DenseVoxelTensor conv3d(const DenseVoxelTensor& x, const mrn::ConvKernel3D& k) {
  const GridShape s = x.shape();
  DenseVoxelTensor y(s.with_channels(k.out_channels));
  const int hx = k.extent.x / 2, hy = k.extent.y / 2, hz = k.extent.z / 2;
  for (int i = 0; i < s.x; ++i)
    for (int j = 0; j < s.y; ++j)
      for (int l = 0; l < s.z; ++l)
        for (int o = 0; o < k.out_channels; ++o) {
          double acc = k.bias[std::size_t(o)];
          for (int a = 0; a < k.extent.x; ++a)
            for (int b = 0; b < k.extent.y; ++b)
              for (int c = 0; c < k.extent.z; ++c) {
                const int xi = i + a - hx, yi = j + b - hy, zi = l + c - hz;
                if (xi < 0 || yi < 0 || zi < 0 || xi >= s.x || yi >= s.y || zi >= s.z) continue;
                const int tap = (a * k.extent.y + b) * k.extent.z + c;
                for (int ci = 0; ci < k.in_channels; ++ci) acc += k.weight(tap, ci, o) * x.at(xi, yi, zi, ci);
              }
          y.at(i, j, l, o) = acc;
        }
  return y;
}

DenseVoxelTensor deconv_up2(const DenseVoxelTensor& x, const mrn::ConvKernel3D& k) {
  const GridShape s = x.shape();
  const GridShape os{2 * s.x, 2 * s.y, 2 * s.z, k.out_channels};
  DenseVoxelTensor y(os);
  for (int i = 0; i < os.x; ++i)
    for (int j = 0; j < os.y; ++j)
      for (int l = 0; l < os.z; ++l)
        for (int o = 0; o < k.out_channels; ++o) y.at(i, j, l, o) = k.bias[std::size_t(o)];
  for (int i = 0; i < s.x; ++i)
    for (int j = 0; j < s.y; ++j)
      for (int l = 0; l < s.z; ++l)
        for (int a = 0; a < k.extent.x; ++a)
          for (int b = 0; b < k.extent.y; ++b)
            for (int c = 0; c < k.extent.z; ++c) {
              const int oi = 2 * i - k.extent.x / 2 + a, oj = 2 * j - k.extent.y / 2 + b,
                        ol = 2 * l - k.extent.z / 2 + c;
              if (oi < 0 || oj < 0 || ol < 0 || oi >= os.x || oj >= os.y || ol >= os.z) continue;
              const int tap = (a * k.extent.y + b) * k.extent.z + c;
              for (int o = 0; o < k.out_channels; ++o)
                for (int ci = 0; ci < k.in_channels; ++ci) y.at(oi, oj, ol, o) += k.weight(tap, ci, o) * x.at(i, j, l, ci);
            }
  return y;
}

std::set<Coord> dilated_set(const mrn::ActiveSet& in, mrn::Extent e) {
  const GridShape s = in.shape();
  std::set<Coord> out;
  for (int x = 0; x < s.x; ++x)
    for (int y = 0; y < s.y; ++y)
      for (int z = 0; z < s.z; ++z)
        for (const Coord& c : in.coords())
          if (std::abs(c.x - x) <= e.x / 2 && std::abs(c.y - y) <= e.y / 2 && std::abs(c.z - z) <= e.z / 2) {
            out.insert({x, y, z});
            break;
          }
  return out;
}

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

DenseVoxelTensor concat(const DenseVoxelTensor& a, const DenseVoxelTensor& b) {
  const GridShape s = a.shape();
  DenseVoxelTensor out(s.with_channels(s.channels + b.shape().channels));
  for (int x = 0; x < s.x; ++x)
    for (int y = 0; y < s.y; ++y)
      for (int z = 0; z < s.z; ++z) {
        for (int c = 0; c < s.channels; ++c) out.at(x, y, z, c) = a.at(x, y, z, c);
        for (int c = 0; c < b.shape().channels; ++c) out.at(x, y, z, s.channels + c) = b.at(x, y, z, c);
      }
  return out;
}

}  // namespace

DenseVoxelTensor dense_gru(const DenseVoxelTensor& h, const DenseVoxelTensor& x, const mrn::MSGRUParams& p) {
  const DenseVoxelTensor hx = concat(h, x);
  DenseVoxelTensor z = oracle::conv3d(hx, p.update), r = oracle::conv3d(hx, p.reset);
  for (double& v : z.values()) v = sigmoid(v);
  for (double& v : r.values()) v = sigmoid(v);
  DenseVoxelTensor rh = h;
  for (std::size_t k = 0; k < rh.values().size(); ++k) rh.values()[k] *= r.values()[k];
  DenseVoxelTensor hc = oracle::conv3d(concat(rh, x), p.candidate);
  DenseVoxelTensor out = h;
  for (std::size_t k = 0; k < out.values().size(); ++k) {
    const double zz = z.values()[k];
    out.values()[k] = (1.0 - zz) * h.values()[k] + zz * std::tanh(hc.values()[k]);
  }
  return out;
}

mrn::VoxelMask topk_update(const mrn::VoxelMask& prev, std::span<const double> occupied,
                           std::span<const double> empty, int k) {
  std::vector<std::size_t> add, remove;
  for (std::size_t v = 0; v < prev.bits.size(); ++v) (prev.bits[v] ? remove : add).push_back(v);
  // Stable sort by descending score keeps index (coordinate) order within ties.
  std::stable_sort(add.begin(), add.end(), [&](auto a, auto b) { return occupied[a] > occupied[b]; });
  std::stable_sort(remove.begin(), remove.end(), [&](auto a, auto b) { return empty[a] > empty[b]; });
  mrn::VoxelMask out = prev;
  for (std::size_t i = 0; i < add.size() && i < std::size_t(k); ++i) out.bits[add[i]] = 1;
  for (std::size_t i = 0; i < remove.size() && i < std::size_t(k); ++i) out.bits[remove[i]] = 0;
  return out;
}

bool ray_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& lo,
             const Eigen::Vector3d& hi, double& t0, double& t1, double min_len) {
  t0 = 0.0;
  t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    const double ta = (lo[a] - o[a]) / d[a], tb = (hi[a] - o[a]) / d[a];
    t0 = std::max(t0, std::min(ta, tb));
    t1 = std::min(t1, std::max(ta, tb));
  }
  return t1 - t0 > min_len;
}

std::set<Coord> voxels_on_ray(const mrn::VoxelGridGeometry& g, const mrn::Ray& ray) {
  std::set<Coord> out;
  const GridShape s = g.shape;
  for (int x = 0; x < s.x; ++x)
    for (int y = 0; y < s.y; ++y)
      for (int z = 0; z < s.z; ++z) {
        const Eigen::Vector3d lo = g.origin + g.voxel_size * Eigen::Vector3d(x, y, z);
        const Eigen::Vector3d hi = lo + Eigen::Vector3d::Constant(g.voxel_size);
        double t0, t1;
        if (ray_box(ray.origin, ray.dir, lo, hi, t0, t1)) out.insert({x, y, z});
      }
  return out;
}

double nearest_surface(const mrn::VoxelGridGeometry& g, std::span<const std::uint8_t> labels, const mrn::Ray& ray) {
  double best = -1.0;
  const GridShape s = g.shape;
  for (int x = 0; x < s.x; ++x)
    for (int y = 0; y < s.y; ++y)
      for (int z = 0; z < s.z; ++z) {
        const std::uint8_t l = labels[std::size_t(mrn::linear_index(s, {x, y, z}))];
        if (l == 0 || l == 255) continue;
        const Eigen::Vector3d lo = g.origin + g.voxel_size * Eigen::Vector3d(x, y, z);
        const Eigen::Vector3d hi = lo + Eigen::Vector3d::Constant(g.voxel_size);
        double t0, t1;
        if (ray_box(ray.origin, ray.dir, lo, hi, t0, t1) && (best < 0.0 || t0 < best)) best = t0;
      }
  return best;
}

mrn::MetricsReport confusion_metrics(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth,
                                     int classes) {
  const int n = classes + 1;
  std::vector<std::vector<double>> m(std::size_t(n), std::vector<double>(std::size_t(n), 0.0));
  for (std::size_t v = 0; v < truth.size(); ++v)
    if (truth[v] != 255) m[truth[v]][pred[v]] += 1.0;
  double tp = 0, fp = 0, fn = 0;
  for (int g = 0; g < n; ++g)
    for (int p = 0; p < n; ++p) {
      if (g > 0 && p > 0) tp += m[std::size_t(g)][std::size_t(p)];
      if (g == 0 && p > 0) fp += m[std::size_t(g)][std::size_t(p)];
      if (g > 0 && p == 0) fn += m[std::size_t(g)][std::size_t(p)];
    }
  auto safe = [](double a, double b) { return b == 0.0 ? 1.0 : a / b; };
  mrn::MetricsReport r;
  r.sc_iou = safe(tp, tp + fp + fn);
  r.sc_precision = safe(tp, tp + fp);
  r.sc_recall = safe(tp, tp + fn);
  double sum = 0.0;
  int count = 0;
  for (int c = 1; c < n; ++c) {
    double row = 0, col = 0;
    for (int k = 0; k < n; ++k) row += m[std::size_t(c)][std::size_t(k)], col += m[std::size_t(k)][std::size_t(c)];
    const double inter = m[std::size_t(c)][std::size_t(c)];
    const double uni = row + col - inter;
    if (uni == 0.0) {
      r.class_iou.emplace_back();
      continue;
    }
    r.class_iou.emplace_back(inter / uni);
    sum += inter / uni;
    ++count;
  }
  r.ssc_miou = count ? sum / count : 1.0;
  return r;
}

mrn::SparseVoxelTensor random_sparse(GridShape g, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(density);
  std::normal_distribution<double> n;
  std::vector<Coord> coords;
  for (int x = 0; x < g.x; ++x)
    for (int y = 0; y < g.y; ++y)
      for (int z = 0; z < g.z; ++z)
        if (keep(rng)) coords.push_back({x, y, z});
  auto active = mrn::ActiveSet::from_coords(g, std::move(coords));
  std::vector<double> f(active->size() * std::size_t(g.channels));
  for (double& v : f) v = n(rng);
  return mrn::SparseVoxelTensor(active, g.channels, std::move(f));
}

mrn::DenseVoxelTensor random_dense(GridShape g, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  mrn::DenseVoxelTensor t(g);
  for (double& v : t.values()) v = n(rng);
  return t;
}

mrn::ConvKernel3D random_kernel(mrn::Extent e, int in, int out, std::mt19937_64& rng, double scale) {
  auto k = mrn::ConvKernel3D::zeros(e, in, out);
  std::normal_distribution<double> n(0.0, scale);
  for (double& w : k.weights) w = n(rng);
  for (double& b : k.bias) b = n(rng);
  return k;
}

}  // namespace oracle
