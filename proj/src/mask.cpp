#include "mrn/mask.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mrn/blocks.hpp"
#include "mrn/error.hpp"
#include "mrn/ops.hpp"

namespace mrn {

VoxelMask VoxelMask::from_active(const ActiveSet& active) {
  VoxelMask m(active.shape());
  for (std::size_t i = 0; i < active.size(); ++i) m.bits[std::size_t(active.linear(i))] = 1;
  return m;
}

std::size_t VoxelMask::count() const { return std::size_t(std::count(bits.begin(), bits.end(), 1)); }

bool VoxelMask::binary() const {
  return std::all_of(bits.begin(), bits.end(), [](std::uint8_t b) { return b <= 1; });
}

std::shared_ptr<const ActiveSet> VoxelMask::active_set() const {
  std::vector<Coord> coords;
  for (std::size_t v = 0; v < bits.size(); ++v)
    if (bits[v]) coords.push_back(coord_of(shape, std::int64_t(v)));
  return ActiveSet::from_coords(shape, std::move(coords));
}

DenseVoxelTensor occupancy_score(const DenseVoxelTensor& logits) {
  const GridShape& s = logits.shape();
  require(s.channels >= 2, "occupancy score needs at least two classes");
  DenseVoxelTensor out(s.with_channels(1));
  auto values = out.values();
  for (std::size_t v = 0; v < s.voxels(); ++v) {
    const auto row = logits.voxel(std::int64_t(v));
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double l : row) z += std::exp(l - mx);
    // 1 - p_empty, summed over the occupied classes to keep precision when
    // p_empty is close to 1.
    double occupied = 0.0;
    for (std::size_t c = 1; c < row.size(); ++c) occupied += std::exp(row[c] - mx);
    values[v] = occupied / z;
  }
  return out;
}

VoxelMask init_mask(const DenseVoxelTensor& score, double threshold) {
  require(threshold > 0.0 && threshold < 1.0, "mask threshold must lie in (0, 1)");
  require(score.shape().channels == 1, "occupancy score must have one channel");
  VoxelMask m(score.shape());
  const auto values = score.values();
  for (std::size_t v = 0; v < m.bits.size(); ++v) m.bits[v] = values[v] >= threshold ? 1 : 0;
  return m;
}

VoxelMask mask_gt(std::span<const std::uint8_t> labels, GridShape shape) {
  require(labels.size() == shape.voxels(), "label grid size mismatch");
  VoxelMask m(shape);
  for (std::size_t v = 0; v < labels.size(); ++v) m.bits[v] = labels[v] != 0 && labels[v] != kIgnoreLabel;
  return m;
}

std::vector<double> dropout_scale(std::size_t n, double rate, std::mt19937_64& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout rate must lie in [0, 1)");
  std::vector<double> scale(n, 1.0);
  if (rate == 0.0) return scale;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 / (1.0 - rate);
  for (double& s : scale) s = u(rng) < rate ? 0.0 : keep;
  return scale;
}

void add_mask_head(ParameterStore& store, const std::string& prefix, int in_channels, int mid_channels,
                   std::mt19937_64& rng) {
  add_conv_params(store, prefix + ".conv1", Extent{}, in_channels, mid_channels, rng);
  add_conv_params(store, prefix + ".conv2", Extent{}, mid_channels, 2, rng);
}

Var mask_head(Tape& tape, ParameterStore& store, const std::string& prefix, const Var& ssc_logits,
              const MaskHeadOptions& options) {
  require(ssc_logits.layout.kind == Layout::Kind::Dense, "mask head expects a dense input");
  const int mid = int(store.at(prefix + ".conv1.b").size());
  Var a = conv_layer(tape, store, prefix + ".conv1", ssc_logits, Extent{}, mid);
  a = ad::avg_pool2(a);
  if (options.training && options.dropout_rate > 0.0) {
    require(options.rng != nullptr, "training mask head needs a dropout generator");
    a = ad::apply_scale_mask(a, dropout_scale(a.layout.size(), options.dropout_rate, *options.rng));
  }
  a = conv_layer(tape, store, prefix + ".conv2", a, Extent{}, 2);
  a = ad::upsample_nearest2(a);
  return ad::channel_softmax(a);
}

namespace {

// Indices of the k largest scores among candidates; index order (which is
// lexicographic coordinate order) breaks ties.
std::vector<std::size_t> top_k(std::vector<std::size_t> candidates, std::span<const double> score, int k) {
  const std::size_t take = std::min<std::size_t>(std::size_t(k), candidates.size());
  auto better = [&](std::size_t a, std::size_t b) { return score[a] > score[b] || (score[a] == score[b] && a < b); };
  std::partial_sort(candidates.begin(), candidates.begin() + std::ptrdiff_t(take), candidates.end(), better);
  candidates.resize(take);
  return candidates;
}

}  // namespace

VoxelMask apply_topk_update(const VoxelMask& prev, std::span<const double> occupied, std::span<const double> empty,
                            int k) {
  require(k >= 0, "K must be non-negative");
  require(prev.binary(), "mask must be binary");
  const std::size_t n = prev.bits.size();
  require(occupied.size() == n && empty.size() == n, "score field size does not match mask");
  std::vector<std::size_t> unmasked, masked;
  for (std::size_t v = 0; v < n; ++v) (prev.bits[v] ? masked : unmasked).push_back(v);
  VoxelMask next = prev;
  for (std::size_t v : top_k(std::move(unmasked), occupied, k)) next.bits[v] = 1;
  for (std::size_t v : top_k(std::move(masked), empty, k)) next.bits[v] = 0;
  return next;
}

std::string encode_mask_rle(const VoxelMask& mask) {
  std::ostringstream out;
  out << "MRNMASK " << mask.shape.x << ' ' << mask.shape.y << ' ' << mask.shape.z << '\n';
  std::uint8_t current = 0;
  std::size_t run = 0;
  bool first = true;
  auto flush = [&] {
    out << (first ? "" : " ") << run;
    first = false;
  };
  for (std::uint8_t b : mask.bits) {
    if (b != current) {
      flush();
      current = b;
      run = 0;
    }
    ++run;
  }
  flush();
  out << '\n';
  return out.str();
}

VoxelMask decode_mask_rle(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  GridShape s;
  if (!(in >> magic >> s.x >> s.y >> s.z) || magic != "MRNMASK" || !s.valid())
    throw FormatError("bad mask header");
  VoxelMask m(s);
  std::size_t pos = 0, run = 0;
  std::uint8_t value = 0;
  while (in >> run) {
    if (pos + run > m.bits.size()) throw FormatError("mask runs exceed grid size");
    std::fill_n(m.bits.begin() + std::ptrdiff_t(pos), run, value);
    pos += run;
    value ^= 1;
  }
  if (!in.eof() || pos != m.bits.size()) throw FormatError("mask runs do not cover the grid");
  return m;
}

void save_mask(const std::filesystem::path& path, const VoxelMask& mask) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << encode_mask_rle(mask);
}

VoxelMask load_mask(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return decode_mask_rle(buf.str());
}

}  // namespace mrn
