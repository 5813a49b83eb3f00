#include "mrn/scene_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mrn/error.hpp"

namespace mrn {
namespace {

static_assert(std::endian::native == std::endian::little, "raster I/O assumes a little-endian host");

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw FormatError("cannot write " + p.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot read " + p.string());
  return in;
}

void write_raster(const std::filesystem::path& p, int w, int h, int c, const std::vector<double>& values) {
  auto out = open_out(p);
  out << "MRNRASTER " << w << ' ' << h << ' ' << c << '\n';
  std::vector<float> f(values.begin(), values.end());
  out.write(reinterpret_cast<const char*>(f.data()), std::streamsize(f.size() * sizeof(float)));
}

std::vector<double> read_raster(const std::filesystem::path& p, int& w, int& h, int& c) {
  auto in = open_in(p);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  if (!(hs >> magic >> w >> h >> c) || magic != "MRNRASTER" || w < 1 || h < 1 || c < 1)
    throw FormatError("bad raster header in " + p.string());
  std::vector<float> f(std::size_t(w) * h * c);
  in.read(reinterpret_cast<char*>(f.data()), std::streamsize(f.size() * sizeof(float)));
  if (in.gcount() != std::streamsize(f.size() * sizeof(float)) || in.peek() != EOF)
    throw FormatError("raster payload size mismatch in " + p.string());
  return {f.begin(), f.end()};
}

void write_depth(const std::filesystem::path& p, const DepthMap& d) {
  std::vector<double> v(d.depth.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = d.valid[k] ? d.depth[k] : 0.0;
  write_raster(p, d.width, d.height, 1, v);
}

DepthMap read_depth(const std::filesystem::path& p, double rms) {
  int w, h, c;
  auto v = read_raster(p, w, h, c);
  if (c != 1) throw FormatError("depth raster must have one channel: " + p.string());
  DepthMap d(w, h);
  d.rms = rms;
  for (std::size_t k = 0; k < v.size(); ++k) {
    d.valid[k] = v[k] > 0.0;
    d.depth[k] = d.valid[k] ? v[k] : 0.0;
  }
  return d;
}

}  // namespace

void save_scene(const std::filesystem::path& dir, const SceneSample& s) {
  std::filesystem::create_directories(dir);
  save_camera(dir / "camera.txt", s.camera);
  write_raster(dir / "features.f32", s.features.width, s.features.height, s.features.channels, s.features.values);
  write_depth(dir / "depth.f32", s.depth);
  write_depth(dir / "depth_noisy.f32", s.noisy_depth);
  {
    auto out = open_out(dir / "labels.u8");
    const GridShape g = s.grid();
    out << "MRNLABELS " << g.x << ' ' << g.y << ' ' << g.z << '\n';
    out.write(reinterpret_cast<const char*>(s.labels.data()), std::streamsize(s.labels.size()));
  }
  auto meta = open_out(dir / "meta.txt");
  meta.precision(17);
  const auto& o = s.geometry.origin;
  meta << "origin " << o.x() << ' ' << o.y() << ' ' << o.z() << '\n'
       << "voxel_size " << s.geometry.voxel_size << '\n'
       << "depth_rms " << s.depth.rms << '\n';
}

SceneSample load_scene(const std::filesystem::path& dir) {
  SceneSample s;
  double rms = 0.0;
  {
    auto in = open_in(dir / "meta.txt");
    std::string key;
    bool have_origin = false, have_size = false, have_rms = false;
    while (in >> key) {
      if (key == "origin") have_origin = bool(in >> s.geometry.origin.x() >> s.geometry.origin.y() >> s.geometry.origin.z());
      else if (key == "voxel_size") have_size = bool(in >> s.geometry.voxel_size);
      else if (key == "depth_rms") have_rms = bool(in >> rms);
      else throw FormatError("unknown key '" + key + "' in " + (dir / "meta.txt").string());
    }
    if (!have_origin || !have_size || !have_rms || !(s.geometry.voxel_size > 0.0))
      throw FormatError("incomplete scene metadata in " + dir.string());
  }
  s.camera = load_camera(dir / "camera.txt");
  int w, h, c;
  s.features.values = read_raster(dir / "features.f32", w, h, c);
  s.features.width = w, s.features.height = h, s.features.channels = c;
  s.depth = read_depth(dir / "depth.f32", rms);
  s.noisy_depth = read_depth(dir / "depth_noisy.f32", rms);
  if (s.camera.width != w || s.camera.height != h || s.depth.width != w || s.depth.height != h ||
      s.noisy_depth.width != w || s.noisy_depth.height != h)
    throw FormatError("inconsistent image sizes in " + dir.string());
  {
    auto in = open_in(dir / "labels.u8");
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string magic;
    GridShape g;
    if (!(hs >> magic >> g.x >> g.y >> g.z) || magic != "MRNLABELS" || !g.valid())
      throw FormatError("bad label header in " + dir.string());
    s.geometry.shape = g;
    s.labels.resize(g.voxels());
    in.read(reinterpret_cast<char*>(s.labels.data()), std::streamsize(s.labels.size()));
    if (in.gcount() != std::streamsize(s.labels.size()) || in.peek() != EOF)
      throw FormatError("label payload size mismatch in " + dir.string());
  }
  return s;
}

std::vector<std::filesystem::path> list_scenes(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory() && std::filesystem::exists(e.path() / "labels.u8")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

std::vector<SceneSample> load_scenes(const std::filesystem::path& root) {
  std::vector<SceneSample> out;
  for (const auto& d : list_scenes(root)) out.push_back(load_scene(d));
  return out;
}

}  // namespace mrn
