#include "mrn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "mrn/error.hpp"

namespace mrn {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw FormatError("cannot open for writing: " + path.string());
  }
  void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), std::streamsize(n)); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u32(std::uint32_t(s.size()));
    bytes(s.data(), s.size());
  }
  void finish() {
    out_.flush();
    if (!out_) throw FormatError("checkpoint write failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw FormatError("cannot open checkpoint: " + path.string());
  }
  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), std::streamsize(n));
    if (!in_) throw FormatError("truncated checkpoint");
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  std::string str() {
    std::string s(u32(), '\0');
    bytes(s.data(), s.size());
    return s;
  }

 private:
  std::ifstream in_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w(path);
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(ckpt.config_text);
  w.u64(ckpt.steps_done);
  w.u64(ckpt.epochs_done);
  w.u32(std::uint32_t(ckpt.params.all().size()));
  for (const Parameter& p : ckpt.params.all()) {
    w.str(p.name);
    w.u32(std::uint32_t(p.dims.size()));
    for (std::size_t d : p.dims) w.u64(d);
    w.bytes(p.value.data(), p.value.size() * sizeof(double));
  }
  w.finish();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw FormatError("not a checkpoint file: " + path.string());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.config_text = r.str();
  ckpt.steps_done = r.u64();
  ckpt.epochs_done = r.u64();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    std::vector<std::size_t> dims(r.u32());
    std::size_t n = 1;
    for (auto& d : dims) {
      d = std::size_t(r.u64());
      n *= d;
    }
    std::vector<double> values(n);
    r.bytes(values.data(), n * sizeof(double));
    ckpt.params.add(std::move(name), std::move(dims), std::move(values));
  }
  return ckpt;
}

void copy_parameters(const ParameterStore& src, ParameterStore& dst) {
  for (Parameter& p : dst.all()) {
    const Parameter& s = src.at(p.name);
    require(s.dims == p.dims, "parameter shape mismatch for " + p.name);
    p.value = s.value;
  }
}

}  // namespace mrn
