#include "mrn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mrn/error.hpp"

namespace mrn {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw FormatError("bad value for " + key + ": " + v);
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw FormatError("bad boolean for " + key + ": " + v);
}

template <class E>
E parse_enum(const std::string& key, const std::string& v, std::initializer_list<std::pair<const char*, E>> names) {
  for (const auto& [name, e] : names)
    if (v == name) return e;
  throw FormatError("bad value for " + key + ": " + v);
}

std::string format_double(double d) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, ptr);
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Field number_field(T ExperimentConfig::* m) {
  return {[m](ExperimentConfig& c, const std::string& v) { c.*m = parse_number<T>("", v); },
          [m](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*m);
            else return std::to_string(c.*m);
          }};
}

Field grid_field(int GridShape::* m) {
  return {[m](ExperimentConfig& c, const std::string& v) { c.grid.*m = parse_number<int>("", v); },
          [m](const ExperimentConfig& c) { return std::to_string(c.grid.*m); }};
}

Field bool_field(bool ExperimentConfig::* m) {
  return {[m](ExperimentConfig& c, const std::string& v) { c.*m = parse_bool("", v); },
          [m](const ExperimentConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}

const std::map<std::string, Field>& fields() {
  using C = ExperimentConfig;
  static const std::map<std::string, Field> table = {
      {"grid_x", grid_field(&GridShape::x)},
      {"grid_y", grid_field(&GridShape::y)},
      {"grid_z", grid_field(&GridShape::z)},
      {"voxel_size", number_field(&C::voxel_size)},
      {"image_width", number_field(&C::image_width)},
      {"image_height", number_field(&C::image_height)},
      {"hfov_degrees", number_field(&C::hfov_degrees)},
      {"depth_rms", number_field(&C::depth_rms)},
      {"feature_noise", number_field(&C::feature_noise)},
      {"boxes", number_field(&C::boxes)},
      {"wall", bool_field(&C::wall)},
      {"train_scenes", number_field(&C::train_scenes)},
      {"eval_scenes", number_field(&C::eval_scenes)},
      {"classes", number_field(&C::classes)},
      {"image_channels", number_field(&C::image_channels)},
      {"hidden", number_field(&C::hidden)},
      {"iterations", number_field(&C::iterations)},
      {"gate_kernel", number_field(&C::gate_kernel)},
      {"attention_reduction", number_field(&C::attention_reduction)},
      {"mask_channels", number_field(&C::mask_channels)},
      {"dropout", number_field(&C::dropout)},
      {"mask_threshold", number_field(&C::mask_threshold)},
      {"topk", number_field(&C::topk)},
      {"gamma_mssc", number_field(&C::gamma_mssc)},
      {"gamma_mask", number_field(&C::gamma_mask)},
      {"balanced_bce", bool_field(&C::balanced_bce)},
      {"lr", number_field(&C::lr)},
      {"poly_power", number_field(&C::poly_power)},
      {"grad_clip", number_field(&C::grad_clip)},
      {"epochs", number_field(&C::epochs)},
      {"seed", number_field(&C::seed)},
      {"mrn", bool_field(&C::mrn)},
      {"mask_update", bool_field(&C::mask_update)},
      {"mask_init", bool_field(&C::mask_init)},
      {"mask_loss", bool_field(&C::mask_loss)},
      {"tied_weights", bool_field(&C::tied_weights)},
      {"projection",
       {[](C& c, const std::string& v) {
          c.projection = parse_enum<ProjectionKind>(
              "projection", v,
              {{"surface", ProjectionKind::Surface}, {"sight", ProjectionKind::Sight}, {"dap", ProjectionKind::Dap}});
        },
        [](const C& c) { return to_string(c.projection); }}},
      {"cell",
       {[](C& c, const std::string& v) {
          c.cell = parse_enum<CellKind>("cell", v, {{"gru", CellKind::Gru}, {"msgru", CellKind::MsGru}});
        },
        [](const C& c) { return to_string(c.cell); }}},
      {"candidate_conv",
       {[](C& c, const std::string& v) {
          c.candidate = parse_enum<CandidateConv>(
              "candidate_conv", v, {{"sparse", CandidateConv::Sparse}, {"submanifold", CandidateConv::Submanifold}});
        },
        [](const C& c) { return to_string(c.candidate); }}},
  };
  return table;
}

}  // namespace

std::string to_string(ProjectionKind kind) {
  switch (kind) {
    case ProjectionKind::Surface: return "surface";
    case ProjectionKind::Sight: return "sight";
    case ProjectionKind::Dap: return "dap";
  }
  return "?";
}

std::string to_string(CellKind kind) { return kind == CellKind::Gru ? "gru" : "msgru"; }

std::string to_string(CandidateConv kind) { return kind == CandidateConv::Sparse ? "sparse" : "submanifold"; }

void ExperimentConfig::validate() const {
  require(grid.x >= 4 && grid.y >= 4 && grid.z >= 4, "grid extents must be at least 4");
  require(grid.x % 4 == 0 && grid.y % 4 == 0 && grid.z % 4 == 0, "grid extents must be divisible by 4");
  require(voxel_size > 0.0, "voxel_size must be positive");
  require(image_width >= 1 && image_height >= 1, "image size must be positive");
  require(hfov_degrees > 0.0 && hfov_degrees < 180.0, "hfov_degrees must lie in (0, 180)");
  require(depth_rms >= 0.0 && feature_noise >= 0.0, "noise levels must be non-negative");
  require(boxes >= 0, "boxes must be non-negative");
  require(train_scenes >= 1 && eval_scenes >= 1, "scene counts must be positive");
  require(classes >= 5 && classes <= 254, "classes must lie in [5, 254]");
  require(image_channels >= 8, "image_channels must be at least 8");
  require(hidden >= 1 && mask_channels >= 1, "channel counts must be positive");
  require(iterations >= 1, "iterations must be at least 1");
  require(gate_kernel >= 1 && gate_kernel % 2 == 1, "gate_kernel must be odd");
  require(attention_reduction >= 1, "attention_reduction must be positive");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  require(mask_threshold > 0.0 && mask_threshold < 1.0, "mask_threshold must lie in (0, 1)");
  require(topk >= 0, "topk must be non-negative");
  require(gamma_mssc > 0.0 && gamma_mask > 0.0, "loss gammas must be positive");
  require(lr > 0.0 && poly_power >= 0.0 && grad_clip >= 0.0, "optimiser settings out of range");
  require(epochs >= 1, "epochs must be at least 1");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) throw FormatError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    try {
      it->second.set(c, value);
    } catch (const FormatError&) {
      throw FormatError("line " + std::to_string(line_no) + ": bad value for " + key + ": " + value);
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string to_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

}  // namespace mrn
