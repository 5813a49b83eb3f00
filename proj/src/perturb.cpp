#include "mrn/perturb.hpp"

#include <cmath>

#include "mrn/error.hpp"

namespace mrn {

namespace {
constexpr double kFogValue = 0.5;
}

PerturbKind parse_perturb_kind(const std::string& s) {
  if (s == "none") return PerturbKind::None;
  if (s == "dark") return PerturbKind::Dark;
  if (s == "bright") return PerturbKind::Bright;
  if (s == "motion") return PerturbKind::Motion;
  if (s == "fog") return PerturbKind::Fog;
  throw FormatError("unknown perturbation kind: " + s);
}

PerturbLevel parse_perturb_level(const std::string& s) {
  if (s == "weak") return PerturbLevel::Weak;
  if (s == "strong") return PerturbLevel::Strong;
  throw FormatError("unknown perturbation level: " + s);
}

std::string to_string(PerturbKind k) {
  switch (k) {
    case PerturbKind::None: return "none";
    case PerturbKind::Dark: return "dark";
    case PerturbKind::Bright: return "bright";
    case PerturbKind::Motion: return "motion";
    case PerturbKind::Fog: return "fog";
  }
  return "?";
}

std::string to_string(PerturbLevel l) { return l == PerturbLevel::Weak ? "weak" : "strong"; }

SceneSample scale_intensity(const SceneSample& s, double factor) {
  SceneSample out = s;
  for (double& v : out.features.values) v *= factor;
  return out;
}

SceneSample motion_blur(const SceneSample& s, int width) {
  require(width >= 1 && width % 2 == 1, "blur width must be odd and positive");
  SceneSample out = s;
  const FeatureImage& in = s.features;
  const int W = in.width, C = in.channels, half = width / 2;
  for (int py = 0; py < in.height; ++py)
    for (int px = 0; px < W; ++px) {
      double* dst = out.features.pixel(px, py);
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int k = -half; k <= half; ++k) acc += in.pixel(((px + k) % W + W) % W, py)[c];
        dst[c] = acc / width;
      }
    }
  return out;
}

SceneSample fog(const SceneSample& s, double beta) {
  require(beta >= 0.0, "fog density must be non-negative");
  SceneSample out = s;
  if (beta == 0.0) return out;
  const FeatureImage& in = s.features;
  for (int py = 0; py < in.height; ++py)
    for (int px = 0; px < in.width; ++px) {
      const std::size_t k = s.depth.index(px, py);
      const double t = s.depth.valid[k] ? std::exp(-beta * s.depth.depth[k]) : 0.0;
      double* f = out.features.pixel(px, py);
      for (int c = 0; c < in.channels; ++c) f[c] = f[c] * t + kFogValue * (1.0 - t);
    }
  return out;
}

SceneSample perturb(const SceneSample& s, PerturbKind kind, PerturbLevel level) {
  const bool weak = level == PerturbLevel::Weak;
  switch (kind) {
    case PerturbKind::None: return s;
    case PerturbKind::Dark: return scale_intensity(s, weak ? 0.5 : 0.2);
    case PerturbKind::Bright: return scale_intensity(s, weak ? 1.5 : 2.5);
    case PerturbKind::Motion: return motion_blur(s, weak ? 3 : 7);
    case PerturbKind::Fog: return fog(s, weak ? 0.3 : 1.0);
  }
  throw ContractViolation("unknown perturbation kind");
}

}  // namespace mrn
