#pragma once

#include <string>
#include <vector>

#include "mrn/scene.hpp"

namespace mrn {

enum class PerturbKind { None, Dark, Bright, Motion, Fog };
enum class PerturbLevel { Weak, Strong };

PerturbKind parse_perturb_kind(const std::string& s);
PerturbLevel parse_perturb_level(const std::string& s);
std::string to_string(PerturbKind k);
std::string to_string(PerturbLevel l);

// Multiplies every feature by `factor`.
SceneSample scale_intensity(const SceneSample& s, double factor);
// Circular box blur of odd `width` along image x, so each row keeps its mean.
SceneSample motion_blur(const SceneSample& s, int width);
// f e^(-beta d) + 0.5 (1 - e^(-beta d)) with the true range d; pixels
// without depth become the fog constant.
SceneSample fog(const SceneSample& s, double beta);

// Dark 0.5 / 0.2, bright 1.5 / 2.5, motion width 3 / 7, fog beta 0.3 / 1.0
// (weak / strong). Only the image features change.
SceneSample perturb(const SceneSample& s, PerturbKind kind, PerturbLevel level);

}  // namespace mrn
