#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mrn/autodiff.hpp"

namespace mrn {

// Binary checkpoint container; layout is documented in docs/file_formats.md.
inline constexpr char kCheckpointMagic[8] = {'M', 'R', 'N', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string config_text;      // flat key = value config the model was built from
  std::uint64_t steps_done = 0;  // optimizer steps applied so far
  std::uint64_t epochs_done = 0;
  ParameterStore params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Overwrites values of `dst` parameters from same-named entries of `src`;
// every parameter in `dst` must exist in `src` with identical dims.
void copy_parameters(const ParameterStore& src, ParameterStore& dst);

}  // namespace mrn
