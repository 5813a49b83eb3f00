#pragma once

#include <random>
#include <string>

#include "mrn/autodiff.hpp"
#include "mrn/kernel_map.hpp"

// Parameterised building blocks of the coarse network. Each block has an
// `add_*` function that registers its parameters under a name prefix and a
// forward function that records it on a tape.
namespace mrn {

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
std::vector<double> glorot_uniform(std::size_t n, double fan_in, double fan_out, std::mt19937_64& rng);

// `<name>.w` [taps][in][out] Glorot, `<name>.b` [out] = bias_init.
void add_conv_params(ParameterStore& store, const std::string& name, Extent extent, int in, int out,
                     std::mt19937_64& rng, double bias_init = 0.0);
Var conv_layer(Tape& tape, ParameterStore& store, const std::string& name, const Var& x, Extent extent, int out);
Var deconv_layer(Tape& tape, ParameterStore& store, const std::string& name, const Var& x, Extent extent, int out);

// Simplified anisotropic unit: three 1D convolutions along x, y and z mixed
// per channel by a softmax-normalised modulation, then ReLU, a pointwise
// convolution and a residual add. Shape preserving.
void add_aic_module(ParameterStore& store, const std::string& prefix, int channels, std::mt19937_64& rng);
Var aic_module(Tape& tape, ParameterStore& store, const std::string& prefix, const Var& x);

inline constexpr int kAicModulesPerBlock = 4;
void add_aic_block(ParameterStore& store, const std::string& prefix, int channels, std::mt19937_64& rng);
Var aic_block(Tape& tape, ParameterStore& store, const std::string& prefix, const Var& x);

// Squeeze-and-excitation style gate: GAP -> FC -> ReLU -> FC -> sigmoid,
// then per-channel scaling of the input.
void add_channel_attention(ParameterStore& store, const std::string& prefix, int channels, int reduction,
                           std::mt19937_64& rng);
Var channel_attention(Tape& tape, ParameterStore& store, const std::string& prefix, const Var& x);
// The per-channel gate alone, in (0, 1).
Var channel_attention_gate(Tape& tape, ParameterStore& store, const std::string& prefix, const Var& x);

// Pointwise projection to per-voxel class logits (class 0 = empty).
void add_ssc_head(ParameterStore& store, const std::string& prefix, int in, int classes, std::mt19937_64& rng);
Var ssc_head(Tape& tape, ParameterStore& store, const std::string& prefix, const Var& x);

// Value-level wrappers for one-off evaluation outside a training graph.
DenseVoxelTensor aic_block(const DenseVoxelTensor& x, ParameterStore& store, const std::string& prefix);
DenseVoxelTensor channel_attention(const DenseVoxelTensor& x, ParameterStore& store, const std::string& prefix);
DenseVoxelTensor ssc_head(const DenseVoxelTensor& x, ParameterStore& store, const std::string& prefix);

}  // namespace mrn
