#pragma once

#include <cstdint>
#include <span>

#include "mrn/kernel_map.hpp"

// Gather-form convolution kernels driven by a KernelMap. Weights are laid
// out [tap][in][out]. Every reduction runs in a fixed order, so results do
// not depend on the thread count.
namespace mrn::kernels {

// out[j] = bias + sum_a W[a]^T in[gather[j][a]]  (OpenMP over output rows)
void conv_forward(std::span<const double> in, std::span<const double> weights, std::span<const double> bias,
                  const KernelMap& map, int c_in, int c_out, std::span<double> out);

// grad_in[i] += sum_a W[a] grad_out[scatter[i][a]]
void conv_backward_input(std::span<const double> grad_out, std::span<const double> weights, const KernelMap& map,
                         int c_in, int c_out, std::span<double> grad_in);

// grad_w[a] += sum_j in[gather[j][a]] grad_out[j]^T ; grad_b += sum_j grad_out[j]
void conv_backward_params(std::span<const double> in, std::span<const double> grad_out, const KernelMap& map,
                          int c_in, int c_out, std::span<double> grad_w, std::span<double> grad_b);

// Multiply-accumulates performed by conv_forward since the last reset.
std::uint64_t executed_macs();
void reset_executed_macs();

namespace serial {

// Single-threaded reference for conv_forward.
void conv_forward(std::span<const double> in, std::span<const double> weights, std::span<const double> bias,
                  const KernelMap& map, int c_in, int c_out, std::span<double> out);

}  // namespace serial
}  // namespace mrn::kernels
