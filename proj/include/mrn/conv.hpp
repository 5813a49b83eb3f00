#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mrn/kernel_map.hpp"
#include "mrn/tensor.hpp"

namespace mrn {

/// Centered 3D convolution kernel, weights laid out [tap][in][out].
struct ConvKernel3D {
  Extent extent;
  int in_channels = 1;
  int out_channels = 1;
  std::vector<double> weights;
  std::vector<double> bias;

  static ConvKernel3D zeros(Extent extent, int in_channels, int out_channels);
  static ConvKernel3D random(Extent extent, int in_channels, int out_channels, std::mt19937_64& rng,
                             double scale = 1.0);

  double& weight(int tap, int in, int out) {
    return weights[(std::size_t(tap) * in_channels + in) * out_channels + out];
  }
  double weight(int tap, int in, int out) const {
    return weights[(std::size_t(tap) * in_channels + in) * out_channels + out];
  }
  bool valid() const;
};

// Output active set equals the input active set.
SparseVoxelTensor submanifold_conv3d(const SparseVoxelTensor& x, const ConvKernel3D& k);

// Output active set is the clipped union of kernel neighbourhoods.
SparseVoxelTensor sparse_conv3d(const SparseVoxelTensor& x, const ConvKernel3D& k);

// Stride-1, zero-padded, shape-preserving dense convolution.
DenseVoxelTensor conv3d(const DenseVoxelTensor& x, const ConvKernel3D& k);

// Stride-2 transposed convolution; every spatial extent doubles.
DenseVoxelTensor deconv3d_up2(const DenseVoxelTensor& x, const ConvKernel3D& k);

enum class ConvKind { Dense, Submanifold, Sparse, DeconvUp2 };

struct ConvOpDesc {
  ConvKind kind = ConvKind::Dense;
  Extent extent;
  int in_channels = 1;
  int out_channels = 1;
  GridShape grid;  // spatial extent of the input
  // Dense only: count the zero-padding taps at the borders, giving the
  // closed form x*y*z*kx*ky*kz*in*out.
  bool count_padding = true;
};

// Analytic multiply-accumulate count. Sparse kinds need the input active set.
std::uint64_t count_macs(const ConvOpDesc& op, const ActiveSet* input = nullptr);

}  // namespace mrn
