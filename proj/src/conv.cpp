#include "mrn/conv.hpp"

#include <cmath>

#include "mrn/error.hpp"
#include "mrn/kernels.hpp"

namespace mrn {

ConvKernel3D ConvKernel3D::zeros(Extent extent, int in_channels, int out_channels) {
  ConvKernel3D k;
  k.extent = extent;
  k.in_channels = in_channels;
  k.out_channels = out_channels;
  k.weights.assign(std::size_t(extent.taps()) * in_channels * out_channels, 0.0);
  k.bias.assign(out_channels, 0.0);
  return k;
}

ConvKernel3D ConvKernel3D::random(Extent extent, int in_channels, int out_channels, std::mt19937_64& rng,
                                  double scale) {
  ConvKernel3D k = zeros(extent, in_channels, out_channels);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& w : k.weights) w = u(rng);
  for (double& b : k.bias) b = u(rng);
  return k;
}

bool ConvKernel3D::valid() const {
  if (!extent.odd() || in_channels < 1 || out_channels < 1) return false;
  if (weights.size() != std::size_t(extent.taps()) * in_channels * out_channels) return false;
  if (bias.size() != std::size_t(out_channels)) return false;
  for (double w : weights)
    if (!std::isfinite(w)) return false;
  for (double b : bias)
    if (!std::isfinite(b)) return false;
  return true;
}

namespace {

void check_kernel(const ConvKernel3D& k, int channels) {
  require(k.valid(), "invalid convolution kernel");
  require(k.in_channels == channels, "convolution channel mismatch: kernel expects " +
                                         std::to_string(k.in_channels) + ", input has " +
                                         std::to_string(channels));
}

}  // namespace

SparseVoxelTensor submanifold_conv3d(const SparseVoxelTensor& x, const ConvKernel3D& k) {
  check_kernel(k, x.channels());
  const KernelMap map = submanifold_map(x.active(), k.extent);
  SparseVoxelTensor out(x.active_ptr(), k.out_channels);
  kernels::conv_forward(x.features(), k.weights, k.bias, map, k.in_channels, k.out_channels, out.features());
  return out;
}

SparseVoxelTensor sparse_conv3d(const SparseVoxelTensor& x, const ConvKernel3D& k) {
  check_kernel(k, x.channels());
  SparseConvPlan plan = sparse_conv_plan(x.active(), k.extent);
  SparseVoxelTensor out(plan.output, k.out_channels);
  kernels::conv_forward(x.features(), k.weights, k.bias, plan.map, k.in_channels, k.out_channels, out.features());
  return out;
}

DenseVoxelTensor conv3d(const DenseVoxelTensor& x, const ConvKernel3D& k) {
  check_kernel(k, x.shape().channels);
  const KernelMap map = dense_map(x.shape(), k.extent);
  DenseVoxelTensor out(x.shape().with_channels(k.out_channels));
  kernels::conv_forward(x.values(), k.weights, k.bias, map, k.in_channels, k.out_channels, out.values());
  return out;
}

DenseVoxelTensor deconv3d_up2(const DenseVoxelTensor& x, const ConvKernel3D& k) {
  check_kernel(k, x.shape().channels);
  const GridShape& s = x.shape();
  const KernelMap map = deconv_up2_map(s, k.extent);
  DenseVoxelTensor out({s.x * 2, s.y * 2, s.z * 2, k.out_channels});
  kernels::conv_forward(x.values(), k.weights, k.bias, map, k.in_channels, k.out_channels, out.values());
  return out;
}

std::uint64_t count_macs(const ConvOpDesc& op, const ActiveSet* input) {
  const std::uint64_t per_pair = std::uint64_t(op.in_channels) * std::uint64_t(op.out_channels);
  switch (op.kind) {
    case ConvKind::Dense:
      if (op.count_padding) return std::uint64_t(op.grid.voxels()) * std::uint64_t(op.extent.taps()) * per_pair;
      return dense_map(op.grid, op.extent).pair_count() * per_pair;
    case ConvKind::DeconvUp2:
      return deconv_up2_map(op.grid, op.extent).pair_count() * per_pair;
    case ConvKind::Submanifold:
      require(input != nullptr, "count_macs: submanifold conv needs an input active set");
      return submanifold_map(*input, op.extent).pair_count() * per_pair;
    case ConvKind::Sparse:
      require(input != nullptr, "count_macs: sparse conv needs an input active set");
      return sparse_conv_plan(*input, op.extent).map.pair_count() * per_pair;
  }
  return 0;
}

}  // namespace mrn
