#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "mrn/autodiff.hpp"
#include "mrn/kernel_map.hpp"

// Differentiable operations recorded on a Tape. Elementwise ops require
// compatible layouts; conv ops take weights [tap][in][out] and a bias as
// flat parameter nodes.
namespace mrn::ad {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);

// Channel concatenation [a; b] over identical spatial layouts.
Var concat_channels(const Var& a, const Var& b);

// Rows of a dense node at `active` (a masked sparsify); gradient scatters back.
Var gather(const Var& dense, std::shared_ptr<const ActiveSet> active);
// Sparse node to dense grid, zeros outside the active set.
Var scatter(const Var& sparse);

// Generic table convolution; `out_layout` must have map->n_out rows.
Var conv(const Var& x, const Var& w, const Var& b, std::shared_ptr<const KernelMap> map, Layout out_layout);

Var conv3d(const Var& x, const Var& w, const Var& b, Extent extent, int c_out);
// `map` may be passed to share one kernel map between several convolutions.
Var submanifold_conv(const Var& x, const Var& w, const Var& b, Extent extent, int c_out,
                     std::shared_ptr<const KernelMap> map = nullptr);
Var sparse_conv(const Var& x, const Var& w, const Var& b, Extent extent, int c_out);
Var deconv_up2(const Var& x, const Var& w, const Var& b, Extent extent, int c_out);

// 2x2x2 average pooling with stride 2; extents must be even.
Var avg_pool2(const Var& x);
// Nearest-neighbour 2x upsampling.
Var upsample_nearest2(const Var& x);

// Spatial mean per channel of a dense node -> flat [C].
Var global_avg_pool(const Var& x);
// x[v, c] * gate[c]
Var channel_scale(const Var& x, const Var& gate);
// y = W^T v + b with W laid out [in][out].
Var linear(const Var& v, const Var& w, const Var& b, int out);
// Flat [groups * C] -> softmax across the groups independently per c.
Var softmax_groups(const Var& a, int groups);
// Softmax across channels of every row.
Var channel_softmax(const Var& a);
Var select_channel(const Var& a, int channel);
// Contiguous sub-range of a flat node.
Var slice(const Var& a, std::size_t offset, std::size_t length);
// Multiplies by a fixed per-element scale (dropout keep mask already scaled).
Var apply_scale_mask(const Var& a, std::vector<double> scale);

// Recurrent update restricted to the support of `z`:
// out = h_prev outside z's active set, (1 - z) h_prev + z hc on it.
// `hc`'s active set must contain z's.
Var gru_blend(const Var& h_prev, const Var& z, const Var& hc);

// Mean of -log softmax(logits)[label] over voxels whose label != ignore.
Var cross_entropy(const Var& logits, std::span<const std::uint8_t> labels, std::uint8_t ignore = 255);

// Binary cross entropy of a one-channel probability field against `target`
// (0/1), over voxels with valid != 0. With `balanced`, positive and negative
// terms are scaled by the inverse frequency of their class (n / 2 n_class),
// falling back to plain BCE when only one class is present.
Var weighted_bce(const Var& prob, std::span<const std::uint8_t> target, std::span<const std::uint8_t> valid,
                 bool balanced = true);

}  // namespace mrn::ad
