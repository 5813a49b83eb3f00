#include "mrn/recurrent.hpp"

#include "mrn/blocks.hpp"
#include "mrn/error.hpp"
#include "mrn/ops.hpp"

namespace mrn {
namespace {

ConvKernel3D glorot_kernel(Extent extent, int in, int out, std::mt19937_64& rng, double scale, double bias) {
  ConvKernel3D k = ConvKernel3D::zeros(extent, in, out);
  k.weights = glorot_uniform(k.weights.size(), double(extent.taps()) * in, double(extent.taps()) * out, rng);
  for (double& w : k.weights) w *= scale;
  for (double& b : k.bias) b = bias;
  return k;
}

Var as_var(Tape& tape, const std::vector<double>& v, bool trainable) {
  return trainable ? tape.variable(Layout::flat(v.size()), v) : tape.constant(Layout::flat(v.size()), v);
}

void check_step_inputs(const Var& h_prev, const Var& x, const GruWeights& w) {
  require(h_prev.layout.kind == Layout::Kind::Dense && x.layout.kind == Layout::Kind::Dense,
          "recurrent step expects dense state and input");
  require(h_prev.layout.shape.same_spatial(x.layout.shape), "state and input grids differ");
  const std::size_t c = std::size_t(h_prev.layout.channels());
  const std::size_t in = c + std::size_t(x.layout.channels());
  const std::size_t taps = std::size_t(w.extent.taps());
  require(w.update_w.layout.size() == taps * in * c && w.reset_w.layout.size() == taps * in * c &&
              w.candidate_w.layout.size() == taps * in * c,
          "recurrent kernel does not match [h; x] channels");
}

}  // namespace

MSGRUParams MSGRUParams::random(int hidden, int input, Extent extent, std::mt19937_64& rng, double scale) {
  const int in = hidden + input;
  MSGRUParams p;
  p.update = glorot_kernel(extent, in, hidden, rng, scale, 0.0);
  p.reset = glorot_kernel(extent, in, hidden, rng, scale, 0.0);
  p.candidate = glorot_kernel(extent, in, hidden, rng, scale, 0.0);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto* k : {&p.update, &p.reset, &p.candidate})
    for (double& b : k->bias) b = u(rng);
  return p;
}

void add_gru_params(ParameterStore& store, const std::string& prefix, int hidden, int input, Extent extent,
                    std::mt19937_64& rng) {
  add_conv_params(store, prefix + ".z", extent, hidden + input, hidden, rng, -1.0);
  add_conv_params(store, prefix + ".r", extent, hidden + input, hidden, rng, -1.0);
  add_conv_params(store, prefix + ".h", extent, hidden + input, hidden, rng, 0.0);
}

GruWeights gru_weights(Tape& tape, ParameterStore& store, const std::string& prefix, Extent extent) {
  return {tape.param(store, prefix + ".z.w"), tape.param(store, prefix + ".z.b"),
          tape.param(store, prefix + ".r.w"), tape.param(store, prefix + ".r.b"),
          tape.param(store, prefix + ".h.w"), tape.param(store, prefix + ".h.b"),
          extent};
}

GruWeights gru_weights(Tape& tape, const MSGRUParams& p, bool trainable) {
  require(p.update.extent == p.reset.extent && p.update.extent == p.candidate.extent,
          "recurrent kernels must share one extent");
  return {as_var(tape, p.update.weights, trainable),    as_var(tape, p.update.bias, trainable),
          as_var(tape, p.reset.weights, trainable),     as_var(tape, p.reset.bias, trainable),
          as_var(tape, p.candidate.weights, trainable), as_var(tape, p.candidate.bias, trainable),
          p.update.extent};
}

GruWeights gru_weights(Tape& tape, const MSGRUParams& p) { return gru_weights(tape, p, false); }

Var msgru_step(const Var& h_prev, const Var& x, const VoxelMask& mask, const GruWeights& w,
               CandidateConv candidate) {
  check_step_inputs(h_prev, x, w);
  require(mask.shape.same_spatial(h_prev.layout.shape), "mask grid differs from state grid");
  require(mask.binary(), "mask must be binary");
  const auto active = mask.active_set();
  if (active->empty()) return h_prev;

  const int c = h_prev.layout.channels();
  const Var h_s = ad::gather(h_prev, active);
  const Var x_s = ad::gather(x, active);
  const Var hx = ad::concat_channels(h_s, x_s);
  const auto map = std::make_shared<const KernelMap>(submanifold_map(*active, w.extent));
  const Var z = ad::sigmoid(ad::submanifold_conv(hx, w.update_w, w.update_b, w.extent, c, map));
  const Var r = ad::sigmoid(ad::submanifold_conv(hx, w.reset_w, w.reset_b, w.extent, c, map));
  const Var rhx = ad::concat_channels(ad::mul(r, h_s), x_s);
  const Var pre = candidate == CandidateConv::Sparse
                      ? ad::sparse_conv(rhx, w.candidate_w, w.candidate_b, w.extent, c)
                      : ad::submanifold_conv(rhx, w.candidate_w, w.candidate_b, w.extent, c, map);
  return ad::gru_blend(h_prev, z, ad::tanh(pre));
}

Var dense_gru_step(const Var& h_prev, const Var& x, const GruWeights& w) {
  check_step_inputs(h_prev, x, w);
  const int c = h_prev.layout.channels();
  const Var hx = ad::concat_channels(h_prev, x);
  const Var z = ad::sigmoid(ad::conv3d(hx, w.update_w, w.update_b, w.extent, c));
  const Var r = ad::sigmoid(ad::conv3d(hx, w.reset_w, w.reset_b, w.extent, c));
  const Var hc = ad::tanh(ad::conv3d(ad::concat_channels(ad::mul(r, h_prev), x), w.candidate_w, w.candidate_b,
                                     w.extent, c));
  return ad::add(h_prev, ad::mul(z, ad::sub(hc, h_prev)));
}

DenseVoxelTensor msgru_step(const DenseVoxelTensor& h_prev, const DenseVoxelTensor& x, const VoxelMask& mask,
                            const MSGRUParams& params, CandidateConv candidate) {
  Tape tape;
  return msgru_step(tape.constant(h_prev), tape.constant(x), mask, gru_weights(tape, params), candidate).dense();
}

DenseVoxelTensor dense_gru_step(const DenseVoxelTensor& h_prev, const DenseVoxelTensor& x,
                                const MSGRUParams& params) {
  Tape tape;
  return dense_gru_step(tape.constant(h_prev), tape.constant(x), gru_weights(tape, params)).dense();
}

std::string gru_prefix_for(const RefineOptions& options, int t) {
  return options.tied || t == 1 ? options.gru_prefix : options.gru_prefix + ".t" + std::to_string(t);
}

RefineResult refine(Tape& tape, ParameterStore& store, const Var& h0, const Var& logits0, const VoxelMask& m0,
                    const Var& context, const RefineOptions& options) {
  require(options.iterations >= 1, "refinement needs at least one iteration");
  require(options.topk >= 0, "K must be non-negative");
  RefineResult out;
  out.logits.push_back(logits0);
  Var h = h0;
  VoxelMask mask = m0;
  for (int t = 1; t <= options.iterations; ++t) {
    out.masks.push_back(mask);
    const GruWeights w = gru_weights(tape, store, gru_prefix_for(options, t), options.extent);
    h = options.cell == CellKind::MsGru ? msgru_step(h, context, mask, w, options.candidate)
                                        : dense_gru_step(h, context, w);
    const Var logits = ssc_head(tape, store, options.head_prefix, h);
    out.hidden.push_back(h);
    out.logits.push_back(logits);
    if (t < options.iterations && options.mask_update) {
      const Var probs = mask_head(tape, store, options.mask_head_prefix, logits, options.mask_head);
      const Var occupied = ad::select_channel(probs, 0);
      const Var empty = ad::select_channel(probs, 1);
      out.occupancy.push_back(occupied);
      mask = apply_topk_update(mask, occupied.value(), empty.value(), options.topk);
    }
  }
  return out;
}

}  // namespace mrn
