#include "mrn/model.hpp"

#include "mrn/blocks.hpp"
#include "mrn/error.hpp"
#include "mrn/ops.hpp"
#include "mrn/projection.hpp"

namespace mrn {
namespace {

constexpr Extent kPointwise{1, 1, 1};
constexpr Extent kUpsample{3, 3, 3};

Extent gate_extent(const ExperimentConfig& c) { return {c.gate_kernel, c.gate_kernel, c.gate_kernel}; }

}  // namespace

std::size_t gru_parameter_count(const ExperimentConfig& c) {
  const std::size_t in = std::size_t(c.hidden + c.image_channels);
  const std::size_t taps = std::size_t(gate_extent(c).taps());
  return 3 * (taps * in * std::size_t(c.hidden) + std::size_t(c.hidden));
}

RefineOptions refine_options(const ExperimentConfig& c, const ForwardOptions& options) {
  RefineOptions r;
  r.iterations = c.iterations;
  r.cell = c.cell;
  r.candidate = c.candidate;
  r.tied = c.tied_weights;
  r.mask_update = c.mask_update;
  r.topk = c.topk;
  r.extent = gate_extent(c);
  r.mask_head.training = options.training;
  r.mask_head.dropout_rate = c.dropout;
  r.mask_head.rng = options.dropout_rng;
  return r;
}

Model build_model(const ExperimentConfig& config) {
  config.validate();
  Model m{config, {}};
  auto& p = m.params;
  std::mt19937_64 rng(derive_seed(config.seed, kInitStream, 0));
  const int f = config.hidden, ci = config.image_channels;
  add_conv_params(p, "coarse.lift", kPointwise, ci, f, rng);
  add_aic_block(p, "coarse.enc1", f, rng);
  add_channel_attention(p, "coarse.attention", f, config.attention_reduction, rng);
  add_aic_block(p, "coarse.enc2", f, rng);
  add_conv_params(p, "coarse.up1", kUpsample, f, f, rng);
  add_conv_params(p, "coarse.up2", kUpsample, f, f, rng);
  add_ssc_head(p, "ssc_head", f, config.classes + 1, rng);
  if (config.mrn) {
    add_aic_block(p, "context", ci, rng);
    const RefineOptions r = refine_options(config);
    add_gru_params(p, r.gru_prefix, f, ci, r.extent, rng);
    if (!config.tied_weights) {
      // Untied cells start as copies of the first so the two modes begin
      // from the same function.
      for (int t = 2; t <= config.iterations; ++t)
        for (const char* gate : {".z.w", ".z.b", ".r.w", ".r.b", ".h.w", ".h.b"}) {
          const Parameter& src = p.at(r.gru_prefix + gate);
          p.add(gru_prefix_for(r, t) + gate, src.dims, src.value);
        }
    }
    // Registered even for N = 1, where it goes unused, so the parameter
    // count does not depend on the iteration count.
    if (config.mask_update) add_mask_head(p, "mask_head", config.classes + 1, config.mask_channels, rng);
  }
  return m;
}

DenseVoxelTensor project_features(const SceneSample& scene, ProjectionKind kind) {
  switch (kind) {
    case ProjectionKind::Surface:
      return densify(surface_project(scene.features, scene.noisy_depth, scene.camera, scene.geometry));
    case ProjectionKind::Sight: return sight_project(scene.features, scene.camera, scene.geometry);
    case ProjectionKind::Dap:
      return distance_attention_project(scene.features, scene.noisy_depth, scene.camera, scene.geometry);
  }
  throw ContractViolation("unknown projection kind");
}

ForwardResult forward(Tape& tape, Model& model, const SceneSample& scene, const ForwardOptions& options) {
  const ExperimentConfig& c = model.config;
  auto& p = model.params;
  require(scene.grid().same_spatial(c.grid), "scene grid does not match the model");
  require(scene.features.channels == c.image_channels, "scene feature channels do not match the model");

  // Coarse stage at quarter resolution, decoded back to full resolution.
  const DenseVoxelTensor surface =
      densify(surface_project(scene.features, scene.noisy_depth, scene.camera, scene.geometry));
  // Sum rather than mean over each 4^3 block: surface voxels are sparse and
  // averaging would shrink their features by up to 64x.
  Var x = ad::scale(ad::avg_pool2(ad::avg_pool2(tape.constant(surface))), 64.0);
  x = conv_layer(tape, p, "coarse.lift", x, kPointwise, c.hidden);
  x = aic_block(tape, p, "coarse.enc1", x);
  x = channel_attention(tape, p, "coarse.attention", x);
  x = aic_block(tape, p, "coarse.enc2", x);
  x = ad::relu(deconv_layer(tape, p, "coarse.up1", x, kUpsample, c.hidden));
  const Var h0 = deconv_layer(tape, p, "coarse.up2", x, kUpsample, c.hidden);
  const Var y0 = ssc_head(tape, p, "ssc_head", h0);

  ForwardResult out;
  out.coarse_features = h0;
  if (!c.mrn) {
    out.logits = {y0};
    return out;
  }
  const DenseVoxelTensor projected =
      c.projection == ProjectionKind::Surface ? surface : project_features(scene, c.projection);
  const Var context = dap_context(tape, p, "context", tape.constant(projected));
  const VoxelMask m0 = c.mask_init ? init_mask(occupancy_score(y0.dense()), c.mask_threshold)
                                   : VoxelMask(c.grid, 1);
  RefineResult r = refine(tape, p, h0, y0, m0, context, refine_options(c, options));
  out.logits = std::move(r.logits);
  out.occupancy = std::move(r.occupancy);
  out.masks = std::move(r.masks);
  return out;
}

}  // namespace mrn
