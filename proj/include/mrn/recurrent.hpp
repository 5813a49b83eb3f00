#pragma once

#include <random>
#include <string>
#include <vector>

#include "mrn/autodiff.hpp"
#include "mrn/conv.hpp"
#include "mrn/mask.hpp"

namespace mrn {

/// Gate and candidate kernels of one recurrent cell, each reading the
/// channel concatenation [h; x] and writing `hidden` channels.
struct MSGRUParams {
  ConvKernel3D update;     // z
  ConvKernel3D reset;      // r
  ConvKernel3D candidate;  // h'

  static MSGRUParams random(int hidden, int input, Extent extent, std::mt19937_64& rng, double scale = 1.0);
  int hidden() const { return update.out_channels; }
  int input() const { return update.in_channels - update.out_channels; }
};

/// Tape handles to a cell's weights.
struct GruWeights {
  Var update_w, update_b;
  Var reset_w, reset_b;
  Var candidate_w, candidate_b;
  Extent extent;
};

// `<prefix>.{z,r,h}.{w,b}`; Glorot kernels, gate biases at -1, candidate bias 0.
void add_gru_params(ParameterStore& store, const std::string& prefix, int hidden, int input, Extent extent,
                    std::mt19937_64& rng);
GruWeights gru_weights(Tape& tape, ParameterStore& store, const std::string& prefix, Extent extent);
// Constant (non-trainable) handles, for value-level evaluation.
GruWeights gru_weights(Tape& tape, const MSGRUParams& p);
// As constants when `trainable` is false, else as gradient-receiving leaves.
GruWeights gru_weights(Tape& tape, const MSGRUParams& p, bool trainable);

enum class CandidateConv { Sparse, Submanifold };

// Masked sparse step. Gates are submanifold convolutions on the mask set S;
// the candidate reads [r * h; x] on S and is a sparse convolution (active
// set = S dilated by the kernel) or, for the ablation, a submanifold one.
// Outside S the previous state is passed through unchanged.
Var msgru_step(const Var& h_prev, const Var& x, const VoxelMask& mask, const GruWeights& w,
               CandidateConv candidate = CandidateConv::Sparse);

// Ordinary convolutional GRU on the whole grid with zero-padded convolutions.
Var dense_gru_step(const Var& h_prev, const Var& x, const GruWeights& w);

DenseVoxelTensor msgru_step(const DenseVoxelTensor& h_prev, const DenseVoxelTensor& x, const VoxelMask& mask,
                            const MSGRUParams& params, CandidateConv candidate = CandidateConv::Sparse);
DenseVoxelTensor dense_gru_step(const DenseVoxelTensor& h_prev, const DenseVoxelTensor& x,
                                const MSGRUParams& params);

enum class CellKind { Gru, MsGru };

struct RefineOptions {
  int iterations = 2;
  CellKind cell = CellKind::MsGru;
  CandidateConv candidate = CandidateConv::Sparse;
  bool tied = true;
  bool mask_update = true;
  int topk = 5;
  Extent extent;
  std::string gru_prefix = "gru";
  std::string head_prefix = "ssc_head";
  std::string mask_head_prefix = "mask_head";
  MaskHeadOptions mask_head;
};

struct RefineResult {
  std::vector<Var> hidden;       // h_1 .. h_N
  std::vector<Var> logits;       // y_0 .. y_N
  std::vector<Var> occupancy;    // occupied-probability fields m_1 .. m_{N-1}
  std::vector<VoxelMask> masks;  // binary masks used by steps 1 .. N
};

// Parameter prefix of the cell used at iteration `t` (1-based).
std::string gru_prefix_for(const RefineOptions& options, int t);

// Runs N recurrent steps from the coarse state: each step updates h, decodes
// y_t with the shared head, and (for t < N, when enabled) predicts the next
// mask from y_t and applies the top-K update.
RefineResult refine(Tape& tape, ParameterStore& store, const Var& h0, const Var& logits0, const VoxelMask& m0,
                    const Var& context, const RefineOptions& options);

}  // namespace mrn
