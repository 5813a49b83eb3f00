#include "mrn/blocks.hpp"

#include <cmath>

#include "mrn/error.hpp"
#include "mrn/ops.hpp"

namespace mrn {
namespace {

constexpr Extent kAxisExtents[3] = {{3, 1, 1}, {1, 3, 1}, {1, 1, 3}};
constexpr Extent kPointwise{1, 1, 1};

std::string sub(const std::string& prefix, const std::string& leaf) { return prefix + "." + leaf; }

int conv_out_channels(const ParameterStore& store, const std::string& name) {
  return int(store.at(name + ".b").size());
}

}  // namespace

std::vector<double> glorot_uniform(std::size_t n, double fan_in, double fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

void add_conv_params(ParameterStore& store, const std::string& name, Extent extent, int in, int out,
                     std::mt19937_64& rng, double bias_init) {
  const std::size_t taps = std::size_t(extent.taps());
  store.add(name + ".w", {taps, std::size_t(in), std::size_t(out)},
            glorot_uniform(taps * in * out, double(taps * in), double(taps * out), rng));
  store.add(name + ".b", {std::size_t(out)}, std::vector<double>(out, bias_init));
}

Var conv_layer(Tape& tape, ParameterStore& store, const std::string& name, const Var& x, Extent extent, int out) {
  return ad::conv3d(x, tape.param(store, name + ".w"), tape.param(store, name + ".b"), extent, out);
}

Var deconv_layer(Tape& tape, ParameterStore& store, const std::string& name, const Var& x, Extent extent, int out) {
  return ad::deconv_up2(x, tape.param(store, name + ".w"), tape.param(store, name + ".b"), extent, out);
}

void add_aic_module(ParameterStore& store, const std::string& prefix, int channels, std::mt19937_64& rng) {
  for (int axis = 0; axis < 3; ++axis)
    add_conv_params(store, sub(prefix, "axis" + std::to_string(axis)), kAxisExtents[axis], channels, channels, rng);
  // Zero logits: the three directions start equally weighted.
  store.add(sub(prefix, "mod"), {3, std::size_t(channels)});
  add_conv_params(store, sub(prefix, "pw"), kPointwise, channels, channels, rng);
}

Var aic_module(Tape& tape, ParameterStore& store, const std::string& prefix, const Var& x) {
  const int c = x.layout.channels();
  require(conv_out_channels(store, sub(prefix, "pw")) == c, "aic_module: channel count does not match parameters");
  const Var mod = ad::softmax_groups(tape.param(store, sub(prefix, "mod")), 3);
  Var mixed;
  for (int axis = 0; axis < 3; ++axis) {
    const Var branch = conv_layer(tape, store, sub(prefix, "axis" + std::to_string(axis)), x, kAxisExtents[axis], c);
    const Var gate = ad::slice(mod, std::size_t(axis) * c, std::size_t(c));
    const Var scaled = ad::channel_scale(branch, gate);
    mixed = axis == 0 ? scaled : ad::add(mixed, scaled);
  }
  const Var pw = conv_layer(tape, store, sub(prefix, "pw"), ad::relu(mixed), kPointwise, c);
  return ad::add(x, pw);
}

void add_aic_block(ParameterStore& store, const std::string& prefix, int channels, std::mt19937_64& rng) {
  for (int m = 0; m < kAicModulesPerBlock; ++m) add_aic_module(store, sub(prefix, "m" + std::to_string(m)), channels, rng);
}

Var aic_block(Tape& tape, ParameterStore& store, const std::string& prefix, const Var& x) {
  Var h = x;
  for (int m = 0; m < kAicModulesPerBlock; ++m) h = aic_module(tape, store, sub(prefix, "m" + std::to_string(m)), h);
  return h;
}

void add_channel_attention(ParameterStore& store, const std::string& prefix, int channels, int reduction,
                           std::mt19937_64& rng) {
  require(reduction >= 1, "channel attention reduction must be >= 1");
  const int hidden = std::max(1, channels / reduction);
  store.add(sub(prefix, "fc1.w"), {std::size_t(channels), std::size_t(hidden)},
            glorot_uniform(std::size_t(channels) * hidden, channels, hidden, rng));
  store.add(sub(prefix, "fc1.b"), {std::size_t(hidden)});
  store.add(sub(prefix, "fc2.w"), {std::size_t(hidden), std::size_t(channels)},
            glorot_uniform(std::size_t(channels) * hidden, hidden, channels, rng));
  store.add(sub(prefix, "fc2.b"), {std::size_t(channels)});
}

Var channel_attention_gate(Tape& tape, ParameterStore& store, const std::string& prefix, const Var& x) {
  const int c = x.layout.channels();
  const int hidden = int(store.at(sub(prefix, "fc1.b")).size());
  require(int(store.at(sub(prefix, "fc2.b")).size()) == c, "channel_attention: channel count does not match parameters");
  const Var pooled = ad::global_avg_pool(x);
  const Var squeezed = ad::relu(
      ad::linear(pooled, tape.param(store, sub(prefix, "fc1.w")), tape.param(store, sub(prefix, "fc1.b")), hidden));
  return ad::sigmoid(
      ad::linear(squeezed, tape.param(store, sub(prefix, "fc2.w")), tape.param(store, sub(prefix, "fc2.b")), c));
}

Var channel_attention(Tape& tape, ParameterStore& store, const std::string& prefix, const Var& x) {
  return ad::channel_scale(x, channel_attention_gate(tape, store, prefix, x));
}

void add_ssc_head(ParameterStore& store, const std::string& prefix, int in, int classes, std::mt19937_64& rng) {
  add_conv_params(store, prefix, kPointwise, in, classes, rng);
}

Var ssc_head(Tape& tape, ParameterStore& store, const std::string& prefix, const Var& x) {
  return conv_layer(tape, store, prefix, x, kPointwise, conv_out_channels(store, prefix));
}

DenseVoxelTensor aic_block(const DenseVoxelTensor& x, ParameterStore& store, const std::string& prefix) {
  Tape tape;
  return aic_block(tape, store, prefix, tape.constant(x)).dense();
}

DenseVoxelTensor channel_attention(const DenseVoxelTensor& x, ParameterStore& store, const std::string& prefix) {
  Tape tape;
  return channel_attention(tape, store, prefix, tape.constant(x)).dense();
}

DenseVoxelTensor ssc_head(const DenseVoxelTensor& x, ParameterStore& store, const std::string& prefix) {
  Tape tape;
  return ssc_head(tape, store, prefix, tape.constant(x)).dense();
}

}  // namespace mrn
