#include "mrn/kernels.hpp"

#include <atomic>

#include "mrn/error.hpp"

namespace mrn::kernels {
namespace {

std::atomic<std::uint64_t> g_macs{0};

void check_sizes(std::size_t in, std::size_t w, std::size_t b, const KernelMap& map, int c_in, int c_out,
                 std::size_t out) {
  require(in == map.n_in * c_in, "conv: input size does not match kernel map");
  require(w == std::size_t(map.taps) * c_in * c_out, "conv: weight size does not match kernel map");
  require(b == std::size_t(c_out), "conv: bias size mismatch");
  require(out == map.n_out * c_out, "conv: output size does not match kernel map");
}

// Returns the number of contributing taps for output row j.
inline std::uint64_t forward_row(std::size_t j, const double* in, const double* w, const double* b,
                                 const KernelMap& map, int c_in, int c_out, double* out) {
  double* acc = out + j * c_out;
  for (int o = 0; o < c_out; ++o) acc[o] = b[o];
  std::uint64_t hits = 0;
  const std::int32_t* row = map.gather.data() + j * map.taps;
  for (int a = 0; a < map.taps; ++a) {
    const std::int32_t i = row[a];
    if (i < 0) continue;
    ++hits;
    const double* x = in + std::size_t(i) * c_in;
    const double* wa = w + std::size_t(a) * c_in * c_out;
    for (int ci = 0; ci < c_in; ++ci) {
      const double xv = x[ci];
      const double* wr = wa + std::size_t(ci) * c_out;
      for (int o = 0; o < c_out; ++o) acc[o] += xv * wr[o];
    }
  }
  return hits;
}

}  // namespace

void conv_forward(std::span<const double> in, std::span<const double> weights, std::span<const double> bias,
                  const KernelMap& map, int c_in, int c_out, std::span<double> out) {
  check_sizes(in.size(), weights.size(), bias.size(), map, c_in, c_out, out.size());
  const auto n_out = std::int64_t(map.n_out);
  std::uint64_t hits = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits)
  for (std::int64_t j = 0; j < n_out; ++j)
    hits += forward_row(std::size_t(j), in.data(), weights.data(), bias.data(), map, c_in, c_out, out.data());
  g_macs += hits * std::uint64_t(c_in) * std::uint64_t(c_out);
}

void conv_backward_input(std::span<const double> grad_out, std::span<const double> weights, const KernelMap& map,
                         int c_in, int c_out, std::span<double> grad_in) {
  require(grad_out.size() == map.n_out * c_out && grad_in.size() == map.n_in * c_in,
          "conv backward: gradient size mismatch");
  const auto n_in = std::int64_t(map.n_in);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n_in; ++i) {
    double* gi = grad_in.data() + std::size_t(i) * c_in;
    const std::int32_t* row = map.scatter.data() + std::size_t(i) * map.taps;
    for (int a = 0; a < map.taps; ++a) {
      const std::int32_t j = row[a];
      if (j < 0) continue;
      const double* g = grad_out.data() + std::size_t(j) * c_out;
      const double* wa = weights.data() + std::size_t(a) * c_in * c_out;
      for (int ci = 0; ci < c_in; ++ci) {
        const double* wr = wa + std::size_t(ci) * c_out;
        double s = 0.0;
        for (int o = 0; o < c_out; ++o) s += wr[o] * g[o];
        gi[ci] += s;
      }
    }
  }
}

void conv_backward_params(std::span<const double> in, std::span<const double> grad_out, const KernelMap& map,
                          int c_in, int c_out, std::span<double> grad_w, std::span<double> grad_b) {
  require(grad_w.size() == std::size_t(map.taps) * c_in * c_out && grad_b.size() == std::size_t(c_out),
          "conv backward: parameter gradient size mismatch");
  const int taps = map.taps;
#pragma omp parallel for schedule(static)
  for (int a = 0; a < taps; ++a) {
    double* gw = grad_w.data() + std::size_t(a) * c_in * c_out;
    for (std::size_t j = 0; j < map.n_out; ++j) {
      const std::int32_t i = map.gather[j * taps + a];
      if (i < 0) continue;
      const double* x = in.data() + std::size_t(i) * c_in;
      const double* g = grad_out.data() + j * c_out;
      for (int ci = 0; ci < c_in; ++ci) {
        const double xv = x[ci];
        double* gr = gw + std::size_t(ci) * c_out;
        for (int o = 0; o < c_out; ++o) gr[o] += xv * g[o];
      }
    }
  }
  for (std::size_t j = 0; j < map.n_out; ++j)
    for (int o = 0; o < c_out; ++o) grad_b[o] += grad_out[j * c_out + o];
}

std::uint64_t executed_macs() { return g_macs.load(); }
void reset_executed_macs() { g_macs = 0; }

namespace serial {

void conv_forward(std::span<const double> in, std::span<const double> weights, std::span<const double> bias,
                  const KernelMap& map, int c_in, int c_out, std::span<double> out) {
  check_sizes(in.size(), weights.size(), bias.size(), map, c_in, c_out, out.size());
  for (std::size_t j = 0; j < map.n_out; ++j)
    for (int o = 0; o < c_out; ++o) out[j * c_out + o] = bias[o];
  // Tap-major scatter over the pair lists: a different summation order from
  // the parallel kernel, so agreement is checked to rounding, not bitwise.
  std::uint64_t hits = 0;
  for (int a = 0; a < map.taps; ++a) {
    for (auto [i, j] : map.pairs(a)) {
      ++hits;
      for (int ci = 0; ci < c_in; ++ci)
        for (int o = 0; o < c_out; ++o)
          out[std::size_t(j) * c_out + o] +=
              in[std::size_t(i) * c_in + ci] * weights[(std::size_t(a) * c_in + ci) * c_out + o];
    }
  }
  g_macs += hits * std::uint64_t(c_in) * std::uint64_t(c_out);
}

}  // namespace serial
}  // namespace mrn::kernels
