#include "mrn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "mrn/error.hpp"
#include "mrn/kernels.hpp"

namespace mrn::ad {
namespace {

using Kind = Layout::Kind;

void same_layout(const Var& a, const Var& b, const char* op) {
  require(a.tape == b.tape, std::string(op) + ": operands live on different tapes");
  require(a.layout.compatible(b.layout), std::string(op) + ": operand layouts differ");
}

template <class Fwd, class Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
  auto x = a.value();
  std::vector<double> y(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) y[k] = fwd(x[k]);
  const std::size_t aid = a.id;
  return a.tape->record(a.layout, std::move(y), {a}, [aid, deriv](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(aid);
    const auto& yv = t.value(self);
    auto& ga = t.grad(aid);
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * deriv(xv[k], yv[k]);
  });
}

Layout with_channels(const Layout& l, int c) {
  Layout out = l;
  out.shape.channels = c;
  return out;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  same_layout(a, b, "add");
  auto x = a.value(), y = b.value();
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = x[k] + y[k];
  const std::size_t aid = a.id, bid = b.id;
  return a.tape->record(a.layout, std::move(out), {a, b}, [aid, bid](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    for (std::size_t id : {aid, bid}) {
      if (!t.requires_grad(id)) continue;
      auto& gi = t.grad(id);
      for (std::size_t k = 0; k < g.size(); ++k) gi[k] += g[k];
    }
  });
}

Var sub(const Var& a, const Var& b) { return add(a, scale(b, -1.0)); }

Var mul(const Var& a, const Var& b) {
  same_layout(a, b, "mul");
  auto x = a.value(), y = b.value();
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = x[k] * y[k];
  const std::size_t aid = a.id, bid = b.id;
  return a.tape->record(a.layout, std::move(out), {a, b}, [aid, bid](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(aid)) {
      auto& ga = t.grad(aid);
      const auto& yv = t.value(bid);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * yv[k];
    }
    if (t.requires_grad(bid)) {
      auto& gb = t.grad(bid);
      const auto& xv = t.value(aid);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * xv[k];
    }
  });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value()) s += v;
  const std::size_t aid = a.id;
  return a.tape->record(Layout::flat(1), {s}, {a}, [aid](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (double& ga : t.grad(aid)) ga += g;
  });
}

Var mean(const Var& a) {
  require(a.layout.size() > 0, "mean of an empty node");
  return scale(sum(a), 1.0 / double(a.layout.size()));
}

Var concat_channels(const Var& a, const Var& b) {
  require(a.tape == b.tape, "concat: operands live on different tapes");
  require(a.layout.kind == b.layout.kind && a.layout.shape.same_spatial(b.layout.shape),
          "concat: spatial layouts differ");
  if (a.layout.kind == Kind::Sparse)
    require(a.layout.active == b.layout.active || *a.layout.active == *b.layout.active,
            "concat: active sets differ");
  const int ca = a.layout.channels(), cb = b.layout.channels(), c = ca + cb;
  const std::size_t rows = a.layout.rows();
  auto x = a.value(), y = b.value();
  std::vector<double> out(rows * c);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.begin() + std::ptrdiff_t(r * ca), ca, out.begin() + std::ptrdiff_t(r * c));
    std::copy_n(y.begin() + std::ptrdiff_t(r * cb), cb, out.begin() + std::ptrdiff_t(r * c + ca));
  }
  const std::size_t aid = a.id, bid = b.id;
  return a.tape->record(with_channels(a.layout, c), std::move(out), {a, b},
                        [aid, bid, rows, ca, cb, c](Tape& t, std::size_t self) {
                          const auto& g = t.grad(self);
                          if (t.requires_grad(aid)) {
                            auto& ga = t.grad(aid);
                            for (std::size_t r = 0; r < rows; ++r)
                              for (int k = 0; k < ca; ++k) ga[r * ca + k] += g[r * c + k];
                          }
                          if (t.requires_grad(bid)) {
                            auto& gb = t.grad(bid);
                            for (std::size_t r = 0; r < rows; ++r)
                              for (int k = 0; k < cb; ++k) gb[r * cb + k] += g[r * c + ca + k];
                          }
                        });
}

Var gather(const Var& dense, std::shared_ptr<const ActiveSet> active) {
  require(dense.layout.kind == Kind::Dense, "gather: input must be dense");
  require(dense.layout.shape.same_spatial(active->shape()), "gather: spatial shapes differ");
  const int c = dense.layout.channels();
  auto x = dense.value();
  std::vector<double> out(active->size() * c);
  for (std::size_t i = 0; i < active->size(); ++i)
    std::copy_n(x.begin() + std::ptrdiff_t(active->linear(i) * c), c, out.begin() + std::ptrdiff_t(i * c));
  const std::size_t did = dense.id;
  Layout layout = Layout::sparse(active, c);
  return dense.tape->record(layout, std::move(out), {dense}, [did, active, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gd = t.grad(did);
    for (std::size_t i = 0; i < active->size(); ++i)
      for (int k = 0; k < c; ++k) gd[std::size_t(active->linear(i)) * c + k] += g[i * c + k];
  });
}

Var scatter(const Var& sparse) {
  require(sparse.layout.kind == Kind::Sparse, "scatter: input must be sparse");
  auto active = sparse.layout.active;
  const int c = sparse.layout.channels();
  const GridShape shape = active->shape().with_channels(c);
  auto x = sparse.value();
  std::vector<double> out(shape.size(), 0.0);
  for (std::size_t i = 0; i < active->size(); ++i)
    std::copy_n(x.begin() + std::ptrdiff_t(i * c), c, out.begin() + std::ptrdiff_t(active->linear(i) * c));
  const std::size_t sid = sparse.id;
  return sparse.tape->record(Layout::dense(shape), std::move(out), {sparse}, [sid, active, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gs = t.grad(sid);
    for (std::size_t i = 0; i < active->size(); ++i)
      for (int k = 0; k < c; ++k) gs[i * c + k] += g[std::size_t(active->linear(i)) * c + k];
  });
}

Var conv(const Var& x, const Var& w, const Var& b, std::shared_ptr<const KernelMap> map, Layout out_layout) {
  require(x.tape == w.tape && x.tape == b.tape, "conv: operands live on different tapes");
  const int c_in = x.layout.channels();
  const int c_out = out_layout.channels();
  require(x.layout.rows() == map->n_in && out_layout.rows() == map->n_out, "conv: kernel map does not fit layouts");
  require(w.layout.size() == std::size_t(map->taps) * c_in * c_out,
          "conv: channel mismatch between input and weights");
  require(b.layout.size() == std::size_t(c_out), "conv: bias size mismatch");
  std::vector<double> out(out_layout.size());
  kernels::conv_forward(x.value(), w.value(), b.value(), *map, c_in, c_out, out);
  const std::size_t xid = x.id, wid = w.id, bid = b.id;
  return x.tape->record(std::move(out_layout), std::move(out), {x, w, b},
                        [xid, wid, bid, map, c_in, c_out](Tape& t, std::size_t self) {
                          const auto& g = t.grad(self);
                          if (t.requires_grad(xid))
                            kernels::conv_backward_input(g, t.value(wid), *map, c_in, c_out, t.grad(xid));
                          if (t.requires_grad(wid) || t.requires_grad(bid)) {
                            std::vector<double> gw(t.value(wid).size(), 0.0), gb(c_out, 0.0);
                            kernels::conv_backward_params(t.value(xid), g, *map, c_in, c_out, gw, gb);
                            if (t.requires_grad(wid)) {
                              auto& dst = t.grad(wid);
                              for (std::size_t k = 0; k < gw.size(); ++k) dst[k] += gw[k];
                            }
                            if (t.requires_grad(bid)) {
                              auto& dst = t.grad(bid);
                              for (int k = 0; k < c_out; ++k) dst[k] += gb[k];
                            }
                          }
                        });
}

Var conv3d(const Var& x, const Var& w, const Var& b, Extent extent, int c_out) {
  require(x.layout.kind == Kind::Dense, "conv3d: input must be dense");
  auto map = std::make_shared<const KernelMap>(dense_map(x.layout.shape, extent));
  return conv(x, w, b, std::move(map), Layout::dense(x.layout.shape.with_channels(c_out)));
}

Var submanifold_conv(const Var& x, const Var& w, const Var& b, Extent extent, int c_out,
                     std::shared_ptr<const KernelMap> map) {
  require(x.layout.kind == Kind::Sparse, "submanifold_conv: input must be sparse");
  if (!map) map = std::make_shared<const KernelMap>(submanifold_map(*x.layout.active, extent));
  return conv(x, w, b, std::move(map), Layout::sparse(x.layout.active, c_out));
}

Var sparse_conv(const Var& x, const Var& w, const Var& b, Extent extent, int c_out) {
  require(x.layout.kind == Kind::Sparse, "sparse_conv: input must be sparse");
  SparseConvPlan plan = sparse_conv_plan(*x.layout.active, extent);
  auto map = std::make_shared<const KernelMap>(std::move(plan.map));
  return conv(x, w, b, std::move(map), Layout::sparse(plan.output, c_out));
}

Var deconv_up2(const Var& x, const Var& w, const Var& b, Extent extent, int c_out) {
  require(x.layout.kind == Kind::Dense, "deconv_up2: input must be dense");
  const GridShape& s = x.layout.shape;
  auto map = std::make_shared<const KernelMap>(deconv_up2_map(s, extent));
  return conv(x, w, b, std::move(map), Layout::dense({s.x * 2, s.y * 2, s.z * 2, c_out}));
}

Var avg_pool2(const Var& x) {
  require(x.layout.kind == Kind::Dense, "avg_pool2: input must be dense");
  const GridShape s = x.layout.shape;
  require(s.x % 2 == 0 && s.y % 2 == 0 && s.z % 2 == 0, "avg_pool2: extents must be even");
  const GridShape o{s.x / 2, s.y / 2, s.z / 2, s.channels};
  const int c = s.channels;
  auto in = x.value();
  std::vector<double> out(o.size(), 0.0);
  for (int X = 0; X < s.x; ++X)
    for (int Y = 0; Y < s.y; ++Y)
      for (int Z = 0; Z < s.z; ++Z) {
        const auto src = std::size_t(linear_index(s, {X, Y, Z})) * c;
        const auto dst = std::size_t(linear_index(o, {X / 2, Y / 2, Z / 2})) * c;
        for (int k = 0; k < c; ++k) out[dst + k] += 0.125 * in[src + k];
      }
  const std::size_t xid = x.id;
  return x.tape->record(Layout::dense(o), std::move(out), {x}, [xid, s, o, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(xid);
    for (int X = 0; X < s.x; ++X)
      for (int Y = 0; Y < s.y; ++Y)
        for (int Z = 0; Z < s.z; ++Z) {
          const auto src = std::size_t(linear_index(s, {X, Y, Z})) * c;
          const auto dst = std::size_t(linear_index(o, {X / 2, Y / 2, Z / 2})) * c;
          for (int k = 0; k < c; ++k) gx[src + k] += 0.125 * g[dst + k];
        }
  });
}

Var upsample_nearest2(const Var& x) {
  require(x.layout.kind == Kind::Dense, "upsample_nearest2: input must be dense");
  const GridShape s = x.layout.shape;
  const GridShape o{s.x * 2, s.y * 2, s.z * 2, s.channels};
  const int c = s.channels;
  auto in = x.value();
  std::vector<double> out(o.size());
  for (int X = 0; X < o.x; ++X)
    for (int Y = 0; Y < o.y; ++Y)
      for (int Z = 0; Z < o.z; ++Z) {
        const auto dst = std::size_t(linear_index(o, {X, Y, Z})) * c;
        const auto src = std::size_t(linear_index(s, {X / 2, Y / 2, Z / 2})) * c;
        std::copy_n(in.begin() + std::ptrdiff_t(src), c, out.begin() + std::ptrdiff_t(dst));
      }
  const std::size_t xid = x.id;
  return x.tape->record(Layout::dense(o), std::move(out), {x}, [xid, s, o, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(xid);
    for (int X = 0; X < o.x; ++X)
      for (int Y = 0; Y < o.y; ++Y)
        for (int Z = 0; Z < o.z; ++Z) {
          const auto dst = std::size_t(linear_index(o, {X, Y, Z})) * c;
          const auto src = std::size_t(linear_index(s, {X / 2, Y / 2, Z / 2})) * c;
          for (int k = 0; k < c; ++k) gx[src + k] += g[dst + k];
        }
  });
}

Var global_avg_pool(const Var& x) {
  require(x.layout.kind == Kind::Dense, "global_avg_pool: input must be dense");
  const int c = x.layout.channels();
  const std::size_t n = x.layout.rows();
  auto in = x.value();
  std::vector<double> out(c, 0.0);
  for (std::size_t v = 0; v < n; ++v)
    for (int k = 0; k < c; ++k) out[k] += in[v * c + k];
  for (double& o : out) o /= double(n);
  const std::size_t xid = x.id;
  return x.tape->record(Layout::flat(c), std::move(out), {x}, [xid, n, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gx = t.grad(xid);
    for (std::size_t v = 0; v < n; ++v)
      for (int k = 0; k < c; ++k) gx[v * c + k] += g[k] / double(n);
  });
}

Var channel_scale(const Var& x, const Var& gate) {
  const int c = x.layout.channels();
  require(gate.layout.size() == std::size_t(c), "channel_scale: gate length must equal channel count");
  const std::size_t rows = x.layout.rows();
  auto in = x.value();
  auto gv = gate.value();
  std::vector<double> out(in.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (int k = 0; k < c; ++k) out[r * c + k] = in[r * c + k] * gv[k];
  const std::size_t xid = x.id, gid = gate.id;
  return x.tape->record(x.layout, std::move(out), {x, gate}, [xid, gid, rows, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(xid)) {
      auto& gx = t.grad(xid);
      const auto& gv = t.value(gid);
      for (std::size_t r = 0; r < rows; ++r)
        for (int k = 0; k < c; ++k) gx[r * c + k] += g[r * c + k] * gv[k];
    }
    if (t.requires_grad(gid)) {
      auto& gg = t.grad(gid);
      const auto& xv = t.value(xid);
      for (std::size_t r = 0; r < rows; ++r)
        for (int k = 0; k < c; ++k) gg[k] += g[r * c + k] * xv[r * c + k];
    }
  });
}

Var linear(const Var& v, const Var& w, const Var& b, int out) {
  const std::size_t in = v.layout.size();
  require(w.layout.size() == in * std::size_t(out), "linear: weight size mismatch");
  require(b.layout.size() == std::size_t(out), "linear: bias size mismatch");
  auto vv = v.value(), wv = w.value(), bv = b.value();
  std::vector<double> y(bv.begin(), bv.end());
  for (std::size_t i = 0; i < in; ++i)
    for (int o = 0; o < out; ++o) y[o] += vv[i] * wv[i * out + o];
  const std::size_t vid = v.id, wid = w.id, bid = b.id;
  return v.tape->record(Layout::flat(out), std::move(y), {v, w, b}, [vid, wid, bid, in, out](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(vid)) {
      auto& gv = t.grad(vid);
      const auto& wv = t.value(wid);
      for (std::size_t i = 0; i < in; ++i)
        for (int o = 0; o < out; ++o) gv[i] += g[o] * wv[i * out + o];
    }
    if (t.requires_grad(wid)) {
      auto& gw = t.grad(wid);
      const auto& vv = t.value(vid);
      for (std::size_t i = 0; i < in; ++i)
        for (int o = 0; o < out; ++o) gw[i * out + o] += g[o] * vv[i];
    }
    if (t.requires_grad(bid)) {
      auto& gb = t.grad(bid);
      for (int o = 0; o < out; ++o) gb[o] += g[o];
    }
  });
}

Var softmax_groups(const Var& a, int groups) {
  const std::size_t n = a.layout.size();
  require(groups >= 1 && n % std::size_t(groups) == 0, "softmax_groups: size not divisible by group count");
  const std::size_t c = n / groups;
  auto x = a.value();
  std::vector<double> y(n);
  for (std::size_t k = 0; k < c; ++k) {
    double mx = x[k];
    for (int g = 1; g < groups; ++g) mx = std::max(mx, x[g * c + k]);
    double z = 0.0;
    for (int g = 0; g < groups; ++g) z += (y[g * c + k] = std::exp(x[g * c + k] - mx));
    for (int g = 0; g < groups; ++g) y[g * c + k] /= z;
  }
  const std::size_t aid = a.id;
  return a.tape->record(a.layout, std::move(y), {a}, [aid, groups, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self);
    auto& ga = t.grad(aid);
    for (std::size_t k = 0; k < c; ++k) {
      double dot = 0.0;
      for (int q = 0; q < groups; ++q) dot += g[q * c + k] * y[q * c + k];
      for (int q = 0; q < groups; ++q) ga[q * c + k] += y[q * c + k] * (g[q * c + k] - dot);
    }
  });
}

Var channel_softmax(const Var& a) {
  const int c = a.layout.channels();
  const std::size_t rows = a.layout.rows();
  auto x = a.value();
  std::vector<double> y(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * c;
    double* yr = y.data() + r * c;
    const double mx = *std::max_element(xr, xr + c);
    double z = 0.0;
    for (int k = 0; k < c; ++k) z += (yr[k] = std::exp(xr[k] - mx));
    for (int k = 0; k < c; ++k) yr[k] /= z;
  }
  const std::size_t aid = a.id;
  return a.tape->record(a.layout, std::move(y), {a}, [aid, rows, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self);
    auto& ga = t.grad(aid);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (int k = 0; k < c; ++k) dot += g[r * c + k] * y[r * c + k];
      for (int k = 0; k < c; ++k) ga[r * c + k] += y[r * c + k] * (g[r * c + k] - dot);
    }
  });
}

Var select_channel(const Var& a, int channel) {
  const int c = a.layout.channels();
  require(channel >= 0 && channel < c, "select_channel: channel out of range");
  const std::size_t rows = a.layout.rows();
  auto x = a.value();
  std::vector<double> y(rows);
  for (std::size_t r = 0; r < rows; ++r) y[r] = x[r * c + channel];
  const std::size_t aid = a.id;
  return a.tape->record(with_channels(a.layout, 1), std::move(y), {a}, [aid, rows, c, channel](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(aid);
    for (std::size_t r = 0; r < rows; ++r) ga[r * c + channel] += g[r];
  });
}

Var slice(const Var& a, std::size_t offset, std::size_t length) {
  require(offset + length <= a.layout.size(), "slice: range out of bounds");
  auto x = a.value();
  std::vector<double> y(x.begin() + std::ptrdiff_t(offset), x.begin() + std::ptrdiff_t(offset + length));
  const std::size_t aid = a.id;
  return a.tape->record(Layout::flat(length), std::move(y), {a}, [aid, offset](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(aid);
    for (std::size_t k = 0; k < g.size(); ++k) ga[offset + k] += g[k];
  });
}

Var apply_scale_mask(const Var& a, std::vector<double> scale) {
  require(scale.size() == a.layout.size(), "apply_scale_mask: mask size mismatch");
  auto x = a.value();
  std::vector<double> y(x.size());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = x[k] * scale[k];
  const std::size_t aid = a.id;
  return a.tape->record(a.layout, std::move(y), {a}, [aid, scale = std::move(scale)](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(aid);
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * scale[k];
  });
}

Var gru_blend(const Var& h_prev, const Var& z, const Var& hc) {
  require(h_prev.layout.kind == Kind::Dense, "gru_blend: hidden state must be dense");
  require(z.layout.kind == Kind::Sparse && hc.layout.kind == Kind::Sparse, "gru_blend: gates must be sparse");
  const int c = h_prev.layout.channels();
  require(z.layout.channels() == c && hc.layout.channels() == c, "gru_blend: channel mismatch");
  require(h_prev.layout.shape.same_spatial(z.layout.shape), "gru_blend: spatial shapes differ");
  const ActiveSet& zs = *z.layout.active;
  const ActiveSet& hs = *hc.layout.active;
  std::vector<std::int32_t> hc_row(zs.size());
  for (std::size_t i = 0; i < zs.size(); ++i) {
    hc_row[i] = hs.find(zs.coord(i));
    require(hc_row[i] >= 0, "gru_blend: candidate support must contain the gate support");
  }
  auto hv = h_prev.value(), zv = z.value(), cv = hc.value();
  std::vector<double> out(hv.begin(), hv.end());
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const std::size_t v = std::size_t(zs.linear(i)) * c, zi = i * c, ci = std::size_t(hc_row[i]) * c;
    for (int k = 0; k < c; ++k) out[v + k] = (1.0 - zv[zi + k]) * hv[v + k] + zv[zi + k] * cv[ci + k];
  }
  const std::size_t hid = h_prev.id, zid = z.id, cid = hc.id;
  auto zset = z.layout.active;
  return h_prev.tape->record(
      h_prev.layout, std::move(out), {h_prev, z, hc},
      [hid, zid, cid, zset, hc_row = std::move(hc_row), c](Tape& t, std::size_t self) {
        const auto& g = t.grad(self);
        const auto& hv = t.value(hid);
        const auto& zv = t.value(zid);
        const auto& cv = t.value(cid);
        if (t.requires_grad(hid)) {
          auto& gh = t.grad(hid);
          std::vector<double> pass(g.begin(), g.end());
          for (std::size_t i = 0; i < zset->size(); ++i) {
            const std::size_t v = std::size_t(zset->linear(i)) * c;
            for (int k = 0; k < c; ++k) pass[v + k] = g[v + k] * (1.0 - zv[i * c + k]);
          }
          for (std::size_t k = 0; k < pass.size(); ++k) gh[k] += pass[k];
        }
        if (t.requires_grad(zid)) {
          auto& gz = t.grad(zid);
          for (std::size_t i = 0; i < zset->size(); ++i) {
            const std::size_t v = std::size_t(zset->linear(i)) * c, ci = std::size_t(hc_row[i]) * c;
            for (int k = 0; k < c; ++k) gz[i * c + k] += g[v + k] * (cv[ci + k] - hv[v + k]);
          }
        }
        if (t.requires_grad(cid)) {
          auto& gc = t.grad(cid);
          for (std::size_t i = 0; i < zset->size(); ++i) {
            const std::size_t v = std::size_t(zset->linear(i)) * c, ci = std::size_t(hc_row[i]) * c;
            for (int k = 0; k < c; ++k) gc[ci + k] += g[v + k] * zv[i * c + k];
          }
        }
      });
}

Var cross_entropy(const Var& logits, std::span<const std::uint8_t> labels, std::uint8_t ignore) {
  const int c = logits.layout.channels();
  const std::size_t rows = logits.layout.rows();
  require(labels.size() == rows, "cross_entropy: label count does not match voxel count");
  auto x = logits.value();
  std::vector<double> probs(x.size(), 0.0);
  std::vector<std::uint8_t> lab(labels.begin(), labels.end());
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (lab[r] == ignore) continue;
    require(lab[r] < c, "cross_entropy: label outside class range");
    const double* xr = x.data() + r * c;
    const double mx = *std::max_element(xr, xr + c);
    double z = 0.0;
    for (int k = 0; k < c; ++k) z += (probs[r * c + k] = std::exp(xr[k] - mx));
    for (int k = 0; k < c; ++k) probs[r * c + k] /= z;
    total += -(xr[lab[r]] - mx - std::log(z));
    ++n;
  }
  if (n == 0) throw ContractViolation("cross_entropy: every voxel is ignored, loss undefined");
  const std::size_t lid = logits.id;
  return logits.tape->record(
      Layout::flat(1), {total / double(n)}, {logits},
      [lid, probs = std::move(probs), lab = std::move(lab), ignore, c, rows, n](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0] / double(n);
        auto& gl = t.grad(lid);
        for (std::size_t r = 0; r < rows; ++r) {
          if (lab[r] == ignore) continue;
          for (int k = 0; k < c; ++k) gl[r * c + k] += g * (probs[r * c + k] - (k == lab[r] ? 1.0 : 0.0));
        }
      });
}

Var weighted_bce(const Var& prob, std::span<const std::uint8_t> target, std::span<const std::uint8_t> valid,
                 bool balanced) {
  require(prob.layout.channels() == 1, "weighted_bce: expects a one-channel probability field");
  const std::size_t rows = prob.layout.rows();
  require(target.size() == rows && valid.size() == rows, "weighted_bce: mask size mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!valid[r]) continue;
    (target[r] ? n_pos : n_neg)++;
  }
  const std::size_t n = n_pos + n_neg;
  if (n == 0) throw ContractViolation("weighted_bce: no valid voxels");
  double w_pos = 1.0, w_neg = 1.0;
  if (balanced && n_pos > 0 && n_neg > 0) {
    w_pos = double(n) / (2.0 * double(n_pos));
    w_neg = double(n) / (2.0 * double(n_neg));
  }
  constexpr double kEps = 1e-12;
  auto p = prob.value();
  // Per-voxel derivative of the summed loss, reused in backward.
  std::vector<double> dp(rows, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!valid[r]) continue;
    const double q = std::clamp(p[r], kEps, 1.0 - kEps);
    if (target[r]) {
      total += -w_pos * std::log(q);
      dp[r] = -w_pos / q;
    } else {
      total += -w_neg * std::log(1.0 - q);
      dp[r] = w_neg / (1.0 - q);
    }
  }
  const std::size_t pid = prob.id;
  return prob.tape->record(Layout::flat(1), {total / double(n)}, {prob},
                           [pid, dp = std::move(dp), n](Tape& t, std::size_t self) {
                             const double g = t.grad(self)[0] / double(n);
                             auto& gp = t.grad(pid);
                             for (std::size_t r = 0; r < dp.size(); ++r) gp[r] += g * dp[r];
                           });
}

}  // namespace mrn::ad
