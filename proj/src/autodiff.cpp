#include "mrn/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "mrn/error.hpp"

namespace mrn {

Parameter& ParameterStore::add(std::string name, std::vector<std::size_t> dims, std::vector<double> init) {
  require(!contains(name), "duplicate parameter name: " + name);
  std::size_t n = 1;
  for (std::size_t d : dims) n *= d;
  if (init.empty()) init.assign(n, 0.0);
  require(init.size() == n, "parameter init size mismatch for " + name);
  index_.emplace(name, params_.size());
  params_.push_back({std::move(name), std::move(dims), std::move(init), std::vector<double>(n, 0.0)});
  return params_.back();
}

Parameter& ParameterStore::at(std::string_view name) {
  auto it = index_.find(std::string(name));
  require(it != index_.end(), "unknown parameter: " + std::string(name));
  return params_[it->second];
}

const Parameter& ParameterStore::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  require(it != index_.end(), "unknown parameter: " + std::string(name));
  return params_[it->second];
}

bool ParameterStore::contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

bool Layout::compatible(const Layout& o) const {
  if (kind != o.kind || shape != o.shape) return false;
  if (kind == Kind::Sparse) return active == o.active || *active == *o.active;
  return true;
}

std::span<const double> Var::value() const { return tape->value(id); }

double Var::scalar() const {
  require(layout.size() == 1, "scalar() on a non-scalar node");
  return tape->value(id)[0];
}

DenseVoxelTensor Var::dense() const {
  require(layout.kind == Layout::Kind::Dense, "dense() on a non-dense node");
  return DenseVoxelTensor(layout.shape, tape->value(id));
}

SparseVoxelTensor Var::sparse() const {
  require(layout.kind == Layout::Kind::Sparse, "sparse() on a non-sparse node");
  return SparseVoxelTensor(layout.active, layout.channels(), tape->value(id));
}

Var Tape::constant(Layout layout, std::vector<double> value) {
  require(value.size() == layout.size(), "constant: value size does not match layout");
  nodes_.push_back({std::move(value), {}, nullptr, nullptr, false});
  return {this, nodes_.size() - 1, std::move(layout)};
}

Var Tape::constant(const DenseVoxelTensor& t) {
  return constant(Layout::dense(t.shape()), {t.values().begin(), t.values().end()});
}

Var Tape::constant(const SparseVoxelTensor& t) {
  return constant(Layout::sparse(t.active_ptr(), t.channels()), {t.features().begin(), t.features().end()});
}

Var Tape::variable(Layout layout, std::vector<double> value) {
  require(value.size() == layout.size(), "variable: value size does not match layout");
  nodes_.push_back({std::move(value), {}, nullptr, nullptr, true});
  return {this, nodes_.size() - 1, std::move(layout)};
}

Var Tape::param(Parameter& p) {
  nodes_.push_back({p.value, {}, nullptr, &p, true});
  return {this, nodes_.size() - 1, Layout::flat(p.size())};
}

Var Tape::record(Layout layout, std::vector<double> value, std::initializer_list<Var> parents,
                 BackwardFn fn) {
  require(value.size() == layout.size(), "record: value size does not match layout");
  bool needs = false;
  for (const Var& p : parents) {
    require(p.tape == this && p.id < nodes_.size(), "record: parent from another tape");
    needs = needs || nodes_[p.id].requires_grad;
  }
  nodes_.push_back({std::move(value), {}, needs ? std::move(fn) : nullptr, nullptr, needs});
  return {this, nodes_.size() - 1, std::move(layout)};
}

std::vector<double>& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void backward(Tape& tape, const Var& loss) {
  require(loss.tape == &tape, "backward: loss node is not on this tape");
  require(loss.layout.size() == 1 && tape.value(loss.id).size() == 1, "backward: loss must be a scalar");
  tape.grad(loss.id)[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& node = tape.nodes_[i];
    if (node.grad.empty()) continue;
    if (node.backward) node.backward(tape, i);
    if (node.param) {
      auto& g = node.param->grad;
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += node.grad[k];
    }
  }
}

void sgd_step(ParameterStore& params, double lr) {
  require(lr > 0.0, "learning rate must be positive");
  for (auto& p : params.all()) {
    for (std::size_t k = 0; k < p.value.size(); ++k) p.value[k] -= lr * p.grad[k];
    std::fill(p.grad.begin(), p.grad.end(), 0.0);
  }
}

double clip_grad_norm(ParameterStore& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params.all())
    for (double g : p.grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : params.all())
      for (double& g : p.grad) g *= s;
  }
  return norm;
}

double poly_lr(double lr0, std::size_t step, std::size_t total, double power) {
  if (total == 0) return lr0;
  const double frac = 1.0 - double(std::min(step, total)) / double(total);
  return lr0 * std::pow(frac, power);
}

}  // namespace mrn
