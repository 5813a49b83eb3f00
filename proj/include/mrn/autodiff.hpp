#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mrn/tensor.hpp"

namespace mrn {

/// A named trainable tensor with a gradient slot of identical size.
struct Parameter {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<double> value;
  std::vector<double> grad;

  std::size_t size() const { return value.size(); }
};

/// Insertion-ordered collection of parameters. References returned by `add`
/// and `at` stay valid for the lifetime of the store.
class ParameterStore {
 public:
  // Zero-initialised when `init` is empty.
  Parameter& add(std::string name, std::vector<std::size_t> dims, std::vector<double> init = {});
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::deque<Parameter>& all() { return params_; }
  const std::deque<Parameter>& all() const { return params_; }
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// How a tape node's flat value buffer is to be interpreted.
struct Layout {
  enum class Kind { Flat, Dense, Sparse };

  Kind kind = Kind::Flat;
  GridShape shape;  // Flat: {1, 1, 1, n}
  std::shared_ptr<const ActiveSet> active;

  static Layout flat(std::size_t n) { return {Kind::Flat, {1, 1, 1, int(n)}, nullptr}; }
  static Layout dense(GridShape s) { return {Kind::Dense, s, nullptr}; }
  static Layout sparse(std::shared_ptr<const ActiveSet> a, int channels) {
    GridShape s = a->shape().with_channels(channels);
    return {Kind::Sparse, s, std::move(a)};
  }

  int channels() const { return shape.channels; }
  std::size_t rows() const {
    switch (kind) {
      case Kind::Flat: return 1;
      case Kind::Dense: return shape.voxels();
      case Kind::Sparse: return active->size();
    }
    return 0;
  }
  std::size_t size() const { return rows() * std::size_t(shape.channels); }
  bool compatible(const Layout& o) const;
};

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
  Layout layout;

  std::span<const double> value() const;
  double scalar() const;
  DenseVoxelTensor dense() const;
  SparseVoxelTensor sparse() const;
};

/// Append-only record of a forward computation. Nodes are stored in creation
/// order, so every node's parents precede it and a reverse sweep is a valid
/// topological order for backpropagation.
class Tape {
 public:
  // Called with the tape and the id of the node being differentiated.
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Var constant(Layout layout, std::vector<double> value);
  Var constant(const DenseVoxelTensor& t);
  Var constant(const SparseVoxelTensor& t);
  // Leaf that receives gradients but is not owned by a ParameterStore.
  Var variable(Layout layout, std::vector<double> value);
  // Leaf bound to a stored parameter; backward accumulates into `Parameter::grad`.
  Var param(Parameter& p);
  Var param(ParameterStore& store, std::string_view name) { return param(store.at(name)); }

  // Appends an op node. `fn` runs during backward only when the node's
  // gradient is populated; it is dropped if no parent requires a gradient.
  Var record(Layout layout, std::vector<double> value, std::initializer_list<Var> parents, BackwardFn fn);

  const std::vector<double>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
  // Gradient buffer of `id`, allocated as zeros on first access.
  std::vector<double>& grad(std::size_t id);
  const std::vector<double>& grad_or_empty(std::size_t id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

  friend void backward(Tape& tape, const Var& loss);

 private:
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
};

// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Throws
// ContractViolation if `loss` is not a single scalar on `tape`.
void backward(Tape& tape, const Var& loss);

// p <- p - lr * grad for every parameter, then zeroes the gradients.
void sgd_step(ParameterStore& params, double lr);

// Rescales all gradients so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_grad_norm(ParameterStore& params, double max_norm);

// Polynomial decay: lr0 * (1 - step / total)^power.
double poly_lr(double lr0, std::size_t step, std::size_t total, double power);

}  // namespace mrn
