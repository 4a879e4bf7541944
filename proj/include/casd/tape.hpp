#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "casd/tensor.hpp"

namespace casd {

// A named trainable tensor owned by a model.
struct Parameter {
  std::string name;
  Tensor value;
};

using NodeId = std::size_t;

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  NodeId id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  bool requires_grad() const;
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

// grad_in[i] is null when input i does not need a gradient; otherwise the
// callee accumulates into it.
using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> grad_in)>;

enum class GradMode { kEnabled, kDisabled };

class Gradients {
 public:
  // Zeros shaped like the parameter when it did not influence the loss.
  Tensor of(const Parameter& p) const;
  // Gradient with respect to an arbitrary node (zeros if unreached).
  Tensor of(Var v) const;

 private:
  friend class Tape;
  std::vector<Tensor> node_grads_;
  std::unordered_map<const Parameter*, NodeId> param_nodes_;
};

// Records primitive operations in topological order and runs reverse-mode
// differentiation over them. Single-threaded; one tape per step.
class Tape {
 public:
  explicit Tape(GradMode mode = GradMode::kEnabled) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Registers a parameter leaf. Repeated calls for the same parameter return
  // the same node so per-sample subgraphs share it.
  Var parameter(const Parameter& p);

  // Appends an op node. The value must be finite; otherwise a numeric error
  // naming `op` is thrown.
  Var record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  GradMode mode() const { return mode_; }

  Gradients backward(Var loss) const;

 private:
  struct Node {
    const char* op = "";
    Tensor value;
    std::vector<NodeId> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  GradMode mode_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, NodeId> param_nodes_;
};

// Test fixture: while alive, every backward rule of nodes recorded as `op` on
// the current thread sees its upstream gradient multiplied by `factor`.
class ScopedBackwardFault {
 public:
  ScopedBackwardFault(std::string op, double factor);
  ~ScopedBackwardFault();
  ScopedBackwardFault(const ScopedBackwardFault&) = delete;
  ScopedBackwardFault& operator=(const ScopedBackwardFault&) = delete;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

}  // namespace casd
