#include "casd/tape.hpp"

#include "casd/error.hpp"

namespace casd {

namespace {

struct Fault {
  std::string op;
  double factor = 1.0;
  bool active = false;
};

thread_local Fault fault;

}  // namespace

ScopedBackwardFault::ScopedBackwardFault(std::string op, double factor) {
  fault = {std::move(op), factor, true};
}

ScopedBackwardFault::~ScopedBackwardFault() { fault = {}; }

Tensor Gradients::of(const Parameter& p) const {
  auto it = param_nodes_.find(&p);
  if (it == param_nodes_.end() || node_grads_[it->second].empty()) return Tensor::zeros(p.value.shape());
  return node_grads_[it->second];
}

Tensor Gradients::of(Var v) const {
  if (v.id() >= node_grads_.size() || node_grads_[v.id()].empty()) return Tensor::zeros(v.shape());
  return node_grads_[v.id()];
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{"constant", std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(this, it->second);
  nodes_.push_back(Node{"parameter", p.value, {}, {}, mode_ == GradMode::kEnabled});
  NodeId id = nodes_.size() - 1;
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  if (!value.all_finite()) {
    fail(ErrorKind::kNumeric, std::string("non-finite output from ") + op + " " + shape_str(value.shape()));
  }
  Node node;
  node.op = op;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (&v.tape() != this) fail(ErrorKind::kDimension, std::string(op) + ": input from a different tape");
    node.inputs.push_back(v.id());
    node.requires_grad = node.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) const {
  if (&loss.tape() != this) fail(ErrorKind::kUsage, "backward: loss node belongs to another tape");
  if (loss.size() != 1) {
    fail(ErrorKind::kUsage, "backward: loss must be scalar, got " + shape_str(loss.shape()));
  }
  Gradients out;
  out.node_grads_.resize(nodes_.size());
  out.param_nodes_ = param_nodes_;
  auto& grads = out.node_grads_;
  grads[loss.id()] = Tensor::full(loss.shape(), 1.0);

  std::vector<Tensor*> grad_in;
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!node.backward || grads[id].empty()) continue;
    grad_in.clear();
    for (NodeId in : node.inputs) {
      if (!nodes_[in].requires_grad) {
        grad_in.push_back(nullptr);
        continue;
      }
      if (grads[in].empty()) grads[in] = Tensor::zeros(nodes_[in].value.shape());
      grad_in.push_back(&grads[in]);
    }
    if (fault.active && fault.op == node.op) {
      Tensor scaled = grads[id];
      scaled *= fault.factor;
      node.backward(scaled, grad_in);
    } else {
      node.backward(grads[id], grad_in);
    }
  }
  return out;
}

}  // namespace casd
