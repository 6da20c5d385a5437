#include "omni/autodiff.hpp"

#include <cmath>

namespace omni {

Var Tape::leaf(Param& p) {
  auto n = std::make_shared<Node>();
  n->value = p.value;
  n->param = &p;
  nodes_.push_back(n);
  return n;
}

Var Tape::constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  nodes_.push_back(n);
  return n;
}

Var Tape::record(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  n->backprop = std::move(backprop);
  nodes_.push_back(n);
  return n;
}

void Tape::backward(const Var& loss) {
  if (!loss) throw ShapeError("backward: null loss");
  if (loss->value.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + loss->value.shape_string());
  }
  for (auto& n : nodes_) n->grad = Tensor::zeros(n->value.shape);
  loss->grad.data[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.backprop) n.backprop(n);
  }
  // Flush leaf gradients into their Params in recording order.
  for (auto& n : nodes_) {
    if (n->param && n->param->trainable) {
      auto& pg = n->param->grad.data;
      for (size_t i = 0; i < pg.size(); ++i) pg[i] += n->grad.data[i];
    }
  }
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace omni
