#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "omni/tensor.hpp"

namespace omni {

// Named parameter with accumulated gradient. Non-trainable params never
// receive gradient and are never touched by the optimizer.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Param() = default;
  explicit Param(Tensor v) : value(std::move(v)) { grad = Tensor::zeros(value.shape); }

  void zero_grad() {
    for (double& g : grad.data) g = 0.0;
  }
};

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated by Tape::backward
  std::vector<Var> parents;
  std::function<void(Node&)> backprop;  // accumulates this->grad into parents' grads
  Param* param = nullptr;               // set on param leaves
};

// Ordered record of executed ops. The reverse pass walks the record
// backwards, so gradient accumulation order is fixed and deterministic.
class Tape {
 public:
  Var leaf(Param& p);
  Var constant(Tensor t);
  Var record(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop);

  // loss must be scalar; populates grads of trainable Params reached by it.
  void backward(const Var& loss);

  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<Var> nodes_;
};

}  // namespace omni
