#pragma once

#include <cmath>
#include <unordered_map>
#include <vector>

#include "omni/autodiff.hpp"

namespace omni {

// SGD with momentum. Non-trainable params are never read or written, so
// freezing is bit-exact by construction.
struct SgdMomentum {
  double lr = 0.05;
  double momentum = 0.9;
  std::unordered_map<Param*, Tensor> velocity;

  void step(const std::vector<Param*>& params) {
    for (Param* p : params) {
      if (!p->trainable) continue;
      Tensor& v = velocity.try_emplace(p, Tensor::zeros(p->value.shape)).first->second;
      for (size_t i = 0; i < v.data.size(); ++i) {
        v.data[i] = momentum * v.data[i] + p->grad.data[i];
        p->value.data[i] -= lr * v.data[i];
      }
    }
  }

  static void zero_grads(const std::vector<Param*>& params) {
    for (Param* p : params) p->zero_grad();
  }
};

// Rescales all gradients so their joint L2 norm is at most `max_norm`.
// Returns the pre-clip norm. Guards against the occasional huge gradient
// (CTC early in training, long sequences) blowing up momentum SGD.
inline double clip_grad_norm(const std::vector<Param*>& params, double max_norm) {
  double sq = 0.0;
  for (Param* p : params) {
    if (!p->trainable) continue;
    for (double g : p->grad.data) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (Param* p : params) {
      if (!p->trainable) continue;
      for (double& g : p->grad.data) g *= scale;
    }
  }
  return norm;
}

}  // namespace omni
