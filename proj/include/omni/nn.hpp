#pragma once

#include <string>
#include <vector>

#include "omni/autodiff.hpp"
#include "omni/ops.hpp"
#include "omni/rng.hpp"

namespace omni {

// Flat registry of named parameters. Registration order is the canonical
// order for optimizer steps and checkpoints.
struct ParamRegistry {
  std::vector<Param*> params;

  void add(Param& p, const std::string& name) {
    p.name = name;
    params.push_back(&p);
  }
  Param* find(const std::string& name) const {
    for (Param* p : params)
      if (p->name == name) return p;
    return nullptr;
  }
  // All params whose name starts with `prefix`.
  std::vector<Param*> with_prefix(const std::string& prefix) const {
    std::vector<Param*> out;
    for (Param* p : params)
      if (p->name.rfind(prefix, 0) == 0) out.push_back(p);
    return out;
  }
};

inline Tensor uniform_init(Rng& rng, std::vector<int64_t> shape, int64_t fan_in) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

struct Linear {
  Param weight;  // [in x out]
  Param bias;    // [out]
  int64_t in = 0, out = 0;
  bool has_bias = true;

  Linear() = default;
  Linear(Rng& rng, int64_t in_dim, int64_t out_dim, bool with_bias = true)
      : in(in_dim), out(out_dim), has_bias(with_bias) {
    weight = Param(uniform_init(rng, {in_dim, out_dim}, in_dim));
    if (has_bias) bias = Param(Tensor::zeros({out_dim}));
  }
  void register_params(ParamRegistry& reg, const std::string& prefix) {
    reg.add(weight, prefix + ".weight");
    if (has_bias) reg.add(bias, prefix + ".bias");
  }
  Var forward(Tape& t, Var x) {
    Var y = ops::matmul(t, x, t.leaf(weight));
    return has_bias ? ops::add_row_broadcast(t, y, t.leaf(bias)) : y;
  }
};

struct LayerNormLayer {
  Param gain;
  Param bias;
  double eps = 1e-5;

  LayerNormLayer() = default;
  explicit LayerNormLayer(int64_t d) {
    gain = Param(Tensor::full({d}, 1.0));
    bias = Param(Tensor::zeros({d}));
  }
  void register_params(ParamRegistry& reg, const std::string& prefix) {
    reg.add(gain, prefix + ".gain");
    reg.add(bias, prefix + ".bias");
  }
  Var forward(Tape& t, Var x) { return ops::layer_norm(t, x, t.leaf(gain), t.leaf(bias), eps); }
};

// Pre-norm block: x + MHA(LN(x)), then h + FFN(LN(h)). GELU feed-forward
// with 4x expansion. No positional encoding inside the block.
struct TransformerBlock {
  int64_t d = 0, n_heads = 0;
  LayerNormLayer ln1, ln2;
  Linear wq, wk, wv, wo;
  Linear ff1, ff2;

  TransformerBlock() = default;
  TransformerBlock(Rng& rng, int64_t d_model, int64_t heads);
  void register_params(ParamRegistry& reg, const std::string& prefix);
  Var forward(Tape& t, Var x, bool causal);
};

struct Mlp2 {
  Linear l1, l2;

  Mlp2() = default;
  Mlp2(Rng& rng, int64_t in, int64_t hidden, int64_t out)
      : l1(rng, in, hidden), l2(rng, hidden, out) {}
  void register_params(ParamRegistry& reg, const std::string& prefix) {
    l1.register_params(reg, prefix + ".l1");
    l2.register_params(reg, prefix + ".l2");
  }
  Var forward(Tape& t, Var x) { return l2.forward(t, ops::gelu(t, l1.forward(t, x))); }
};

struct Embedding {
  Param table;  // [vocab x d]

  Embedding() = default;
  Embedding(Rng& rng, int64_t vocab, int64_t d) { table = Param(uniform_init(rng, {vocab, d}, d)); }
  void register_params(ParamRegistry& reg, const std::string& prefix) { reg.add(table, prefix + ".table"); }
  Var forward(Tape& t, const std::vector<int64_t>& ids) {
    return ops::gather_rows(t, t.leaf(table), ids);
  }
};

// Learned absolute positions, added at sequence assembly.
struct PositionalEmbedding {
  Param table;  // [max_len x d]

  PositionalEmbedding() = default;
  PositionalEmbedding(Rng& rng, int64_t max_len, int64_t d) {
    table = Param(uniform_init(rng, {max_len, d}, d));
  }
  void register_params(ParamRegistry& reg, const std::string& prefix) { reg.add(table, prefix + ".table"); }
  Var forward(Tape& t, int64_t len) {
    if (len > table.value.shape[0]) {
      throw ConfigError("positional embedding: sequence length " + std::to_string(len) +
                        " exceeds context " + std::to_string(table.value.shape[0]));
    }
    return ops::slice_rows(t, t.leaf(table), 0, len);
  }
};

struct Conv1dLayer {
  Param weight;  // [(kernel*cin) x cout]
  Param bias;    // [cout]
  int64_t kernel = 0, stride = 0;

  Conv1dLayer() = default;
  Conv1dLayer(Rng& rng, int64_t cin, int64_t cout, int64_t k, int64_t s) : kernel(k), stride(s) {
    weight = Param(uniform_init(rng, {k * cin, cout}, k * cin));
    bias = Param(Tensor::zeros({cout}));
  }
  void register_params(ParamRegistry& reg, const std::string& prefix) {
    reg.add(weight, prefix + ".weight");
    reg.add(bias, prefix + ".bias");
  }
  Var forward(Tape& t, Var x) {
    return ops::conv1d(t, x, t.leaf(weight), t.leaf(bias), kernel, stride);
  }
};

struct Upsample1dLayer {
  Param weight;  // [cin x (stride*cout)]
  Param bias;    // [cout]
  int64_t stride = 0, cout = 0;

  Upsample1dLayer() = default;
  Upsample1dLayer(Rng& rng, int64_t cin, int64_t cout_dim, int64_t s) : stride(s), cout(cout_dim) {
    weight = Param(uniform_init(rng, {cin, s * cout_dim}, cin));
    bias = Param(Tensor::zeros({cout_dim}));
  }
  void register_params(ParamRegistry& reg, const std::string& prefix) {
    reg.add(weight, prefix + ".weight");
    reg.add(bias, prefix + ".bias");
  }
  Var forward(Tape& t, Var x) {
    return ops::upsample1d(t, x, t.leaf(weight), t.leaf(bias), stride, cout);
  }
};

}  // namespace omni
