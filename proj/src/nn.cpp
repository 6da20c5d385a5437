#include "omni/nn.hpp"

#include <cmath>

namespace omni {

TransformerBlock::TransformerBlock(Rng& rng, int64_t d_model, int64_t heads)
    : d(d_model), n_heads(heads), ln1(d_model), ln2(d_model) {
  if (heads <= 0 || d_model % heads != 0) {
    throw ConfigError("transformer block: n_heads " + std::to_string(heads) +
                      " must divide hidden size " + std::to_string(d_model));
  }
  wq = Linear(rng, d_model, d_model);
  // key bias is a no-op under softmax shift invariance, so it is omitted
  wk = Linear(rng, d_model, d_model, /*with_bias=*/false);
  wv = Linear(rng, d_model, d_model);
  wo = Linear(rng, d_model, d_model);
  ff1 = Linear(rng, d_model, 4 * d_model);
  ff2 = Linear(rng, 4 * d_model, d_model);
}

void TransformerBlock::register_params(ParamRegistry& reg, const std::string& prefix) {
  ln1.register_params(reg, prefix + ".ln1");
  ln2.register_params(reg, prefix + ".ln2");
  wq.register_params(reg, prefix + ".wq");
  wk.register_params(reg, prefix + ".wk");
  wv.register_params(reg, prefix + ".wv");
  wo.register_params(reg, prefix + ".wo");
  ff1.register_params(reg, prefix + ".ff1");
  ff2.register_params(reg, prefix + ".ff2");
}

Var TransformerBlock::forward(Tape& t, Var x, bool causal) {
  if (x->value.ndim() != 2 || x->value.shape[1] != d) {
    throw ShapeError("transformer block: input " + x->value.shape_string() + " vs hidden " +
                     std::to_string(d));
  }
  const int64_t dh = d / n_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Var xin = ln1.forward(t, x);
  Var q = wq.forward(t, xin);
  Var k = wk.forward(t, xin);
  Var v = wv.forward(t, xin);
  std::vector<Var> head_outs;
  head_outs.reserve(static_cast<size_t>(n_heads));
  for (int64_t h = 0; h < n_heads; ++h) {
    Var qh = ops::slice_cols(t, q, h * dh, dh);
    Var kh = ops::slice_cols(t, k, h * dh, dh);
    Var vh = ops::slice_cols(t, v, h * dh, dh);
    Var scores = ops::scale(t, ops::matmul(t, qh, ops::transpose(t, kh)), inv_sqrt_dh);
    Var attn = ops::softmax_rows(t, scores, causal);
    head_outs.push_back(ops::matmul(t, attn, vh));
  }
  Var mha = wo.forward(t, ops::concat_cols(t, head_outs));
  Var h1 = ops::add(t, x, mha);

  Var hin = ln2.forward(t, h1);
  Var ff = ff2.forward(t, ops::gelu(t, ff1.forward(t, hin)));
  return ops::add(t, h1, ff);
}

}  // namespace omni
