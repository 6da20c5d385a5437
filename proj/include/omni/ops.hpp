#pragma once

#include <vector>

#include "omni/autodiff.hpp"

namespace omni::ops {

// All ops treat tensors as 2-D (rows x cols); rank-1 tensors are rows of a
// single column unless documented otherwise.

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);

// x[R x d] + b (numel d), broadcast over rows
Var add_row_broadcast(Tape& t, Var x, Var b);

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps = 1e-5);
Var gelu(Tape& t, Var x);
Var tanh_op(Tape& t, Var x);

Var transpose(Tape& t, Var x);
Var reshape(Tape& t, Var x, std::vector<int64_t> shape);
Var slice_rows(Tape& t, Var x, int64_t offset, int64_t count);
Var slice_cols(Tape& t, Var x, int64_t offset, int64_t count);
Var concat_rows(Tape& t, const std::vector<Var>& xs);
Var concat_cols(Tape& t, const std::vector<Var>& xs);
Var gather_rows(Tape& t, Var x, const std::vector<int64_t>& ids);

Var sum_all(Tape& t, Var x);
Var mean_all(Tape& t, Var x);
Var mean_rows(Tape& t, Var x);  // [R x d] -> [1 x d]
Var mse(Tape& t, Var a, Var b);

Var softmax_rows(Tape& t, Var x, bool causal_mask = false);
Var log_softmax_rows(Tape& t, Var x);
Var softmax_cross_entropy(Tape& t, Var logits, const std::vector<int64_t>& targets);

// Strided 1-D convolution over rows (time axis). x[T x Cin], w[(K*Cin) x Cout],
// b numel Cout. Output has ceil(T/stride) rows; input is right-padded with
// zeros to (out-1)*stride + K.
Var conv1d(Tape& t, Var x, Var w, Var b, int64_t kernel, int64_t stride);

// Non-overlapping learned upsampling: x[M x Cin], w[Cin x (stride*Cout)],
// b numel Cout -> [M*stride x Cout].
Var upsample1d(Tape& t, Var x, Var w, Var b, int64_t stride, int64_t cout);

// Forward value is `quantized`; gradient is copied unchanged to z.
Var straight_through(Tape& t, Var z, Tensor quantized);

}  // namespace omni::ops
