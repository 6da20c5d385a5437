#pragma once

#include <vector>

#include "omni/autodiff.hpp"

namespace omni {

// CTC loss via the forward algorithm over the blank-interleaved extended
// target, accumulated in log space. `logprobs` rows are expected to be
// log-softmax normalized. When no alignment fits into T frames the loss is
// +infinity, `*infeasible` is set, and the gradient is zero.
Var ctc_loss(Tape& t, Var logprobs, const std::vector<int64_t>& target, int64_t blank = 0,
             bool* infeasible = nullptr);

// Per-frame argmax, collapse consecutive repeats, drop blanks.
std::vector<int64_t> ctc_greedy_decode(const Tensor& logprobs, int64_t blank = 0);

}  // namespace omni
