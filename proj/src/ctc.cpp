#include "omni/ctc.hpp"

#include <cmath>
#include <limits>

#include "omni/errors.hpp"

namespace omni {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

}  // namespace

Var ctc_loss(Tape& t, Var logprobs, const std::vector<int64_t>& target, int64_t blank,
             bool* infeasible) {
  if (logprobs->value.ndim() != 2) {
    throw ShapeError("ctc_loss: logprobs must be 2-D, got " + logprobs->value.shape_string());
  }
  const int64_t frames = logprobs->value.shape[0];
  const int64_t vsize = logprobs->value.shape[1];
  if (blank < 0 || blank >= vsize) throw ShapeError("ctc_loss: blank id out of range");
  for (int64_t y : target) {
    if (y < 0 || y >= vsize || y == blank) {
      throw ShapeError("ctc_loss: target id " + std::to_string(y) + " invalid for vocab " +
                       std::to_string(vsize) + " with blank " + std::to_string(blank));
    }
  }
  if (infeasible) *infeasible = false;

  // Minimum frames: one per label plus a separating blank between repeats.
  const auto len = static_cast<int64_t>(target.size());
  int64_t min_frames = len;
  for (int64_t i = 1; i < len; ++i)
    if (target[static_cast<size_t>(i)] == target[static_cast<size_t>(i - 1)]) ++min_frames;
  if (frames < min_frames) {
    if (infeasible) *infeasible = true;
    return t.record(Tensor::scalar(std::numeric_limits<double>::infinity()), {logprobs},
                    [](Node&) {});
  }

  // Extended target: blank, y1, blank, y2, ..., blank
  const int64_t ext = 2 * len + 1;
  auto label_at = [&](int64_t u) -> int64_t {
    return (u % 2 == 0) ? blank : target[static_cast<size_t>(u / 2)];
  };

  const Tensor& lp = logprobs->value;
  std::vector<double> alpha(static_cast<size_t>(frames * ext), kNegInf);
  auto a = [&](int64_t tt, int64_t u) -> double& { return alpha[static_cast<size_t>(tt * ext + u)]; };

  a(0, 0) = lp.at(0, blank);
  if (ext > 1) a(0, 1) = lp.at(0, label_at(1));
  for (int64_t tt = 1; tt < frames; ++tt) {
    for (int64_t u = 0; u < ext; ++u) {
      double acc = a(tt - 1, u);
      if (u >= 1) acc = log_add(acc, a(tt - 1, u - 1));
      // skip over a blank, unless the labels two apart repeat
      if (u >= 2 && u % 2 == 1 && label_at(u) != label_at(u - 2)) acc = log_add(acc, a(tt - 1, u - 2));
      a(tt, u) = (acc == kNegInf) ? kNegInf : acc + lp.at(tt, label_at(u));
    }
  }
  double log_total = a(frames - 1, ext - 1);
  if (ext > 1) log_total = log_add(log_total, a(frames - 1, ext - 2));
  if (log_total == kNegInf) {
    // possible only with -inf logprob inputs
    if (infeasible) *infeasible = true;
    return t.record(Tensor::scalar(std::numeric_limits<double>::infinity()), {logprobs},
                    [](Node&) {});
  }

  // Backward variables for the gradient.
  std::vector<double> beta(static_cast<size_t>(frames * ext), kNegInf);
  auto b = [&](int64_t tt, int64_t u) -> double& { return beta[static_cast<size_t>(tt * ext + u)]; };
  b(frames - 1, ext - 1) = lp.at(frames - 1, label_at(ext - 1));
  if (ext > 1) b(frames - 1, ext - 2) = lp.at(frames - 1, label_at(ext - 2));
  for (int64_t tt = frames - 2; tt >= 0; --tt) {
    for (int64_t u = 0; u < ext; ++u) {
      double acc = b(tt + 1, u);
      if (u + 1 < ext) acc = log_add(acc, b(tt + 1, u + 1));
      if (u + 2 < ext && u % 2 == 1 && label_at(u) != label_at(u + 2))
        acc = log_add(acc, b(tt + 1, u + 2));
      b(tt, u) = (acc == kNegInf) ? kNegInf : acc + lp.at(tt, label_at(u));
    }
  }

  // d(-log P)/d lp[t,k] = -sum_{u: label(u)=k} exp(alpha + beta - lp - logP)
  Tensor grad_lp({frames, vsize});
  for (int64_t tt = 0; tt < frames; ++tt) {
    for (int64_t u = 0; u < ext; ++u) {
      const double au = a(tt, u), bu = b(tt, u);
      if (au == kNegInf || bu == kNegInf) continue;
      const int64_t k = label_at(u);
      grad_lp.at(tt, k) -= std::exp(au + bu - lp.at(tt, k) - log_total);
    }
  }

  return t.record(Tensor::scalar(-log_total), {logprobs},
                  [grad_lp = std::move(grad_lp)](Node& node) {
    const double g = node.grad.data[0];
    auto& pg = node.parents[0]->grad.data;
    for (size_t i = 0; i < pg.size(); ++i) pg[i] += g * grad_lp.data[i];
  });
}

std::vector<int64_t> ctc_greedy_decode(const Tensor& logprobs, int64_t blank) {
  if (logprobs.ndim() != 2) throw ShapeError("ctc_greedy_decode: logprobs must be 2-D");
  const int64_t frames = logprobs.shape[0], vsize = logprobs.shape[1];
  std::vector<int64_t> out;
  int64_t prev = -1;
  for (int64_t tt = 0; tt < frames; ++tt) {
    int64_t arg = 0;
    for (int64_t v = 1; v < vsize; ++v)
      if (logprobs.at(tt, v) > logprobs.at(tt, arg)) arg = v;
    if (arg != blank && arg != prev) out.push_back(arg);
    prev = arg;
  }
  return out;
}

}  // namespace omni
