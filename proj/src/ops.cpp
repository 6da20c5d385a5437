#include "omni/ops.hpp"

#include <algorithm>
#include <cmath>

#include "omni/kernels.hpp"

namespace omni::ops {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

void require_2d(const Var& v, const char* op) {
  require(v->value.ndim() == 2, std::string(op) + ": expected 2-D tensor, got " + v->value.shape_string());
}

void add_into(Tensor& dst, const Tensor& src) {
  for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const int64_t m = a->value.shape[0], k = a->value.shape[1];
  const int64_t k2 = b->value.shape[0], n = b->value.shape[1];
  require(k == k2, "matmul: inner dims differ, " + a->value.shape_string() + " x " + b->value.shape_string());
  Tensor out({m, n});
  kernels::matmul(a->value.data.data(), b->value.data.data(), out.data.data(), m, k, n);
  return t.record(std::move(out), {a, b}, [m, k, n](Node& node) {
    const Tensor& gy = node.grad;
    Node& pa = *node.parents[0];
    Node& pb = *node.parents[1];
    Tensor tmp_a({m, k});
    kernels::matmul_a_bt(gy.data.data(), pb.value.data.data(), tmp_a.data.data(), m, n, k);
    add_into(pa.grad, tmp_a);
    Tensor tmp_b({k, n});
    kernels::matmul_at_b(pa.value.data.data(), gy.data.data(), tmp_b.data.data(), k, m, n);
    add_into(pb.grad, tmp_b);
  });
}

Var add(Tape& t, Var a, Var b) {
  require(a->value.same_shape(b->value),
          "add: shape mismatch " + a->value.shape_string() + " vs " + b->value.shape_string());
  Tensor out = a->value;
  add_into(out, b->value);
  return t.record(std::move(out), {a, b}, [](Node& node) {
    add_into(node.parents[0]->grad, node.grad);
    add_into(node.parents[1]->grad, node.grad);
  });
}

Var sub(Tape& t, Var a, Var b) {
  require(a->value.same_shape(b->value),
          "sub: shape mismatch " + a->value.shape_string() + " vs " + b->value.shape_string());
  Tensor out = a->value;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b->value.data[i];
  return t.record(std::move(out), {a, b}, [](Node& node) {
    add_into(node.parents[0]->grad, node.grad);
    auto& gb = node.parents[1]->grad.data;
    for (size_t i = 0; i < gb.size(); ++i) gb[i] -= node.grad.data[i];
  });
}

Var mul(Tape& t, Var a, Var b) {
  require(a->value.same_shape(b->value),
          "mul: shape mismatch " + a->value.shape_string() + " vs " + b->value.shape_string());
  Tensor out = a->value;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->value.data[i];
  return t.record(std::move(out), {a, b}, [](Node& node) {
    auto& ga = node.parents[0]->grad.data;
    auto& gb = node.parents[1]->grad.data;
    const auto& va = node.parents[0]->value.data;
    const auto& vb = node.parents[1]->value.data;
    for (size_t i = 0; i < ga.size(); ++i) {
      ga[i] += node.grad.data[i] * vb[i];
      gb[i] += node.grad.data[i] * va[i];
    }
  });
}

Var scale(Tape& t, Var a, double s) {
  Tensor out = a->value;
  for (double& v : out.data) v *= s;
  return t.record(std::move(out), {a}, [s](Node& node) {
    auto& g = node.parents[0]->grad.data;
    for (size_t i = 0; i < g.size(); ++i) g[i] += s * node.grad.data[i];
  });
}

Var add_row_broadcast(Tape& t, Var x, Var b) {
  require_2d(x, "add_row_broadcast");
  const int64_t rows = x->value.shape[0], d = x->value.shape[1];
  require(b->value.numel() == d, "add_row_broadcast: bias numel " + std::to_string(b->value.numel()) +
                                     " vs cols " + std::to_string(d));
  Tensor out = x->value;
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < d; ++c) out.data[static_cast<size_t>(r * d + c)] += b->value.data[static_cast<size_t>(c)];
  return t.record(std::move(out), {x, b}, [rows, d](Node& node) {
    add_into(node.parents[0]->grad, node.grad);
    auto& gb = node.parents[1]->grad.data;
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < d; ++c) gb[static_cast<size_t>(c)] += node.grad.data[static_cast<size_t>(r * d + c)];
  });
}

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps) {
  require_2d(x, "layer_norm");
  const int64_t rows = x->value.shape[0], d = x->value.shape[1];
  require(d > 0, "layer_norm: zero feature dim");
  require(eps > 0, "layer_norm: eps must be positive");
  require(gain->value.numel() == d && bias->value.numel() == d,
          "layer_norm: gain/bias numel must equal " + std::to_string(d));
  Tensor out({rows, d});
  Tensor xhat({rows, d});
  std::vector<double> inv_sigma(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (int64_t c = 0; c < d; ++c) mean += x->value.at(r, c);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t c = 0; c < d; ++c) {
      double dv = x->value.at(r, c) - mean;
      var += dv * dv;
    }
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[static_cast<size_t>(r)] = is;
    for (int64_t c = 0; c < d; ++c) {
      const double xh = (x->value.at(r, c) - mean) * is;
      xhat.at(r, c) = xh;
      out.at(r, c) = gain->value.data[static_cast<size_t>(c)] * xh + bias->value.data[static_cast<size_t>(c)];
    }
  }
  return t.record(std::move(out), {x, gain, bias},
                  [rows, d, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](Node& node) {
    Node& px = *node.parents[0];
    Node& pg = *node.parents[1];
    Node& pb = *node.parents[2];
    for (int64_t r = 0; r < rows; ++r) {
      double sum_gdy = 0.0, sum_gdy_xhat = 0.0;
      for (int64_t c = 0; c < d; ++c) {
        const double gdy = pg.value.data[static_cast<size_t>(c)] * node.grad.at(r, c);
        sum_gdy += gdy;
        sum_gdy_xhat += gdy * xhat.at(r, c);
      }
      const double inv_d = 1.0 / static_cast<double>(d);
      for (int64_t c = 0; c < d; ++c) {
        const double gdy = pg.value.data[static_cast<size_t>(c)] * node.grad.at(r, c);
        px.grad.at(r, c) +=
            inv_sigma[static_cast<size_t>(r)] * (gdy - inv_d * sum_gdy - xhat.at(r, c) * inv_d * sum_gdy_xhat);
        pg.grad.data[static_cast<size_t>(c)] += node.grad.at(r, c) * xhat.at(r, c);
        pb.grad.data[static_cast<size_t>(c)] += node.grad.at(r, c);
      }
    }
  });
}

Var gelu(Tape& t, Var x) {
  Tensor out = x->value;
  for (double& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  return t.record(std::move(out), {x}, [](Node& node) {
    auto& g = node.parents[0]->grad.data;
    const auto& v = node.parents[0]->value.data;
    for (size_t i = 0; i < g.size(); ++i) {
      const double cdf = 0.5 * (1.0 + std::erf(v[i] * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v[i] * v[i]);
      g[i] += node.grad.data[i] * (cdf + v[i] * pdf);
    }
  });
}

Var tanh_op(Tape& t, Var x) {
  Tensor out = x->value;
  for (double& v : out.data) v = std::tanh(v);
  return t.record(std::move(out), {x}, [](Node& node) {
    auto& g = node.parents[0]->grad.data;
    for (size_t i = 0; i < g.size(); ++i) {
      const double y = node.value.data[i];
      g[i] += node.grad.data[i] * (1.0 - y * y);
    }
  });
}

Var transpose(Tape& t, Var x) {
  require_2d(x, "transpose");
  const int64_t r = x->value.shape[0], c = x->value.shape[1];
  Tensor out({c, r});
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out.at(j, i) = x->value.at(i, j);
  return t.record(std::move(out), {x}, [r, c](Node& node) {
    Node& p = *node.parents[0];
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < c; ++j) p.grad.at(i, j) += node.grad.at(j, i);
  });
}

Var reshape(Tape& t, Var x, std::vector<int64_t> shape) {
  require(Tensor::numel_of(shape) == x->value.numel(),
          "reshape: numel mismatch " + x->value.shape_string() + " -> " + Tensor::shape_str(shape));
  Tensor out(std::move(shape), x->value.data);
  return t.record(std::move(out), {x}, [](Node& node) {
    auto& g = node.parents[0]->grad.data;
    for (size_t i = 0; i < g.size(); ++i) g[i] += node.grad.data[i];
  });
}

Var slice_rows(Tape& t, Var x, int64_t offset, int64_t count) {
  require_2d(x, "slice_rows");
  const int64_t rows = x->value.shape[0], d = x->value.shape[1];
  require(offset >= 0 && count > 0 && offset + count <= rows,
          "slice_rows: range [" + std::to_string(offset) + "," + std::to_string(offset + count) +
              ") out of " + std::to_string(rows) + " rows");
  Tensor out({count, d});
  std::copy_n(x->value.data.begin() + offset * d, count * d, out.data.begin());
  return t.record(std::move(out), {x}, [offset, count, d](Node& node) {
    auto& g = node.parents[0]->grad.data;
    for (int64_t i = 0; i < count * d; ++i) g[static_cast<size_t>(offset * d + i)] += node.grad.data[static_cast<size_t>(i)];
  });
}

Var slice_cols(Tape& t, Var x, int64_t offset, int64_t count) {
  require_2d(x, "slice_cols");
  const int64_t rows = x->value.shape[0], d = x->value.shape[1];
  require(offset >= 0 && count > 0 && offset + count <= d,
          "slice_cols: range [" + std::to_string(offset) + "," + std::to_string(offset + count) +
              ") out of " + std::to_string(d) + " cols");
  Tensor out({rows, count});
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < count; ++c) out.at(r, c) = x->value.at(r, offset + c);
  return t.record(std::move(out), {x}, [rows, offset, count](Node& node) {
    Node& p = *node.parents[0];
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < count; ++c) p.grad.at(r, offset + c) += node.grad.at(r, c);
  });
}

Var concat_rows(Tape& t, const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_rows: empty input list");
  const int64_t d = xs[0]->value.shape[1];
  int64_t rows = 0;
  for (const auto& x : xs) {
    require(x->value.ndim() == 2 && x->value.shape[1] == d, "concat_rows: column mismatch");
    rows += x->value.shape[0];
  }
  Tensor out({rows, d});
  int64_t at = 0;
  for (const auto& x : xs) {
    std::copy(x->value.data.begin(), x->value.data.end(), out.data.begin() + at);
    at += x->value.numel();
  }
  return t.record(std::move(out), xs, [](Node& node) {
    int64_t at = 0;
    for (auto& p : node.parents) {
      for (int64_t i = 0; i < p->value.numel(); ++i) p->grad.data[static_cast<size_t>(i)] += node.grad.data[static_cast<size_t>(at + i)];
      at += p->value.numel();
    }
  });
}

Var concat_cols(Tape& t, const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_cols: empty input list");
  const int64_t rows = xs[0]->value.shape[0];
  int64_t d = 0;
  for (const auto& x : xs) {
    require(x->value.ndim() == 2 && x->value.shape[0] == rows, "concat_cols: row mismatch");
    d += x->value.shape[1];
  }
  Tensor out({rows, d});
  int64_t at = 0;
  for (const auto& x : xs) {
    const int64_t xc = x->value.shape[1];
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < xc; ++c) out.at(r, at + c) = x->value.at(r, c);
    at += xc;
  }
  return t.record(std::move(out), xs, [rows](Node& node) {
    int64_t at = 0;
    for (auto& p : node.parents) {
      const int64_t xc = p->value.shape[1];
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < xc; ++c) p->grad.at(r, c) += node.grad.at(r, at + c);
      at += xc;
    }
  });
}

Var gather_rows(Tape& t, Var x, const std::vector<int64_t>& ids) {
  require_2d(x, "gather_rows");
  const int64_t rows = x->value.shape[0], d = x->value.shape[1];
  require(!ids.empty(), "gather_rows: empty id list");
  for (int64_t id : ids) {
    if (id < 0 || id >= rows) {
      throw ShapeError("gather_rows: id " + std::to_string(id) + " out of [0," + std::to_string(rows) + ")");
    }
  }
  Tensor out({static_cast<int64_t>(ids.size()), d});
  for (size_t i = 0; i < ids.size(); ++i)
    std::copy_n(x->value.data.begin() + ids[i] * d, d, out.data.begin() + static_cast<int64_t>(i) * d);
  return t.record(std::move(out), {x}, [ids, d](Node& node) {
    Node& p = *node.parents[0];
    for (size_t i = 0; i < ids.size(); ++i)
      for (int64_t c = 0; c < d; ++c) p.grad.at(ids[i], c) += node.grad.at(static_cast<int64_t>(i), c);
  });
}

Var sum_all(Tape& t, Var x) {
  double s = 0.0;
  for (double v : x->value.data) s += v;
  return t.record(Tensor::scalar(s), {x}, [](Node& node) {
    const double g = node.grad.data[0];
    for (double& gv : node.parents[0]->grad.data) gv += g;
  });
}

Var mean_all(Tape& t, Var x) {
  const double inv = 1.0 / static_cast<double>(x->value.numel());
  double s = 0.0;
  for (double v : x->value.data) s += v;
  return t.record(Tensor::scalar(s * inv), {x}, [inv](Node& node) {
    const double g = node.grad.data[0] * inv;
    for (double& gv : node.parents[0]->grad.data) gv += g;
  });
}

Var mean_rows(Tape& t, Var x) {
  require_2d(x, "mean_rows");
  const int64_t rows = x->value.shape[0], d = x->value.shape[1];
  const double inv = 1.0 / static_cast<double>(rows);
  Tensor out({1, d});
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < d; ++c) out.data[static_cast<size_t>(c)] += x->value.at(r, c) * inv;
  return t.record(std::move(out), {x}, [rows, d, inv](Node& node) {
    Node& p = *node.parents[0];
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < d; ++c) p.grad.at(r, c) += node.grad.data[static_cast<size_t>(c)] * inv;
  });
}

Var mse(Tape& t, Var a, Var b) {
  require(a->value.same_shape(b->value),
          "mse: shape mismatch " + a->value.shape_string() + " vs " + b->value.shape_string());
  const double inv = 1.0 / static_cast<double>(a->value.numel());
  double s = 0.0;
  for (size_t i = 0; i < a->value.data.size(); ++i) {
    const double dv = a->value.data[i] - b->value.data[i];
    s += dv * dv;
  }
  return t.record(Tensor::scalar(s * inv), {a, b}, [inv](Node& node) {
    const double g = node.grad.data[0];
    auto& ga = node.parents[0]->grad.data;
    auto& gb = node.parents[1]->grad.data;
    const auto& va = node.parents[0]->value.data;
    const auto& vb = node.parents[1]->value.data;
    for (size_t i = 0; i < ga.size(); ++i) {
      const double d2 = 2.0 * inv * (va[i] - vb[i]) * g;
      ga[i] += d2;
      gb[i] -= d2;
    }
  });
}

Var softmax_rows(Tape& t, Var x, bool causal_mask) {
  require_2d(x, "softmax_rows");
  const int64_t rows = x->value.shape[0], d = x->value.shape[1];
  if (causal_mask) require(rows == d, "softmax_rows: causal mask requires square scores");
  Tensor out({rows, d});
  for (int64_t r = 0; r < rows; ++r) {
    const int64_t lim = causal_mask ? r + 1 : d;
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t c = 0; c < lim; ++c) mx = std::max(mx, x->value.at(r, c));
    double z = 0.0;
    for (int64_t c = 0; c < lim; ++c) z += std::exp(x->value.at(r, c) - mx);
    for (int64_t c = 0; c < lim; ++c) out.at(r, c) = std::exp(x->value.at(r, c) - mx) / z;
  }
  return t.record(std::move(out), {x}, [rows, d, causal_mask](Node& node) {
    Node& p = *node.parents[0];
    for (int64_t r = 0; r < rows; ++r) {
      const int64_t lim = causal_mask ? r + 1 : d;
      double dot = 0.0;
      for (int64_t c = 0; c < lim; ++c) dot += node.grad.at(r, c) * node.value.at(r, c);
      for (int64_t c = 0; c < lim; ++c) p.grad.at(r, c) += node.value.at(r, c) * (node.grad.at(r, c) - dot);
    }
  });
}

Var log_softmax_rows(Tape& t, Var x) {
  require_2d(x, "log_softmax_rows");
  const int64_t rows = x->value.shape[0], d = x->value.shape[1];
  Tensor out({rows, d});
  for (int64_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t c = 0; c < d; ++c) mx = std::max(mx, x->value.at(r, c));
    double z = 0.0;
    for (int64_t c = 0; c < d; ++c) z += std::exp(x->value.at(r, c) - mx);
    const double lse = mx + std::log(z);
    for (int64_t c = 0; c < d; ++c) out.at(r, c) = x->value.at(r, c) - lse;
  }
  return t.record(std::move(out), {x}, [rows, d](Node& node) {
    Node& p = *node.parents[0];
    for (int64_t r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (int64_t c = 0; c < d; ++c) gsum += node.grad.at(r, c);
      for (int64_t c = 0; c < d; ++c) p.grad.at(r, c) += node.grad.at(r, c) - std::exp(node.value.at(r, c)) * gsum;
    }
  });
}

Var softmax_cross_entropy(Tape& t, Var logits, const std::vector<int64_t>& targets) {
  require_2d(logits, "softmax_cross_entropy");
  const int64_t rows = logits->value.shape[0], vsize = logits->value.shape[1];
  require(static_cast<int64_t>(targets.size()) == rows,
          "softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
              std::to_string(rows) + " rows");
  for (int64_t id : targets) {
    if (id < 0 || id >= vsize) {
      throw ShapeError("softmax_cross_entropy: target id " + std::to_string(id) + " out of [0," +
                       std::to_string(vsize) + ")");
    }
  }
  Tensor probs({rows, vsize});
  double loss = 0.0;
  for (int64_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t c = 0; c < vsize; ++c) mx = std::max(mx, logits->value.at(r, c));
    double z = 0.0;
    for (int64_t c = 0; c < vsize; ++c) z += std::exp(logits->value.at(r, c) - mx);
    const double lse = mx + std::log(z);
    for (int64_t c = 0; c < vsize; ++c) probs.at(r, c) = std::exp(logits->value.at(r, c) - lse);
    loss -= logits->value.at(r, targets[static_cast<size_t>(r)]) - lse;
  }
  loss /= static_cast<double>(rows);
  return t.record(Tensor::scalar(loss), {logits},
                  [rows, vsize, targets, probs = std::move(probs)](Node& node) {
    Node& p = *node.parents[0];
    const double g = node.grad.data[0] / static_cast<double>(rows);
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t c = 0; c < vsize; ++c) {
        double dv = probs.at(r, c);
        if (c == targets[static_cast<size_t>(r)]) dv -= 1.0;
        p.grad.at(r, c) += g * dv;
      }
    }
  });
}

Var conv1d(Tape& t, Var x, Var w, Var b, int64_t kernel, int64_t stride) {
  require_2d(x, "conv1d");
  require_2d(w, "conv1d");
  const int64_t frames = x->value.shape[0], cin = x->value.shape[1];
  require(stride >= 1 && kernel >= stride, "conv1d: need kernel >= stride >= 1");
  require(w->value.shape[0] == kernel * cin,
          "conv1d: weight rows " + std::to_string(w->value.shape[0]) + " != kernel*cin " +
              std::to_string(kernel * cin));
  const int64_t cout = w->value.shape[1];
  require(b->value.numel() == cout, "conv1d: bias numel mismatch");
  const int64_t out_frames = (frames + stride - 1) / stride;
  Tensor out({out_frames, cout});
  for (int64_t of = 0; of < out_frames; ++of) {
    for (int64_t oc = 0; oc < cout; ++oc) {
      double acc = b->value.data[static_cast<size_t>(oc)];
      for (int64_t kk = 0; kk < kernel; ++kk) {
        const int64_t in_f = of * stride + kk;
        if (in_f >= frames) continue;  // zero right padding
        for (int64_t ic = 0; ic < cin; ++ic)
          acc += x->value.at(in_f, ic) * w->value.at(kk * cin + ic, oc);
      }
      out.at(of, oc) = acc;
    }
  }
  return t.record(std::move(out), {x, w, b},
                  [frames, cin, cout, kernel, stride, out_frames](Node& node) {
    Node& px = *node.parents[0];
    Node& pw = *node.parents[1];
    Node& pb = *node.parents[2];
    for (int64_t of = 0; of < out_frames; ++of) {
      for (int64_t oc = 0; oc < cout; ++oc) {
        const double gy = node.grad.at(of, oc);
        pb.grad.data[static_cast<size_t>(oc)] += gy;
        for (int64_t kk = 0; kk < kernel; ++kk) {
          const int64_t in_f = of * stride + kk;
          if (in_f >= frames) continue;
          for (int64_t ic = 0; ic < cin; ++ic) {
            px.grad.at(in_f, ic) += gy * pw.value.at(kk * cin + ic, oc);
            pw.grad.at(kk * cin + ic, oc) += gy * px.value.at(in_f, ic);
          }
        }
      }
    }
  });
}

Var upsample1d(Tape& t, Var x, Var w, Var b, int64_t stride, int64_t cout) {
  require_2d(x, "upsample1d");
  require_2d(w, "upsample1d");
  const int64_t m = x->value.shape[0], cin = x->value.shape[1];
  require(w->value.shape[0] == cin && w->value.shape[1] == stride * cout,
          "upsample1d: weight shape " + w->value.shape_string() + " != [" + std::to_string(cin) +
              "x" + std::to_string(stride * cout) + "]");
  require(b->value.numel() == cout, "upsample1d: bias numel mismatch");
  Var wide = matmul(t, x, w);                      // [M x stride*cout]
  Var flat = reshape(t, wide, {m * stride, cout});  // row-major: frame m, sub-step r
  return add_row_broadcast(t, flat, b);
}

Var straight_through(Tape& t, Var z, Tensor quantized) {
  require(z->value.same_shape(quantized),
          "straight_through: shape mismatch " + z->value.shape_string() + " vs " + quantized.shape_string());
  return t.record(std::move(quantized), {z}, [](Node& node) {
    add_into(node.parents[0]->grad, node.grad);
  });
}

}  // namespace omni::ops
