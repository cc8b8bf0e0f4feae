#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <vector>

#include "molvae/core/tensor.hpp"

// Differentiable primitives. Every op appends one tape node whose backward
// closure accumulates into its parents' gradients.
namespace molvae::ops {

template <class S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Map = Eigen::Map<EMat<S>>;
template <class S>
using CMap = Eigen::Map<const EMat<S>>;

template <class S>
CMap<S> as_eigen(const Tensor<S>& t) {
  return CMap<S>(t.data(), t.rows(), t.cols());
}
template <class S>
Map<S> as_eigen_mut(Tensor<S>& t) {
  return Map<S>(t.data(), t.rows(), t.cols());
}

inline void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

template <class S>
Var<S> matmul(Var<S> a, Var<S> b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Tensor<S> out(a.rows(), b.cols());
  as_eigen_mut(out).noalias() = as_eigen(a.val()) * as_eigen(b.val());
  return a.tape->emplace(std::move(out), {a.id, b.id}, [pa = a.id, pb = b.id](Tape<S>& t, int id) {
    const Tensor<S>& g = t.grad(id);
    if (t.requires_grad(pa))
      as_eigen_mut(t.grad(pa)).noalias() += as_eigen(g) * as_eigen(t.value(pb)).transpose();
    if (t.requires_grad(pb))
      as_eigen_mut(t.grad(pb)).noalias() += as_eigen(t.value(pa)).transpose() * as_eigen(g);
  });
}

template <class S>
Var<S> add(Var<S> a, Var<S> b) {
  require(a.val().same_shape(b.val()), "add: shape mismatch");
  Tensor<S> out(a.rows(), a.cols());
  for (long i = 0; i < out.size(); ++i) out[i] = a.val()[i] + b.val()[i];
  return a.tape->emplace(std::move(out), {a.id, b.id}, [pa = a.id, pb = b.id](Tape<S>& t, int id) {
    const Tensor<S>& g = t.grad(id);
    for (int p : {pa, pb})
      if (t.requires_grad(p)) {
        Tensor<S>& pg = t.grad(p);
        for (long i = 0; i < g.size(); ++i) pg[i] += g[i];
      }
  });
}

template <class S>
Var<S> sub(Var<S> a, Var<S> b) {
  require(a.val().same_shape(b.val()), "sub: shape mismatch");
  Tensor<S> out(a.rows(), a.cols());
  for (long i = 0; i < out.size(); ++i) out[i] = a.val()[i] - b.val()[i];
  return a.tape->emplace(std::move(out), {a.id, b.id}, [pa = a.id, pb = b.id](Tape<S>& t, int id) {
    const Tensor<S>& g = t.grad(id);
    if (t.requires_grad(pa)) {
      Tensor<S>& pg = t.grad(pa);
      for (long i = 0; i < g.size(); ++i) pg[i] += g[i];
    }
    if (t.requires_grad(pb)) {
      Tensor<S>& pg = t.grad(pb);
      for (long i = 0; i < g.size(); ++i) pg[i] -= g[i];
    }
  });
}

// a + bias broadcast over rows; bias is 1 x n.
template <class S>
Var<S> add_rowvec(Var<S> a, Var<S> bias) {
  require(bias.rows() == 1 && bias.cols() == a.cols(), "add_rowvec: bad bias shape");
  Tensor<S> out(a.rows(), a.cols());
  for (long r = 0; r < a.rows(); ++r)
    for (long c = 0; c < a.cols(); ++c) out.at(r, c) = a.val().at(r, c) + bias.val()[c];
  return a.tape->emplace(std::move(out), {a.id, bias.id},
                         [pa = a.id, pb = bias.id](Tape<S>& t, int id) {
                           const Tensor<S>& g = t.grad(id);
                           if (t.requires_grad(pa)) {
                             Tensor<S>& pg = t.grad(pa);
                             for (long i = 0; i < g.size(); ++i) pg[i] += g[i];
                           }
                           if (t.requires_grad(pb)) {
                             Tensor<S>& pg = t.grad(pb);
                             for (long r = 0; r < g.rows(); ++r)
                               for (long c = 0; c < g.cols(); ++c) pg[c] += g.at(r, c);
                           }
                         });
}

template <class S>
Var<S> mul(Var<S> a, Var<S> b) {
  require(a.val().same_shape(b.val()), "mul: shape mismatch");
  Tensor<S> out(a.rows(), a.cols());
  for (long i = 0; i < out.size(); ++i) out[i] = a.val()[i] * b.val()[i];
  return a.tape->emplace(std::move(out), {a.id, b.id}, [pa = a.id, pb = b.id](Tape<S>& t, int id) {
    const Tensor<S>& g = t.grad(id);
    if (t.requires_grad(pa)) {
      Tensor<S>& pg = t.grad(pa);
      const Tensor<S>& vb = t.value(pb);
      for (long i = 0; i < g.size(); ++i) pg[i] += g[i] * vb[i];
    }
    if (t.requires_grad(pb)) {
      Tensor<S>& pg = t.grad(pb);
      const Tensor<S>& va = t.value(pa);
      for (long i = 0; i < g.size(); ++i) pg[i] += g[i] * va[i];
    }
  });
}

template <class S>
Var<S> scale(Var<S> a, S factor) {
  Tensor<S> out(a.rows(), a.cols());
  for (long i = 0; i < out.size(); ++i) out[i] = a.val()[i] * factor;
  return a.tape->emplace(std::move(out), {a.id}, [pa = a.id, factor](Tape<S>& t, int id) {
    const Tensor<S>& g = t.grad(id);
    if (!t.requires_grad(pa)) return;
    Tensor<S>& pg = t.grad(pa);
    for (long i = 0; i < g.size(); ++i) pg[i] += g[i] * factor;
  });
}

template <class S>
Var<S> add_const(Var<S> a, S c) {
  Tensor<S> out(a.rows(), a.cols());
  for (long i = 0; i < out.size(); ++i) out[i] = a.val()[i] + c;
  return a.tape->emplace(std::move(out), {a.id}, [pa = a.id](Tape<S>& t, int id) {
    const Tensor<S>& g = t.grad(id);
    if (!t.requires_grad(pa)) return;
    Tensor<S>& pg = t.grad(pa);
    for (long i = 0; i < g.size(); ++i) pg[i] += g[i];
  });
}

template <class S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  require(!parts.empty(), "concat_cols: empty input");
  long rows = parts[0].rows(), cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols: row mismatch");
    cols += p.cols();
  }
  Tensor<S> out(rows, cols);
  std::vector<int> ids;
  std::vector<long> widths;
  long off = 0;
  for (const auto& p : parts) {
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < p.cols(); ++c) out.at(r, off + c) = p.val().at(r, c);
    ids.push_back(p.id);
    widths.push_back(p.cols());
    off += p.cols();
  }
  return parts[0].tape->emplace(std::move(out), ids, [ids, widths](Tape<S>& t, int id) {
    const Tensor<S>& g = t.grad(id);
    long off2 = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) {
        Tensor<S>& pg = t.grad(ids[k]);
        for (long r = 0; r < g.rows(); ++r)
          for (long c = 0; c < widths[k]; ++c) pg.at(r, c) += g.at(r, off2 + c);
      }
      off2 += widths[k];
    }
  });
}

template <class S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  require(!parts.empty(), "concat_rows: empty input");
  long cols = parts[0].cols(), rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows: column mismatch");
    rows += p.rows();
  }
  Tensor<S> out(rows, cols);
  std::vector<int> ids;
  std::vector<long> heights;
  long off = 0;
  for (const auto& p : parts) {
    for (long r = 0; r < p.rows(); ++r)
      for (long c = 0; c < cols; ++c) out.at(off + r, c) = p.val().at(r, c);
    ids.push_back(p.id);
    heights.push_back(p.rows());
    off += p.rows();
  }
  return parts[0].tape->emplace(std::move(out), ids, [ids, heights](Tape<S>& t, int id) {
    const Tensor<S>& g = t.grad(id);
    long off2 = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) {
        Tensor<S>& pg = t.grad(ids[k]);
        for (long r = 0; r < heights[k]; ++r)
          for (long c = 0; c < g.cols(); ++c) pg.at(r, c) += g.at(off2 + r, c);
      }
      off2 += heights[k];
    }
  });
}

template <class S>
Var<S> slice_rows(Var<S> a, long start, long len) {
  require(start >= 0 && start + len <= a.rows(), "slice_rows: out of range");
  Tensor<S> out(len, a.cols());
  for (long r = 0; r < len; ++r)
    for (long c = 0; c < a.cols(); ++c) out.at(r, c) = a.val().at(start + r, c);
  return a.tape->emplace(std::move(out), {a.id}, [pa = a.id, start](Tape<S>& t, int id) {
    if (!t.requires_grad(pa)) return;
    const Tensor<S>& g = t.grad(id);
    Tensor<S>& pg = t.grad(pa);
    for (long r = 0; r < g.rows(); ++r)
      for (long c = 0; c < g.cols(); ++c) pg.at(start + r, c) += g.at(r, c);
  });
}

template <class S>
Var<S> gather_rows(Var<S> a, std::vector<int> indices) {
  Tensor<S> out(static_cast<long>(indices.size()), a.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    require(indices[r] >= 0 && indices[r] < a.rows(), "gather_rows: index out of range");
    for (long c = 0; c < a.cols(); ++c) out.at(r, c) = a.val().at(indices[r], c);
  }
  return a.tape->emplace(std::move(out), {a.id}, [pa = a.id, idx = std::move(indices)](Tape<S>& t, int id) {
    if (!t.requires_grad(pa)) return;
    const Tensor<S>& g = t.grad(id);
    Tensor<S>& pg = t.grad(pa);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (long c = 0; c < g.cols(); ++c) pg.at(idx[r], c) += g.at(r, c);
  });
}

// out[j] = sum of src rows i with indices[i] == j, j in [0, out_rows); also
// serves as a segment sum.
template <class S>
Var<S> scatter_add_rows(Var<S> src, std::vector<int> indices, long out_rows) {
  require(static_cast<long>(indices.size()) == src.rows(), "scatter_add_rows: index count");
  Tensor<S> out(out_rows, src.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    require(indices[r] >= 0 && indices[r] < out_rows, "scatter_add_rows: index out of range");
    for (long c = 0; c < src.cols(); ++c) out.at(indices[r], c) += src.val().at(r, c);
  }
  return src.tape->emplace(std::move(out), {src.id},
                           [ps = src.id, idx = std::move(indices)](Tape<S>& t, int id) {
                             if (!t.requires_grad(ps)) return;
                             const Tensor<S>& g = t.grad(id);
                             Tensor<S>& pg = t.grad(ps);
                             for (std::size_t r = 0; r < idx.size(); ++r)
                               for (long c = 0; c < g.cols(); ++c) pg.at(r, c) += g.at(idx[r], c);
                           });
}

template <class S>
Var<S> sum_all(Var<S> a) {
  S s = S(0);
  for (long i = 0; i < a.val().size(); ++i) s += a.val()[i];
  return a.tape->emplace(Tensor<S>::scalar(s), {a.id}, [pa = a.id](Tape<S>& t, int id) {
    if (!t.requires_grad(pa)) return;
    S g = t.grad(id)[0];
    Tensor<S>& pg = t.grad(pa);
    for (long i = 0; i < pg.size(); ++i) pg[i] += g;
  });
}

template <class S, class Fwd, class Dfn>
Var<S> unary_elementwise(Var<S> a, Fwd f, Dfn dfdx_from_xy) {
  Tensor<S> out(a.rows(), a.cols());
  for (long i = 0; i < out.size(); ++i) out[i] = f(a.val()[i]);
  return a.tape->emplace(std::move(out), {a.id}, [pa = a.id, dfdx_from_xy](Tape<S>& t, int id) {
    if (!t.requires_grad(pa)) return;
    const Tensor<S>& g = t.grad(id);
    const Tensor<S>& x = t.value(pa);
    const Tensor<S>& y = t.value(id);
    Tensor<S>& pg = t.grad(pa);
    for (long i = 0; i < g.size(); ++i) pg[i] += g[i] * dfdx_from_xy(x[i], y[i]);
  });
}

template <class S>
Var<S> exp_(Var<S> a) {
  return unary_elementwise(
      a, [](S x) { return std::exp(x); }, [](S, S y) { return y; });
}

template <class S>
Var<S> log_(Var<S> a) {
  return unary_elementwise(
      a, [](S x) { return std::log(x); }, [](S x, S) { return S(1) / x; });
}

// log(max(x, eps)); zero gradient below eps. `clamp_hits` counts how often
// the floor engaged.
template <class S>
Var<S> clamped_log(Var<S> a, S eps, std::atomic<long>* clamp_hits = nullptr) {
  long hits = 0;
  Tensor<S> out(a.rows(), a.cols());
  for (long i = 0; i < out.size(); ++i) {
    S x = a.val()[i];
    if (x < eps) {
      ++hits;
      x = eps;
    }
    out[i] = std::log(x);
  }
  if (clamp_hits && hits) clamp_hits->fetch_add(hits, std::memory_order_relaxed);
  return a.tape->emplace(std::move(out), {a.id}, [pa = a.id, eps](Tape<S>& t, int id) {
    if (!t.requires_grad(pa)) return;
    const Tensor<S>& g = t.grad(id);
    const Tensor<S>& x = t.value(pa);
    Tensor<S>& pg = t.grad(pa);
    for (long i = 0; i < g.size(); ++i)
      if (x[i] >= eps) pg[i] += g[i] / x[i];
  });
}

template <class S>
Var<S> tanh_(Var<S> a) {
  return unary_elementwise(
      a, [](S x) { return std::tanh(x); }, [](S, S y) { return S(1) - y * y; });
}

template <class S>
Var<S> sigmoid_(Var<S> a) {
  return unary_elementwise(
      a, [](S x) { return S(1) / (S(1) + std::exp(-x)); },
      [](S, S y) { return y * (S(1) - y); });
}

inline constexpr double kLeakySlope = 0.01;

template <class S>
Var<S> leaky_relu(Var<S> a) {
  return unary_elementwise(
      a, [](S x) { return x > S(0) ? x : S(kLeakySlope) * x; },
      [](S x, S) { return x > S(0) ? S(1) : S(kLeakySlope); });
}

template <class S>
Var<S> clamp(Var<S> a, S lo, S hi) {
  return unary_elementwise(
      a, [lo, hi](S x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](S x, S) { return (x >= lo && x <= hi) ? S(1) : S(0); });
}

// Row-wise softmax restricted to mask == 1 entries; masked entries get
// probability exactly 0 and no gradient. Every row needs at least one
// unmasked entry.
template <class S>
Var<S> softmax_masked(Var<S> logits, Tensor<S> mask) {
  require(logits.val().same_shape(mask), "softmax_masked: mask shape mismatch");
  Tensor<S> out(logits.rows(), logits.cols());
  for (long r = 0; r < logits.rows(); ++r) {
    S mx = -std::numeric_limits<S>::infinity();
    for (long c = 0; c < logits.cols(); ++c)
      if (mask.at(r, c) != S(0)) mx = std::max(mx, logits.val().at(r, c));
    require(mx > -std::numeric_limits<S>::infinity(), "softmax_masked: fully masked row");
    S z = S(0);
    for (long c = 0; c < logits.cols(); ++c)
      if (mask.at(r, c) != S(0)) z += std::exp(logits.val().at(r, c) - mx);
    for (long c = 0; c < logits.cols(); ++c)
      out.at(r, c) = mask.at(r, c) != S(0) ? std::exp(logits.val().at(r, c) - mx) / z : S(0);
  }
  return logits.tape->emplace(std::move(out), {logits.id},
                              [pl = logits.id, mask](Tape<S>& t, int id) {
                                if (!t.requires_grad(pl)) return;
                                const Tensor<S>& g = t.grad(id);
                                const Tensor<S>& y = t.value(id);
                                Tensor<S>& pg = t.grad(pl);
                                for (long r = 0; r < g.rows(); ++r) {
                                  S dot = S(0);
                                  for (long c = 0; c < g.cols(); ++c)
                                    dot += g.at(r, c) * y.at(r, c);
                                  for (long c = 0; c < g.cols(); ++c)
                                    if (mask.at(r, c) != S(0))
                                      pg.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
                                }
                              });
}

// Numerically stable binary cross entropy from logits, elementwise:
// max(x,0) - x*t + log(1 + exp(-|x|)).
template <class S>
Var<S> bce_logits(Var<S> logits, Tensor<S> targets) {
  require(logits.val().same_shape(targets), "bce_logits: target shape mismatch");
  Tensor<S> out(logits.rows(), logits.cols());
  for (long i = 0; i < out.size(); ++i) {
    S x = logits.val()[i];
    S t = targets[i];
    out[i] = std::max(x, S(0)) - x * t + std::log1p(std::exp(-std::abs(x)));
  }
  return logits.tape->emplace(std::move(out), {logits.id},
                              [pl = logits.id, targets](Tape<S>& t, int id) {
                                if (!t.requires_grad(pl)) return;
                                const Tensor<S>& g = t.grad(id);
                                const Tensor<S>& x = t.value(pl);
                                Tensor<S>& pg = t.grad(pl);
                                for (long i = 0; i < g.size(); ++i) {
                                  S sig = S(1) / (S(1) + std::exp(-x[i]));
                                  pg[i] += g[i] * (sig - targets[i]);
                                }
                              });
}

struct BatchNormConfig {
  double momentum = 0.9;
  double eps = 1e-5;
};

// Batch normalization over rows. Training mode uses batch statistics and
// updates the running averages in place; eval mode uses the running values.
template <class S>
Var<S> batch_norm(Var<S> x, Var<S> gamma, Var<S> beta, Tensor<S>& running_mean,
                  Tensor<S>& running_var, bool training, BatchNormConfig cfg = {}) {
  long n = x.rows(), d = x.cols();
  require(gamma.rows() == 1 && gamma.cols() == d, "batch_norm: gamma shape");
  require(beta.rows() == 1 && beta.cols() == d, "batch_norm: beta shape");
  require(running_mean.cols() == d && running_var.cols() == d, "batch_norm: stats shape");

  Tensor<S> mean(1, d), var(1, d);
  if (training) {
    require(n >= 1, "batch_norm: empty batch");
    for (long c = 0; c < d; ++c) {
      S m = S(0);
      for (long r = 0; r < n; ++r) m += x.val().at(r, c);
      m /= S(n);
      S v = S(0);
      for (long r = 0; r < n; ++r) {
        S dlt = x.val().at(r, c) - m;
        v += dlt * dlt;
      }
      v /= S(n);
      mean[c] = m;
      var[c] = v;
      running_mean[c] = S(cfg.momentum) * running_mean[c] + S(1 - cfg.momentum) * m;
      running_var[c] = S(cfg.momentum) * running_var[c] + S(1 - cfg.momentum) * v;
    }
  } else {
    for (long c = 0; c < d; ++c) {
      mean[c] = running_mean[c];
      var[c] = running_var[c];
    }
  }

  Tensor<S> xhat(n, d), out(n, d);
  Tensor<S> inv_std(1, d);
  for (long c = 0; c < d; ++c) inv_std[c] = S(1) / std::sqrt(var[c] + S(cfg.eps));
  for (long r = 0; r < n; ++r)
    for (long c = 0; c < d; ++c) {
      xhat.at(r, c) = (x.val().at(r, c) - mean[c]) * inv_std[c];
      out.at(r, c) = gamma.val()[c] * xhat.at(r, c) + beta.val()[c];
    }

  return x.tape->emplace(
      std::move(out), {x.id, gamma.id, beta.id},
      [px = x.id, pg = gamma.id, pb = beta.id, xhat, inv_std, training](Tape<S>& t, int id) {
        const Tensor<S>& g = t.grad(id);
        long n2 = g.rows(), d2 = g.cols();
        if (t.requires_grad(pb)) {
          Tensor<S>& bg = t.grad(pb);
          for (long r = 0; r < n2; ++r)
            for (long c = 0; c < d2; ++c) bg[c] += g.at(r, c);
        }
        if (t.requires_grad(pg)) {
          Tensor<S>& gg = t.grad(pg);
          for (long r = 0; r < n2; ++r)
            for (long c = 0; c < d2; ++c) gg[c] += g.at(r, c) * xhat.at(r, c);
        }
        if (!t.requires_grad(px)) return;
        Tensor<S>& xg = t.grad(px);
        const Tensor<S>& gam = t.value(pg);
        if (!training) {
          for (long r = 0; r < n2; ++r)
            for (long c = 0; c < d2; ++c) xg.at(r, c) += g.at(r, c) * gam[c] * inv_std[c];
          return;
        }
        for (long c = 0; c < d2; ++c) {
          S sum_dy = S(0), sum_dy_xhat = S(0);
          for (long r = 0; r < n2; ++r) {
            S dxhat = g.at(r, c) * gam[c];
            sum_dy += dxhat;
            sum_dy_xhat += dxhat * xhat.at(r, c);
          }
          for (long r = 0; r < n2; ++r) {
            S dxhat = g.at(r, c) * gam[c];
            xg.at(r, c) += inv_std[c] *
                           (dxhat - (sum_dy + xhat.at(r, c) * sum_dy_xhat) / S(n2));
          }
        }
      });
}

}  // namespace molvae::ops
