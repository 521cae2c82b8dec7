#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cagnn/matrix.hpp"
#include "cagnn/rng.hpp"
#include "cagnn/sparse.hpp"

namespace cagnn::ad {

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // scatters this->grad into parent grads

  void ensure_grad() {
    if (!grad.same_shape(value)) grad = Matrix(value.rows, value.cols);
  }
};

}  // namespace detail

// Handle to a node of the reverse-mode tape. Copying a Tensor aliases the
// node; fresh nodes are produced by the free-function ops below. The graph
// is rebuilt every forward pass, so non-leaf gradients never go stale.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix m) {
    Tensor t;
    t.n_ = std::make_shared<detail::Node>();
    t.n_->value = std::move(m);
    return t;
  }

  static Tensor param(Matrix m) {
    Tensor t = constant(std::move(m));
    t.n_->requires_grad = true;
    t.n_->ensure_grad();
    return t;
  }

  bool defined() const { return static_cast<bool>(n_); }
  const Matrix& value() const { return n_->value; }
  Matrix& value() { return n_->value; }
  Matrix& grad() {
    n_->ensure_grad();
    return n_->grad;
  }
  bool requires_grad() const { return n_->requires_grad; }
  int rows() const { return n_->value.rows; }
  int cols() const { return n_->value.cols; }
  void zero_grad() {
    n_->ensure_grad();
    n_->grad.fill(0.0);
  }
  std::shared_ptr<detail::Node> node() const { return n_; }

  // Reverse pass from this scalar: topological order over the subgraph that
  // reaches a gradient-requiring leaf, each node visited exactly once, with
  // gradients accumulating additively at fan-out points.
  void backward() const {
    if (!n_ || n_->value.rows != 1 || n_->value.cols != 1)
      throw std::logic_error("backward: output must be a 1x1 scalar");
    if (!n_->requires_grad) return;
    n_->ensure_grad();
    n_->grad.fill(0.0);
    n_->grad(0, 0) = 1.0;

    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, size_t>> stack{{n_.get(), 0}};
    seen.insert(n_.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        detail::Node* p = node->parents[next++].get();
        if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    // Post-order pushes parents first; walk backwards so every node's grad is
    // complete before it is propagated.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      detail::Node* node = *it;
      if (node->backprop) node->backprop(*node);
    }
  }

 private:
  std::shared_ptr<detail::Node> n_;
};

namespace detail {

inline Tensor make_op(Matrix value, std::vector<Tensor> inputs,
                      std::function<void(Node&)> backprop) {
  Tensor t = Tensor::constant(std::move(value));
  Node& n = *t.node();
  for (const Tensor& in : inputs) {
    n.parents.push_back(in.node());
    n.requires_grad = n.requires_grad || in.requires_grad();
  }
  if (n.requires_grad) {
    for (auto& p : n.parents)
      if (p->requires_grad) p->ensure_grad();
    n.backprop = std::move(backprop);
  }
  return t;
}

inline Node& parent(Node& n, size_t i) { return *n.parents[i]; }

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw std::logic_error("matmul: inner dimensions differ");
  return detail::make_op(matmul(a.value(), b.value()), {a, b}, [](detail::Node& n) {
    auto& a = detail::parent(n, 0);
    auto& b = detail::parent(n, 1);
    if (a.requires_grad) matmul_nt_acc(n.grad, b.value, a.grad);
    if (b.requires_grad) matmul_tn_acc(a.value, n.grad, b.grad);
  });
}

// s * x with s a fixed sparse operator (never differentiated).
inline Tensor spmm(const SparseMatrix& s, const Tensor& x) {
  if (s.cols != x.rows()) throw std::logic_error("spmm: dimension mismatch");
  Matrix out;
  s.multiply_into(x.value(), out);
  return detail::make_op(std::move(out), {x}, [&s](detail::Node& n) {
    auto& x = detail::parent(n, 0);
    if (x.requires_grad) s.multiply_transpose_acc(n.grad, x.grad);
  });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.value().same_shape(b.value())) throw std::logic_error("add: shape mismatch");
  Matrix out = a.value();
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.value().data[i];
  return detail::make_op(std::move(out), {a, b}, [](detail::Node& n) {
    for (int k = 0; k < 2; ++k) {
      auto& p = detail::parent(n, k);
      if (p.requires_grad) add_scaled(p.grad, n.grad, 1.0);
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  if (!a.value().same_shape(b.value())) throw std::logic_error("sub: shape mismatch");
  Matrix out = a.value();
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.value().data[i];
  return detail::make_op(std::move(out), {a, b}, [](detail::Node& n) {
    auto& a = detail::parent(n, 0);
    auto& b = detail::parent(n, 1);
    if (a.requires_grad) add_scaled(a.grad, n.grad, 1.0);
    if (b.requires_grad) add_scaled(b.grad, n.grad, -1.0);
  });
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
  if (!a.value().same_shape(b.value())) throw std::logic_error("hadamard: shape mismatch");
  Matrix out = a.value();
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.value().data[i];
  return detail::make_op(std::move(out), {a, b}, [](detail::Node& n) {
    auto& a = detail::parent(n, 0);
    auto& b = detail::parent(n, 1);
    for (size_t i = 0; i < n.grad.data.size(); ++i) {
      if (a.requires_grad) a.grad.data[i] += n.grad.data[i] * b.value.data[i];
      if (b.requires_grad) b.grad.data[i] += n.grad.data[i] * a.value.data[i];
    }
  });
}

// x * s with s a learnable 1x1 scalar.
inline Tensor scale(const Tensor& x, const Tensor& s) {
  if (s.rows() != 1 || s.cols() != 1) throw std::logic_error("scale: scalar must be 1x1");
  Matrix out = x.value();
  const double c = s.value()(0, 0);
  for (double& v : out.data) v *= c;
  return detail::make_op(std::move(out), {x, s}, [](detail::Node& n) {
    auto& x = detail::parent(n, 0);
    auto& s = detail::parent(n, 1);
    const double c = s.value(0, 0);
    if (x.requires_grad) add_scaled(x.grad, n.grad, c);
    if (s.requires_grad) {
      double acc = 0.0;
      for (size_t i = 0; i < n.grad.data.size(); ++i) acc += n.grad.data[i] * x.value.data[i];
      s.grad(0, 0) += acc;
    }
  });
}

inline Tensor scale_const(const Tensor& x, double c) {
  Matrix out = x.value();
  for (double& v : out.data) v *= c;
  return detail::make_op(std::move(out), {x}, [c](detail::Node& n) {
    auto& x = detail::parent(n, 0);
    if (x.requires_grad) add_scaled(x.grad, n.grad, c);
  });
}

// x + b with b a 1 x cols bias row broadcast over rows.
inline Tensor add_rowvec(const Tensor& x, const Tensor& b) {
  if (b.rows() != 1 || b.cols() != x.cols()) throw std::logic_error("add_rowvec: bad bias shape");
  Matrix out = x.value();
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out(i, j) += b.value()(0, j);
  return detail::make_op(std::move(out), {x, b}, [](detail::Node& n) {
    auto& x = detail::parent(n, 0);
    auto& b = detail::parent(n, 1);
    if (x.requires_grad) add_scaled(x.grad, n.grad, 1.0);
    if (b.requires_grad)
      for (int i = 0; i < n.grad.rows; ++i)
        for (int j = 0; j < n.grad.cols; ++j) b.grad(0, j) += n.grad(i, j);
  });
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw std::logic_error("concat_cols: row mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  for (int i = 0; i < out.rows; ++i) {
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a.value()(i, j);
    for (int j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b.value()(i, j);
  }
  return detail::make_op(std::move(out), {a, b}, [](detail::Node& n) {
    auto& a = detail::parent(n, 0);
    auto& b = detail::parent(n, 1);
    const int ca = a.value.cols;
    for (int i = 0; i < n.grad.rows; ++i) {
      if (a.requires_grad)
        for (int j = 0; j < ca; ++j) a.grad(i, j) += n.grad(i, j);
      if (b.requires_grad)
        for (int j = 0; j < b.value.cols; ++j) b.grad(i, j) += n.grad(i, ca + j);
    }
  });
}

inline Tensor slice_cols(const Tensor& x, int c0, int c1) {
  if (c0 < 0 || c1 > x.cols() || c0 >= c1) throw std::logic_error("slice_cols: bad range");
  Matrix out(x.rows(), c1 - c0);
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out(i, j) = x.value()(i, c0 + j);
  return detail::make_op(std::move(out), {x}, [c0](detail::Node& n) {
    auto& x = detail::parent(n, 0);
    if (!x.requires_grad) return;
    for (int i = 0; i < n.grad.rows; ++i)
      for (int j = 0; j < n.grad.cols; ++j) x.grad(i, c0 + j) += n.grad(i, j);
  });
}

// Row scaling: out[i, :] = v[i] * x[i, :] with v an N x 1 column.
inline Tensor broadcast_col(const Tensor& v, const Tensor& x) {
  if (v.cols() != 1 || v.rows() != x.rows()) throw std::logic_error("broadcast_col: bad shapes");
  Matrix out = x.value();
  for (int i = 0; i < out.rows; ++i) {
    const double c = v.value()(i, 0);
    double* r = out.row_ptr(i);
    for (int j = 0; j < out.cols; ++j) r[j] *= c;
  }
  return detail::make_op(std::move(out), {v, x}, [](detail::Node& n) {
    auto& v = detail::parent(n, 0);
    auto& x = detail::parent(n, 1);
    for (int i = 0; i < n.grad.rows; ++i) {
      const double c = v.value(i, 0);
      double dot = 0.0;
      for (int j = 0; j < n.grad.cols; ++j) {
        if (x.requires_grad) x.grad(i, j) += c * n.grad(i, j);
        dot += n.grad(i, j) * x.value(i, j);
      }
      if (v.requires_grad) v.grad(i, 0) += dot;
    }
  });
}

inline Tensor relu(const Tensor& x) {
  Matrix out = x.value();
  for (double& v : out.data)
    if (v < 0.0) v = 0.0;
  return detail::make_op(std::move(out), {x}, [](detail::Node& n) {
    auto& x = detail::parent(n, 0);
    if (!x.requires_grad) return;
    for (size_t i = 0; i < n.grad.data.size(); ++i)
      if (x.value.data[i] > 0.0) x.grad.data[i] += n.grad.data[i];
  });
}

inline Tensor leaky_relu(const Tensor& x, double slope) {
  Matrix out = x.value();
  for (double& v : out.data)
    if (v < 0.0) v *= slope;
  return detail::make_op(std::move(out), {x}, [slope](detail::Node& n) {
    auto& x = detail::parent(n, 0);
    if (!x.requires_grad) return;
    for (size_t i = 0; i < n.grad.data.size(); ++i)
      x.grad.data[i] += n.grad.data[i] * (x.value.data[i] > 0.0 ? 1.0 : slope);
  });
}

inline Tensor sigmoid(const Tensor& x) {
  Matrix out = x.value();
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return detail::make_op(std::move(out), {x}, [](detail::Node& n) {
    auto& x = detail::parent(n, 0);
    if (!x.requires_grad) return;
    for (size_t i = 0; i < n.grad.data.size(); ++i) {
      const double y = n.value.data[i];
      x.grad.data[i] += n.grad.data[i] * y * (1.0 - y);
    }
  });
}

inline Tensor log_softmax_rows(const Tensor& x) {
  Matrix out = x.value();
  for (int i = 0; i < out.rows; ++i) {
    double* r = out.row_ptr(i);
    double mx = r[0];
    for (int j = 1; j < out.cols; ++j) mx = std::max(mx, r[j]);
    double lse = 0.0;
    for (int j = 0; j < out.cols; ++j) lse += std::exp(r[j] - mx);
    lse = mx + std::log(lse);
    for (int j = 0; j < out.cols; ++j) r[j] -= lse;
  }
  return detail::make_op(std::move(out), {x}, [](detail::Node& n) {
    auto& x = detail::parent(n, 0);
    if (!x.requires_grad) return;
    for (int i = 0; i < n.grad.rows; ++i) {
      double gsum = 0.0;
      for (int j = 0; j < n.grad.cols; ++j) gsum += n.grad(i, j);
      for (int j = 0; j < n.grad.cols; ++j)
        x.grad(i, j) += n.grad(i, j) - std::exp(n.value(i, j)) * gsum;
    }
  });
}

// Rows rescaled to unit Euclidean norm; exactly-zero rows pass through (and
// receive zero gradient).
inline Tensor l2_normalize_rows(const Tensor& x) {
  Matrix out = x.value();
  std::vector<double> norms(out.rows, 0.0);
  for (int i = 0; i < out.rows; ++i) {
    double s = 0.0;
    const double* r = out.row_ptr(i);
    for (int j = 0; j < out.cols; ++j) s += r[j] * r[j];
    norms[i] = std::sqrt(s);
    if (norms[i] > 0.0) {
      double* w = out.row_ptr(i);
      for (int j = 0; j < out.cols; ++j) w[j] /= norms[i];
    }
  }
  return detail::make_op(std::move(out), {x}, [norms](detail::Node& n) {
    auto& x = detail::parent(n, 0);
    if (!x.requires_grad) return;
    for (int i = 0; i < n.grad.rows; ++i) {
      if (norms[i] == 0.0) continue;
      double dot = 0.0;
      for (int j = 0; j < n.grad.cols; ++j) dot += n.grad(i, j) * n.value(i, j);
      for (int j = 0; j < n.grad.cols; ++j)
        x.grad(i, j) += (n.grad(i, j) - n.value(i, j) * dot) / norms[i];
    }
  });
}

// Per-row standardization with learnable gain and bias (both 1 x cols).
inline Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                              double eps = 1e-5) {
  if (gain.rows() != 1 || gain.cols() != x.cols() || bias.rows() != 1 || bias.cols() != x.cols())
    throw std::logic_error("layer_norm_rows: bad gain/bias shape");
  const int d = x.cols();
  Matrix xhat(x.rows(), d);
  std::vector<double> inv_std(x.rows());
  for (int i = 0; i < x.rows(); ++i) {
    const double* r = x.value().row_ptr(i);
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += r[j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (r[j] - mu) * (r[j] - mu);
    var /= d;
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < d; ++j) xhat(i, j) = (r[j] - mu) * inv_std[i];
  }
  Matrix out(x.rows(), d);
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < d; ++j) out(i, j) = xhat(i, j) * gain.value()(0, j) + bias.value()(0, j);
  return detail::make_op(std::move(out), {x, gain, bias},
                         [xhat, inv_std](detail::Node& n) {
                           auto& x = detail::parent(n, 0);
                           auto& gain = detail::parent(n, 1);
                           auto& bias = detail::parent(n, 2);
                           const int d = n.value.cols;
                           for (int i = 0; i < n.value.rows; ++i) {
                             for (int j = 0; j < d; ++j) {
                               if (gain.requires_grad) gain.grad(0, j) += n.grad(i, j) * xhat(i, j);
                               if (bias.requires_grad) bias.grad(0, j) += n.grad(i, j);
                             }
                             if (!x.requires_grad) continue;
                             double m1 = 0.0, m2 = 0.0;  // means of dxhat and dxhat*xhat
                             for (int j = 0; j < d; ++j) {
                               const double dxh = n.grad(i, j) * gain.value(0, j);
                               m1 += dxh;
                               m2 += dxh * xhat(i, j);
                             }
                             m1 /= d;
                             m2 /= d;
                             for (int j = 0; j < d; ++j) {
                               const double dxh = n.grad(i, j) * gain.value(0, j);
                               x.grad(i, j) += (dxh - m1 - xhat(i, j) * m2) * inv_std[i];
                             }
                           }
                         });
}

// Inverted dropout: keep with probability 1-p and scale kept entries by
// 1/(1-p); identity when not training or p == 0.
inline Tensor dropout(const Tensor& x, double p, bool training, uint64_t seed) {
  if (p < 0.0 || p >= 1.0) throw std::logic_error("dropout: p must be in [0, 1)");
  if (!training || p == 0.0) return x;
  Rng rng(mix_seed(seed, 0xd70b));
  auto mask = std::make_shared<std::vector<double>>(x.value().size());
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix out = x.value();
  for (size_t i = 0; i < out.data.size(); ++i) {
    (*mask)[i] = (rng.uniform() >= p) ? keep_scale : 0.0;
    out.data[i] *= (*mask)[i];
  }
  return detail::make_op(std::move(out), {x}, [mask](detail::Node& n) {
    auto& x = detail::parent(n, 0);
    if (!x.requires_grad) return;
    for (size_t i = 0; i < n.grad.data.size(); ++i)
      x.grad.data[i] += n.grad.data[i] * (*mask)[i];
  });
}

inline Tensor sum(const Tensor& x) {
  Matrix out(1, 1);
  for (double v : x.value().data) out(0, 0) += v;
  return detail::make_op(std::move(out), {x}, [](detail::Node& n) {
    auto& x = detail::parent(n, 0);
    if (x.requires_grad) add_scaled(x.grad, Matrix(x.value.rows, x.value.cols, n.grad(0, 0)), 1.0);
  });
}

// Mean negative log-likelihood of `labels` over the rows listed in `mask`,
// taking raw logits (softmax applied internally).
inline Tensor masked_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                                   const std::vector<int>& mask) {
  if (mask.empty()) throw std::logic_error("masked_cross_entropy: empty mask");
  if (static_cast<int>(labels.size()) != logits.rows())
    throw std::logic_error("masked_cross_entropy: labels/logits mismatch");
  const int c = logits.cols();
  auto probs = std::make_shared<Matrix>(static_cast<int>(mask.size()), c);
  auto mask_copy = std::make_shared<std::vector<int>>(mask);
  auto label_copy = std::make_shared<std::vector<int>>(labels);
  double loss = 0.0;
  for (size_t m = 0; m < mask.size(); ++m) {
    const int v = mask[m];
    const double* r = logits.value().row_ptr(v);
    double mx = r[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, r[j]);
    double lse = 0.0;
    for (int j = 0; j < c; ++j) lse += std::exp(r[j] - mx);
    lse = mx + std::log(lse);
    for (int j = 0; j < c; ++j) (*probs)(static_cast<int>(m), j) = std::exp(r[j] - lse);
    loss -= r[labels[v]] - lse;
  }
  Matrix out(1, 1);
  out(0, 0) = loss / static_cast<double>(mask.size());
  return detail::make_op(std::move(out), {logits},
                         [probs, mask_copy, label_copy](detail::Node& n) {
                           auto& x = detail::parent(n, 0);
                           if (!x.requires_grad) return;
                           const double g = n.grad(0, 0) / static_cast<double>(mask_copy->size());
                           for (size_t m = 0; m < mask_copy->size(); ++m) {
                             const int v = (*mask_copy)[m];
                             for (int j = 0; j < n.parents[0]->value.cols; ++j) {
                               double p = (*probs)(static_cast<int>(m), j);
                               if (j == (*label_copy)[v]) p -= 1.0;
                               x.grad(v, j) += g * p;
                             }
                           }
                         });
}

// Single-head attention aggregation over a fixed support (adjacency plus self
// loops): per edge (i <- j), e_ij = LeakyReLU(a_src . hw_i + a_dst . hw_j),
// alpha = row softmax of e, out_i = sum_j alpha_ij hw_j.
inline Tensor gat_aggregate(const SparseMatrix& s, const Tensor& hw, const Tensor& a_src,
                            const Tensor& a_dst, double slope = 0.2) {
  const int n = hw.rows(), d = hw.cols();
  if (s.rows != n || a_src.rows() != d || a_src.cols() != 1 || a_dst.rows() != d ||
      a_dst.cols() != 1)
    throw std::logic_error("gat_aggregate: bad shapes");

  auto alpha = std::make_shared<std::vector<double>>(s.targets.size());
  auto eraw = std::make_shared<std::vector<double>>(s.targets.size());
  std::vector<double> src_score(n), dst_score(n);
  for (int i = 0; i < n; ++i) {
    const double* r = hw.value().row_ptr(i);
    double ss = 0.0, ds = 0.0;
    for (int j = 0; j < d; ++j) {
      ss += r[j] * a_src.value()(j, 0);
      ds += r[j] * a_dst.value()(j, 0);
    }
    src_score[i] = ss;
    dst_score[i] = ds;
  }
  Matrix out(n, d);
  for (int i = 0; i < n; ++i) {
    const int lo = s.offsets[i], hi = s.offsets[i + 1];
    if (lo == hi) continue;
    double mx = -1e300;
    for (int e = lo; e < hi; ++e) {
      const double raw = src_score[i] + dst_score[s.targets[e]];
      (*eraw)[e] = raw;
      const double act = raw > 0.0 ? raw : slope * raw;
      (*alpha)[e] = act;
      mx = std::max(mx, act);
    }
    double z = 0.0;
    for (int e = lo; e < hi; ++e) {
      (*alpha)[e] = std::exp((*alpha)[e] - mx);
      z += (*alpha)[e];
    }
    double* orow = out.row_ptr(i);
    for (int e = lo; e < hi; ++e) {
      (*alpha)[e] /= z;
      const double* hrow = hw.value().row_ptr(s.targets[e]);
      for (int j = 0; j < d; ++j) orow[j] += (*alpha)[e] * hrow[j];
    }
  }

  return detail::make_op(
      std::move(out), {hw, a_src, a_dst}, [&s, alpha, eraw, slope](detail::Node& n) {
        auto& hw = detail::parent(n, 0);
        auto& a_src = detail::parent(n, 1);
        auto& a_dst = detail::parent(n, 2);
        const int nn = hw.value.rows, d = hw.value.cols;
        std::vector<double> dsrc(nn, 0.0), ddst(nn, 0.0);
        std::vector<double> dalpha(s.targets.size(), 0.0);
        for (int i = 0; i < nn; ++i) {
          const int lo = s.offsets[i], hi = s.offsets[i + 1];
          const double* grow = n.grad.row_ptr(i);
          double weighted = 0.0;  // sum_k alpha_ik * dalpha_ik for softmax backprop
          for (int e = lo; e < hi; ++e) {
            const double* hrow = hw.value.row_ptr(s.targets[e]);
            double dot = 0.0;
            for (int j = 0; j < d; ++j) dot += grow[j] * hrow[j];
            dalpha[e] = dot;
            weighted += (*alpha)[e] * dot;
            if (hw.requires_grad) {
              double* hg = hw.grad.row_ptr(s.targets[e]);
              for (int j = 0; j < d; ++j) hg[j] += (*alpha)[e] * grow[j];
            }
          }
          for (int e = lo; e < hi; ++e) {
            const double de = (*alpha)[e] * (dalpha[e] - weighted);
            const double draw = de * ((*eraw)[e] > 0.0 ? 1.0 : slope);
            dsrc[i] += draw;
            ddst[s.targets[e]] += draw;
          }
        }
        for (int i = 0; i < nn; ++i) {
          const double* hrow = hw.value.row_ptr(i);
          for (int j = 0; j < d; ++j) {
            if (a_src.requires_grad) a_src.grad(j, 0) += dsrc[i] * hrow[j];
            if (a_dst.requires_grad) a_dst.grad(j, 0) += ddst[i] * hrow[j];
            if (hw.requires_grad)
              hw.grad(i, j) += dsrc[i] * a_src.value(j, 0) + ddst[i] * a_dst.value(j, 0);
          }
        }
      });
}

}  // namespace cagnn::ad
