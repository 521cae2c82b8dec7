#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cagnn/autodiff.hpp"
#include "cagnn/graph.hpp"
#include "cagnn/rng.hpp"
#include "cagnn/sparse.hpp"

namespace cagnn {

enum class Kernel { gcn, gin, gat, mlp };
enum class Mode { cagnn, vanilla };
enum class MixerKind { linear, add, concat, global, unshared, mlp2, mlp3 };
enum class NormKind { l2, none, layernorm };

inline std::string to_string(Kernel k) {
  switch (k) {
    case Kernel::gcn: return "gcn";
    case Kernel::gin: return "gin";
    case Kernel::gat: return "gat";
    case Kernel::mlp: return "mlp";
  }
  return "?";
}
inline std::string to_string(Mode m) { return m == Mode::cagnn ? "cagnn" : "vanilla"; }
inline std::string to_string(MixerKind m) {
  switch (m) {
    case MixerKind::linear: return "linear";
    case MixerKind::add: return "add";
    case MixerKind::concat: return "concat";
    case MixerKind::global: return "global";
    case MixerKind::unshared: return "unshared";
    case MixerKind::mlp2: return "mlp2";
    case MixerKind::mlp3: return "mlp3";
  }
  return "?";
}
inline std::string to_string(NormKind n) {
  switch (n) {
    case NormKind::l2: return "l2";
    case NormKind::none: return "none";
    case NormKind::layernorm: return "layernorm";
  }
  return "?";
}

inline Kernel kernel_from_string(const std::string& s) {
  if (s == "gcn") return Kernel::gcn;
  if (s == "gin") return Kernel::gin;
  if (s == "gat") return Kernel::gat;
  if (s == "mlp") return Kernel::mlp;
  throw std::invalid_argument("unknown kernel '" + s + "' (expected gcn|gin|gat|mlp)");
}
inline Mode mode_from_string(const std::string& s) {
  if (s == "cagnn") return Mode::cagnn;
  if (s == "vanilla") return Mode::vanilla;
  throw std::invalid_argument("unknown mode '" + s + "' (expected cagnn|vanilla)");
}
inline MixerKind mixer_from_string(const std::string& s) {
  if (s == "linear") return MixerKind::linear;
  if (s == "add") return MixerKind::add;
  if (s == "concat") return MixerKind::concat;
  if (s == "global") return MixerKind::global;
  if (s == "unshared") return MixerKind::unshared;
  if (s == "mlp2") return MixerKind::mlp2;
  if (s == "mlp3") return MixerKind::mlp3;
  throw std::invalid_argument("unknown mixer '" + s +
                              "' (expected linear|add|concat|global|unshared|mlp2|mlp3)");
}
inline NormKind norm_from_string(const std::string& s) {
  if (s == "l2") return NormKind::l2;
  if (s == "none") return NormKind::none;
  if (s == "layernorm") return NormKind::layernorm;
  throw std::invalid_argument("unknown norm '" + s + "' (expected l2|none|layernorm)");
}

struct ModelConfig {
  Kernel kernel = Kernel::gcn;
  Mode mode = Mode::cagnn;
  int layers = 2;
  int hidden = 64;
  MixerKind mixer = MixerKind::linear;
  NormKind norm = NormKind::l2;
  double dropout = 0.0;
  double leaky_slope = 0.2;  // attention kernel only

  void validate() const {
    if (layers < 1) throw std::invalid_argument("model: layers must be >= 1");
    if (hidden < 1) throw std::invalid_argument("model: hidden must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::invalid_argument("model: dropout must be in [0, 1)");
  }
};

// Thrown when a mixer gate rounds to exactly 0 or 1 in floating point. The
// trainer treats this as run divergence; anywhere else it is a hard error.
struct GateSaturation : std::logic_error {
  using std::logic_error::logic_error;
};

// The propagation operator a kernel consumes, built once per graph.
struct Propagation {
  Kernel kernel = Kernel::mlp;
  SparseMatrix mat;  // unused for the mlp kernel
};

inline Propagation build_propagation(const Graph& g, Kernel k) {
  Propagation p;
  p.kernel = k;
  switch (k) {
    case Kernel::gcn: p.mat = normalized_adjacency(g); break;
    case Kernel::gin: p.mat = plain_adjacency(g); break;
    case Kernel::gat: p.mat = self_loop_structure(g); break;
    case Kernel::mlp: break;
  }
  return p;
}

struct ModelOutput {
  ad::Tensor raw;                  // N x C decoder output, pre softmax
  ad::Tensor z;                    // log softmax rows of raw
  ad::Tensor s_final;              // discriminative embedding fed to the decoder
  std::vector<ad::Tensor> alphas;  // per layer N x 1 gates (gated mixers only)
};

namespace model_detail {

inline Matrix glorot(int fan_in, int fan_out, int rows, int cols, Rng& rng) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-a, a);
  return m;
}

}  // namespace model_detail

// Two-stream gated architecture plus plain single-stream baselines.
//
// Gated mode: H^0 = S^0 = Norm(encode(X)); the convolution stream advances as
// H^l = Norm(GC(A, H^{l-1})) and never sees S; the discriminative stream
// folds it in through a learned per-node gate,
//   alpha^l = sigmoid(f_mix(S^{l-1} || H^l)),
//   S^l     = Norm((1 - alpha^l) * S^{l-1} + alpha^l * H^l),
// with the gate parameters shared across layers (except the per-layer mixer
// variants). The decoder reads S^L. Convolutions carry no nonlinearity of
// their own here (the isomorphism kernel keeps the ReLU inside its MLP).
//
// Baseline mode: the plain stacked convolution with ReLU between layers and
// none after the last, matching reference implementations of the kernels.
class Model {
 public:
  Model(const ModelConfig& cfg, int in_dim, int num_classes, uint64_t seed)
      : cfg_(cfg), in_dim_(in_dim), num_classes_(num_classes) {
    cfg_.validate();
    if (in_dim < 1 || num_classes < 2) throw std::invalid_argument("model: bad data dims");
    Rng rng(mix_seed(seed, 0x90de1));
    if (cfg_.mode == Mode::cagnn) build_gated(rng);
    else build_vanilla(rng);
  }

  const ModelConfig& config() const { return cfg_; }
  int in_dim() const { return in_dim_; }
  int num_classes() const { return num_classes_; }

  const std::vector<std::pair<std::string, ad::Tensor>>& named_params() const { return named_; }

  std::vector<ad::Tensor> params() const {
    std::vector<ad::Tensor> out;
    out.reserve(named_.size());
    for (auto& [_, t] : named_) out.push_back(t);
    return out;
  }

  long param_count() const {
    long n = 0;
    for (auto& [_, t] : named_) n += static_cast<long>(t.value().size());
    return n;
  }

  long mixer_param_count() const {
    long n = 0;
    for (auto& [name, t] : named_)
      if (name.rfind("mix", 0) == 0) n += static_cast<long>(t.value().size());
    return n;
  }

  std::vector<Matrix> snapshot() const {
    std::vector<Matrix> s;
    s.reserve(named_.size());
    for (auto& [_, t] : named_) s.push_back(t.value());
    return s;
  }

  void restore(const std::vector<Matrix>& snap) {
    if (snap.size() != named_.size()) throw std::logic_error("model: snapshot size mismatch");
    for (size_t i = 0; i < snap.size(); ++i) {
      if (!snap[i].same_shape(named_[i].second.value()))
        throw std::logic_error("model: snapshot shape mismatch");
      named_[i].second.value() = snap[i];
    }
  }

  // One full forward pass. `rng` drives dropout masks and is only consumed
  // when training with nonzero dropout, so evaluation never perturbs it.
  // `force_alpha` overrides every gate with a constant (diagnostics only).
  ModelOutput forward(const Propagation& prop, const ad::Tensor& x, bool training, Rng& rng,
                      std::optional<double> force_alpha = {}) const {
    if (prop.kernel != cfg_.kernel)
      throw std::logic_error("forward: propagation built for kernel " + to_string(prop.kernel) +
                             ", model uses " + to_string(cfg_.kernel));
    if (x.cols() != in_dim_) throw std::logic_error("forward: feature width mismatch");
    auto drop_seed = [&]() -> uint64_t {
      return (training && cfg_.dropout > 0.0) ? rng.next_u64() : 0;
    };
    return cfg_.mode == Mode::cagnn ? forward_gated(prop, x, training, drop_seed, force_alpha)
                                    : forward_vanilla(prop, x, training, drop_seed);
  }

 private:
  ModelConfig cfg_;
  int in_dim_ = 0;
  int num_classes_ = 0;

  ad::Tensor enc_w_, enc_b_, dec_w_, dec_b_;
  struct ConvParams {
    ad::Tensor w;            // gcn / gat / mlp
    ad::Tensor b;            // mlp only
    ad::Tensor w1, b1, w2, b2, eps;  // gin
    ad::Tensor a_src, a_dst;         // gat
  };
  std::vector<ConvParams> conv_;
  std::vector<ad::Tensor> mix_w_, mix_b_;      // linear: one entry; unshared: per layer;
                                               // mlp2/mlp3: stacked shared layers
  std::vector<ad::Tensor> mix_logit_;          // global: per-layer scalars
  std::map<std::string, std::pair<ad::Tensor, ad::Tensor>> ln_;  // site -> (gain, bias)
  std::vector<std::pair<std::string, ad::Tensor>> named_;

  void reg(const std::string& name, ad::Tensor t) { named_.emplace_back(name, std::move(t)); }

  ad::Tensor make_ln_site(const std::string& site, int width, bool) {
    ad::Tensor gain = ad::Tensor::param(Matrix(1, width, 1.0));
    ad::Tensor bias = ad::Tensor::param(Matrix(1, width, 0.0));
    ln_[site] = {gain, bias};
    reg("ln." + site + ".g", gain);
    reg("ln." + site + ".b", bias);
    return gain;
  }

  ad::Tensor apply_norm(const ad::Tensor& t, const std::string& site) const {
    switch (cfg_.norm) {
      case NormKind::none: return t;
      case NormKind::l2: return ad::l2_normalize_rows(t);
      case NormKind::layernorm: {
        auto it = ln_.find(site);
        if (it == ln_.end()) throw std::logic_error("forward: missing norm site " + site);
        return ad::layer_norm_rows(t, it->second.first, it->second.second, 1e-5);
      }
    }
    return t;
  }

  void build_conv_layer(int l, int w_in, int w_out, Rng& rng) {
    using model_detail::glorot;
    ConvParams c;
    const std::string p = "conv" + std::to_string(l) + ".";
    switch (cfg_.kernel) {
      case Kernel::gcn:
        c.w = ad::Tensor::param(glorot(w_in, w_out, w_in, w_out, rng));
        reg(p + "w", c.w);
        break;
      case Kernel::mlp:
        c.w = ad::Tensor::param(glorot(w_in, w_out, w_in, w_out, rng));
        c.b = ad::Tensor::param(Matrix(1, w_out, 0.0));
        reg(p + "w", c.w);
        reg(p + "b", c.b);
        break;
      case Kernel::gin:
        c.w1 = ad::Tensor::param(glorot(w_in, w_out, w_in, w_out, rng));
        c.b1 = ad::Tensor::param(Matrix(1, w_out, 0.0));
        c.w2 = ad::Tensor::param(glorot(w_out, w_out, w_out, w_out, rng));
        c.b2 = ad::Tensor::param(Matrix(1, w_out, 0.0));
        c.eps = ad::Tensor::param(Matrix(1, 1, 0.0));
        reg(p + "mlp.w1", c.w1);
        reg(p + "mlp.b1", c.b1);
        reg(p + "mlp.w2", c.w2);
        reg(p + "mlp.b2", c.b2);
        reg(p + "eps", c.eps);
        break;
      case Kernel::gat:
        c.w = ad::Tensor::param(glorot(w_in, w_out, w_in, w_out, rng));
        c.a_src = ad::Tensor::param(glorot(2 * w_out, 1, w_out, 1, rng));
        c.a_dst = ad::Tensor::param(glorot(2 * w_out, 1, w_out, 1, rng));
        reg(p + "w", c.w);
        reg(p + "a_src", c.a_src);
        reg(p + "a_dst", c.a_dst);
        break;
    }
    conv_.push_back(std::move(c));
  }

  // Convolution without its own outer nonlinearity.
  ad::Tensor conv_apply(const Propagation& prop, const ad::Tensor& h, int l) const {
    const ConvParams& c = conv_[l];
    switch (cfg_.kernel) {
      case Kernel::gcn: return ad::matmul(ad::spmm(prop.mat, h), c.w);
      case Kernel::mlp: return ad::add_rowvec(ad::matmul(h, c.w), c.b);
      case Kernel::gin: {
        ad::Tensor one = ad::Tensor::constant(Matrix(1, 1, 1.0));
        ad::Tensor self = ad::scale(h, ad::add(c.eps, one));
        ad::Tensor agg = ad::add(self, ad::spmm(prop.mat, h));
        ad::Tensor hid = ad::relu(ad::add_rowvec(ad::matmul(agg, c.w1), c.b1));
        return ad::add_rowvec(ad::matmul(hid, c.w2), c.b2);
      }
      case Kernel::gat: {
        ad::Tensor hw = ad::matmul(h, c.w);
        return ad::gat_aggregate(prop.mat, hw, c.a_src, c.a_dst, cfg_.leaky_slope);
      }
    }
    throw std::logic_error("conv_apply: unreachable");
  }

  void build_gated(Rng& rng) {
    using model_detail::glorot;
    const int d = cfg_.hidden, L = cfg_.layers;
    enc_w_ = ad::Tensor::param(glorot(in_dim_, d, in_dim_, d, rng));
    enc_b_ = ad::Tensor::param(Matrix(1, d, 0.0));
    reg("enc.w", enc_w_);
    reg("enc.b", enc_b_);

    for (int l = 0; l < L; ++l) build_conv_layer(l + 1, d, d, rng);

    switch (cfg_.mixer) {
      case MixerKind::linear:
        mix_w_.push_back(ad::Tensor::param(glorot(2 * d, 1, 2 * d, 1, rng)));
        mix_b_.push_back(ad::Tensor::param(Matrix(1, 1, 0.0)));
        reg("mix.w", mix_w_[0]);
        reg("mix.b", mix_b_[0]);
        break;
      case MixerKind::unshared:
        for (int l = 0; l < L; ++l) {
          mix_w_.push_back(ad::Tensor::param(glorot(2 * d, 1, 2 * d, 1, rng)));
          mix_b_.push_back(ad::Tensor::param(Matrix(1, 1, 0.0)));
          reg("mix" + std::to_string(l + 1) + ".w", mix_w_[l]);
          reg("mix" + std::to_string(l + 1) + ".b", mix_b_[l]);
        }
        break;
      case MixerKind::global:
        for (int l = 0; l < L; ++l) {
          mix_logit_.push_back(ad::Tensor::param(Matrix(1, 1, 0.0)));
          reg("mix" + std::to_string(l + 1) + ".logit", mix_logit_[l]);
        }
        break;
      case MixerKind::mlp2:
      case MixerKind::mlp3: {
        const int depth = cfg_.mixer == MixerKind::mlp2 ? 2 : 3;
        int w_in = 2 * d;
        for (int i = 0; i < depth; ++i) {
          const int w_out = (i == depth - 1) ? 1 : 2 * d;
          mix_w_.push_back(ad::Tensor::param(glorot(w_in, w_out, w_in, w_out, rng)));
          mix_b_.push_back(ad::Tensor::param(Matrix(1, w_out, 0.0)));
          reg("mix.l" + std::to_string(i + 1) + ".w", mix_w_[i]);
          reg("mix.l" + std::to_string(i + 1) + ".b", mix_b_[i]);
          w_in = w_out;
        }
        break;
      }
      case MixerKind::add:
      case MixerKind::concat: break;
    }

    const int dec_in = cfg_.mixer == MixerKind::concat ? (L + 1) * d : d;
    dec_w_ = ad::Tensor::param(glorot(dec_in, num_classes_, dec_in, num_classes_, rng));
    dec_b_ = ad::Tensor::param(Matrix(1, num_classes_, 0.0));
    reg("dec.w", dec_w_);
    reg("dec.b", dec_b_);

    if (cfg_.norm == NormKind::layernorm) {
      make_ln_site("enc", d, true);
      for (int l = 1; l <= L; ++l) make_ln_site("conv" + std::to_string(l), d, true);
      if (cfg_.mixer == MixerKind::concat) {
        make_ln_site("mix1", 2 * d, true);
        if (L > 1) make_ln_site("mix" + std::to_string(L), (L + 1) * d, true);
      } else {
        for (int l = 1; l <= L; ++l) make_ln_site("mix" + std::to_string(l), d, true);
      }
    }
  }

  void build_vanilla(Rng& rng) {
    const int L = cfg_.layers;
    for (int l = 1; l <= L; ++l) {
      const int w_in = (l == 1) ? in_dim_ : cfg_.hidden;
      const int w_out = (l == L) ? num_classes_ : cfg_.hidden;
      build_conv_layer(l, w_in, w_out, rng);
    }
  }

  template <class SeedFn>
  ModelOutput forward_gated(const Propagation& prop, const ad::Tensor& x, bool training,
                            SeedFn&& drop_seed, std::optional<double> force_alpha) const {
    const int L = cfg_.layers;
    const int n = x.rows();
    ModelOutput out;

    ad::Tensor x0 = ad::dropout(x, cfg_.dropout, training, drop_seed());
    ad::Tensor h = apply_norm(ad::add_rowvec(ad::matmul(x0, enc_w_), enc_b_), "enc");
    ad::Tensor s = h;

    for (int l = 1; l <= L; ++l) {
      h = apply_norm(conv_apply(prop, h, l - 1), "conv" + std::to_string(l));

      switch (cfg_.mixer) {
        case MixerKind::add:
          s = apply_norm(ad::add(s, h), "mix" + std::to_string(l));
          break;
        case MixerKind::concat:
          s = ad::concat_cols(s, h);
          if (l == 1 || l == L)
            s = apply_norm(s, "mix" + std::to_string(l));
          break;
        case MixerKind::global: {
          ad::Tensor alpha;
          if (force_alpha) {
            alpha = ad::Tensor::constant(Matrix(1, 1, *force_alpha));
          } else {
            alpha = ad::sigmoid(mix_logit_[l - 1]);
            const double v = alpha.value()(0, 0);
            if (!(v > 0.0 && v < 1.0))
              throw GateSaturation("forward: mixer gate left the open interval (0,1)");
          }
          ad::Tensor one = ad::Tensor::constant(Matrix(1, 1, 1.0));
          ad::Tensor keep = ad::sub(one, alpha);
          s = apply_norm(ad::add(ad::scale(s, keep), ad::scale(h, alpha)),
                         "mix" + std::to_string(l));
          out.alphas.push_back(
              ad::Tensor::constant(Matrix(n, 1, alpha.value()(0, 0))));
          break;
        }
        default: {  // per-node gates: linear, unshared, mlp2, mlp3
          ad::Tensor alpha;
          if (force_alpha) {
            alpha = ad::Tensor::constant(Matrix(n, 1, *force_alpha));
          } else {
            ad::Tensor cat = ad::concat_cols(s, h);
            ad::Tensor logit;
            if (cfg_.mixer == MixerKind::linear)
              logit = ad::add_rowvec(ad::matmul(cat, mix_w_[0]), mix_b_[0]);
            else if (cfg_.mixer == MixerKind::unshared)
              logit = ad::add_rowvec(ad::matmul(cat, mix_w_[l - 1]), mix_b_[l - 1]);
            else {
              ad::Tensor t = cat;
              for (size_t i = 0; i + 1 < mix_w_.size(); ++i)
                t = ad::relu(ad::add_rowvec(ad::matmul(t, mix_w_[i]), mix_b_[i]));
              logit = ad::add_rowvec(ad::matmul(t, mix_w_.back()), mix_b_.back());
            }
            alpha = ad::sigmoid(logit);
            for (double v : alpha.value().data)
              if (!(v > 0.0 && v < 1.0))
                throw GateSaturation("forward: mixer gate left the open interval (0,1)");
          }
          ad::Tensor ones = ad::Tensor::constant(Matrix(n, 1, 1.0));
          ad::Tensor keep = ad::sub(ones, alpha);
          s = apply_norm(ad::add(ad::broadcast_col(keep, s), ad::broadcast_col(alpha, h)),
                         "mix" + std::to_string(l));
          out.alphas.push_back(alpha);
        }
      }
    }

    out.s_final = s;
    ad::Tensor sd = ad::dropout(s, cfg_.dropout, training, drop_seed());
    out.raw = ad::add_rowvec(ad::matmul(sd, dec_w_), dec_b_);
    out.z = ad::log_softmax_rows(out.raw);
    return out;
  }

  template <class SeedFn>
  ModelOutput forward_vanilla(const Propagation& prop, const ad::Tensor& x, bool training,
                              SeedFn&& drop_seed) const {
    const int L = cfg_.layers;
    ModelOutput out;
    ad::Tensor h = x;
    for (int l = 1; l <= L; ++l) {
      h = ad::dropout(h, cfg_.dropout, training, drop_seed());
      h = conv_apply(prop, h, l - 1);
      // ReLU between layers; the isomorphism kernel is already nonlinear
      // through the ReLU inside its update MLP.
      if (l < L && cfg_.kernel != Kernel::gin) h = ad::relu(h);
    }
    out.s_final = h;
    out.raw = h;
    out.z = ad::log_softmax_rows(out.raw);
    return out;
  }
};

}  // namespace cagnn
