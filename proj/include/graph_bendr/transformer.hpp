#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "graph_bendr/encoder.hpp"
#include "graph_bendr/param.hpp"

namespace graph_bendr {

struct TransformerConfig {
  int layers = 2;
  int heads = 4;
  int model_dim = 64;
  int ffn_dim = 256;
  double dropout = 0.1;

  void validate() const;
};

/// Training-time switches threaded through forward passes.
struct ForwardContext {
  bool training = false;
  Rng* dropout_rng = nullptr;
};

template <typename T>
class LayerNorm {
 public:
  static constexpr double kEps = 1e-5;

  struct Cache {
    Mat<T> xhat;
    std::vector<T> inv_std;
  };

  LayerNorm() = default;
  LayerNorm(const std::string& name, Eigen::Index dim)
      : gamma_(name + ".gamma", Mat<T>::Ones(1, dim)), beta_(name + ".beta", Mat<T>::Zero(1, dim)) {}

  Mat<T> forward(const Mat<T>& x, Cache& cache) const {
    cache.xhat.resize(x.rows(), x.cols());
    cache.inv_std.resize(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const T mean = x.row(r).mean();
      const T var = (x.row(r).array() - mean).square().mean();
      const T inv = T(1) / std::sqrt(var + static_cast<T>(kEps));
      cache.inv_std[static_cast<std::size_t>(r)] = inv;
      cache.xhat.row(r) = (x.row(r).array() - mean) * inv;
    }
    Mat<T> y = cache.xhat.array().rowwise() * gamma_.value.row(0).array();
    y.rowwise() += beta_.value.row(0);
    return y;
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy) {
    gamma_.grad += dy.cwiseProduct(cache.xhat).colwise().sum();
    beta_.grad += dy.colwise().sum();
    const Mat<T> dxhat = dy.array().rowwise() * gamma_.value.row(0).array();
    const T d = static_cast<T>(dy.cols());
    Mat<T> dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
      const T s1 = dxhat.row(r).sum();
      const T s2 = dxhat.row(r).dot(cache.xhat.row(r));
      dx.row(r) = (cache.inv_std[static_cast<std::size_t>(r)] / d) *
                  (d * dxhat.row(r).array() - s1 - cache.xhat.row(r).array() * s2);
    }
    return dx;
  }

  void parameters(ParamList<T>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

 private:
  Parameter<T> gamma_;
  Parameter<T> beta_;
};

/// Inverted dropout; the keep mask is cached for backward.
template <typename T>
Mat<T> apply_dropout(const Mat<T>& x, double rate, const ForwardContext& ctx, Mat<T>& mask) {
  if (!ctx.training || rate <= 0.0 || ctx.dropout_rng == nullptr) {
    mask.resize(0, 0);
    return x;
  }
  mask.resize(x.rows(), x.cols());
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  std::bernoulli_distribution keep(1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*ctx.dropout_rng) ? scale : T(0);
  return x.cwiseProduct(mask);
}

template <typename T>
Mat<T> dropout_backward(const Mat<T>& dy, const Mat<T>& mask) {
  return mask.size() == 0 ? dy : Mat<T>(dy.cwiseProduct(mask));
}

/// Row-wise softmax.
template <typename T>
Mat<T> softmax_rows(const Mat<T>& s) {
  Mat<T> a(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const T mx = s.row(i).maxCoeff();
    a.row(i) = (s.row(i).array() - mx).exp();
    a.row(i) /= a.row(i).sum();
  }
  return a;
}

template <typename T>
class MultiHeadAttention {
 public:
  struct Cache {
    typename Linear<T>::Cache q_in, k_in, v_in, o_in;
    Mat<T> q, k, v;
    std::vector<Mat<T>> attention;  // per head, T x T
  };

  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, Eigen::Index dim, int heads, Rng& rng)
      : heads_(heads),
        wq_(name + ".wq", dim, dim, rng),
        wk_(name + ".wk", dim, dim, rng, /*bias=*/false),  // a key bias shifts every score of a query equally
        wv_(name + ".wv", dim, dim, rng),
        wo_(name + ".wo", dim, dim, rng) {
    if (heads < 1 || dim % heads != 0) throw ValidationError(name + ": model_dim must be divisible by heads");
  }

  Mat<T> forward(const Mat<T>& x, Cache& cache) const {
    cache.q = wq_.forward(x, cache.q_in);
    cache.k = wk_.forward(x, cache.k_in);
    cache.v = wv_.forward(x, cache.v_in);
    const Eigen::Index dh = x.cols() / heads_;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    cache.attention.resize(static_cast<std::size_t>(heads_));
    Mat<T> o(x.rows(), x.cols());
    for (int h = 0; h < heads_; ++h) {
      const Mat<T> s = scale * (cache.q.middleCols(h * dh, dh) * cache.k.middleCols(h * dh, dh).transpose());
      cache.attention[static_cast<std::size_t>(h)] = softmax_rows(s);
      o.middleCols(h * dh, dh).noalias() = cache.attention[static_cast<std::size_t>(h)] * cache.v.middleCols(h * dh, dh);
    }
    return wo_.forward(o, cache.o_in);
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy) {
    const Mat<T> dout = wo_.backward(cache.o_in, dy);
    const Eigen::Index dim = dy.cols();
    const Eigen::Index dh = dim / heads_;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    Mat<T> dq(dy.rows(), dim), dk(dy.rows(), dim), dv(dy.rows(), dim);
    for (int h = 0; h < heads_; ++h) {
      const auto& a = cache.attention[static_cast<std::size_t>(h)];
      const auto doh = dout.middleCols(h * dh, dh);
      dv.middleCols(h * dh, dh).noalias() = a.transpose() * doh;
      const Mat<T> da = doh * cache.v.middleCols(h * dh, dh).transpose();
      Mat<T> ds(a.rows(), a.cols());
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const T dot = a.row(i).dot(da.row(i));
        ds.row(i) = a.row(i).array() * (da.row(i).array() - dot);
      }
      dq.middleCols(h * dh, dh).noalias() = scale * (ds * cache.k.middleCols(h * dh, dh));
      dk.middleCols(h * dh, dh).noalias() = scale * (ds.transpose() * cache.q.middleCols(h * dh, dh));
    }
    Mat<T> dx = wq_.backward(cache.q_in, dq);
    dx += wk_.backward(cache.k_in, dk);
    dx += wv_.backward(cache.v_in, dv);
    return dx;
  }

  void parameters(ParamList<T>& out) {
    wq_.parameters(out);
    wk_.parameters(out);
    wv_.parameters(out);
    wo_.parameters(out);
  }

  Linear<T>& wq() { return wq_; }
  Linear<T>& wk() { return wk_; }
  Linear<T>& wv() { return wv_; }
  Linear<T>& wo() { return wo_; }

 private:
  int heads_ = 1;
  Linear<T> wq_, wk_, wv_, wo_;
};

/// Pre-norm encoder layer: h + MHA(LN(h)), then h + FFN(LN(h)) with GELU.
template <typename T>
class TransformerLayer {
 public:
  struct Cache {
    typename LayerNorm<T>::Cache ln1, ln2;
    typename MultiHeadAttention<T>::Cache attn;
    typename Linear<T>::Cache ff1, ff2;
    Mat<T> hidden;  // FFN pre-activation
    Mat<T> drop1, drop2;
  };

  TransformerLayer(const std::string& name, const TransformerConfig& cfg, Rng& rng)
      : dropout_(cfg.dropout),
        ln1_(name + ".ln1", cfg.model_dim),
        attn_(name + ".attn", cfg.model_dim, cfg.heads, rng),
        ln2_(name + ".ln2", cfg.model_dim),
        ff1_(name + ".ff1", cfg.model_dim, cfg.ffn_dim, rng),
        ff2_(name + ".ff2", cfg.ffn_dim, cfg.model_dim, rng) {}

  Mat<T> forward(const Mat<T>& x, Cache& cache, const ForwardContext& ctx = {}) const {
    const Mat<T> a = attn_.forward(ln1_.forward(x, cache.ln1), cache.attn);
    Mat<T> h = x + apply_dropout(a, dropout_, ctx, cache.drop1);
    cache.hidden = ff1_.forward(ln2_.forward(h, cache.ln2), cache.ff1);
    const Mat<T> f = ff2_.forward(cache.hidden.unaryExpr([](T v) { return gelu(v); }), cache.ff2);
    h += apply_dropout(f, dropout_, ctx, cache.drop2);
    return h;
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy) {
    Mat<T> dh = dy;
    Mat<T> df = ff2_.backward(cache.ff2, dropout_backward(dy, cache.drop2));
    df = df.cwiseProduct(cache.hidden.unaryExpr([](T v) { return gelu_grad(v); }));
    dh += ln2_.backward(cache.ln2, ff1_.backward(cache.ff1, df));
    const Mat<T> da = attn_.backward(cache.attn, dropout_backward(dh, cache.drop1));
    return dh + ln1_.backward(cache.ln1, da);
  }

  void parameters(ParamList<T>& out) {
    ln1_.parameters(out);
    attn_.parameters(out);
    ln2_.parameters(out);
    ff1_.parameters(out);
    ff2_.parameters(out);
  }

  MultiHeadAttention<T>& attention() { return attn_; }
  Linear<T>& ff1() { return ff1_; }
  Linear<T>& ff2() { return ff2_; }

 private:
  double dropout_;
  LayerNorm<T> ln1_;
  MultiHeadAttention<T> attn_;
  LayerNorm<T> ln2_;
  Linear<T> ff1_;
  Linear<T> ff2_;
};

/// Masked-feature reconstruction: masked rows are replaced by a learned mask
/// vector, learned positional embeddings are added, then L transformer layers.
/// The same module, run with an empty mask, is the "bendr" head's context model.
template <typename T>
class Reconstructor {
 public:
  struct Cache {
    std::vector<bool> mask;
    std::vector<typename TransformerLayer<T>::Cache> layers;
  };

  Reconstructor(const TransformerConfig& cfg, Eigen::Index positions, Rng& rng,
                const std::string& name = "transformer")
      : config_(cfg) {
    cfg.validate();
    const Eigen::Index d = cfg.model_dim;
    mask_embedding_ = Parameter<T>(name + ".mask_embedding", init_uniform<T>(1, d, d, rng));
    positional_ = Parameter<T>(name + ".positional", init_uniform<T>(positions, d, d, rng));
    for (int l = 0; l < cfg.layers; ++l) layers_.emplace_back(name + ".layer" + std::to_string(l), cfg, rng);
  }

  Mat<T> forward(const Mat<T>& features, const std::vector<bool>& mask, Cache& cache,
                 const ForwardContext& ctx = {}) const {
    if (features.rows() != positional_.value.rows() || features.cols() != positional_.value.cols())
      throw ValidationError("reconstruct: features must be " + std::to_string(positional_.value.rows()) + " x " +
                            std::to_string(positional_.value.cols()));
    if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != features.rows())
      throw ValidationError("reconstruct: mask length mismatch");
    cache.mask = mask;
    Mat<T> h = features;
    for (std::size_t t = 0; t < mask.size(); ++t)
      if (mask[t]) h.row(static_cast<Eigen::Index>(t)) = mask_embedding_.value.row(0);
    h += positional_.value;
    cache.layers.resize(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) h = layers_[l].forward(h, cache.layers[l], ctx);
    return h;
  }

  /// Returns the gradient with respect to `features` (zero on masked rows).
  Mat<T> backward(const Cache& cache, const Mat<T>& dy) {
    Mat<T> g = dy;
    for (std::size_t l = layers_.size(); l-- > 0;) g = layers_[l].backward(cache.layers[l], g);
    positional_.grad += g;
    for (std::size_t t = 0; t < cache.mask.size(); ++t) {
      if (!cache.mask[t]) continue;
      mask_embedding_.grad.row(0) += g.row(static_cast<Eigen::Index>(t));
      g.row(static_cast<Eigen::Index>(t)).setZero();
    }
    return g;
  }

  void parameters(ParamList<T>& out) {
    out.push_back(&mask_embedding_);
    out.push_back(&positional_);
    for (auto& l : layers_) l.parameters(out);
  }

  const TransformerConfig& config() const { return config_; }
  Parameter<T>& mask_embedding() { return mask_embedding_; }
  Parameter<T>& positional() { return positional_; }
  std::vector<TransformerLayer<T>>& layers() { return layers_; }

 private:
  TransformerConfig config_;
  Parameter<T> mask_embedding_;
  Parameter<T> positional_;
  std::vector<TransformerLayer<T>> layers_;
};

}  // namespace graph_bendr
