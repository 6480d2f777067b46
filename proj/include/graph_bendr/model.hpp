#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "graph_bendr/adjust.hpp"
#include "graph_bendr/config.hpp"
#include "graph_bendr/contrastive.hpp"
#include "graph_bendr/encoder.hpp"
#include "graph_bendr/gnn.hpp"
#include "graph_bendr/graph.hpp"
#include "graph_bendr/transformer.hpp"

namespace graph_bendr {

/// Two-class classifier over convolved features (T' x d -> 1 x 2).
///   bendr:  unmasked transformer context, mean over time, affine map
///   linear: mean over time, affine map
template <typename T>
class ClassifierHead {
 public:
  struct Cache {
    typename Reconstructor<T>::Cache context;
    typename Linear<T>::Cache linear;
    Eigen::Index rows = 0;
  };

  ClassifierHead(HeadKind kind, const TransformerConfig& tcfg, Eigen::Index positions, Eigen::Index dim, Rng& rng)
      : kind_(kind) {
    if (kind == HeadKind::kBendr) {
      if (tcfg.model_dim != dim) throw ValidationError("head: transformer model_dim must equal feature_dim");
      context_.emplace(tcfg, positions, rng);
    }
    linear_ = Linear<T>("head.linear", dim, 2, rng);
  }

  Mat<T> forward(const Mat<T>& features, Cache& cache, const ForwardContext& ctx = {}) const {
    cache.rows = features.rows();
    if (features.rows() < 1) throw ValidationError("head: empty feature sequence");
    Mat<T> pooled;
    if (context_) {
      pooled = context_->forward(features, {}, cache.context, ctx).colwise().mean();
    } else {
      pooled = features.colwise().mean();
    }
    return linear_.forward(pooled, cache.linear);
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dlogits) {
    const Mat<T> dpooled = linear_.backward(cache.linear, dlogits);
    Mat<T> dseq = dpooled.replicate(cache.rows, 1) / static_cast<T>(cache.rows);
    if (context_) dseq = context_->backward(cache.context, dseq);
    return dseq;
  }

  void parameters(ParamList<T>& out) {
    if (context_) context_->parameters(out);
    linear_.parameters(out);
  }

  HeadKind kind() const { return kind_; }
  Linear<T>& linear() { return linear_; }
  Reconstructor<T>* context() { return context_ ? &*context_ : nullptr; }

 private:
  HeadKind kind_;
  std::optional<Reconstructor<T>> context_;
  Linear<T> linear_;
};

/// Softmax cross-entropy of a 1 x K logit row; writes d loss / d logits.
template <typename T>
double softmax_cross_entropy(const Mat<T>& logits, int label, Mat<T>& dlogits) {
  if (logits.rows() != 1 || label < 0 || label >= logits.cols())
    throw ValidationError("cross_entropy: bad logits shape or label");
  const double mx = static_cast<double>(logits.maxCoeff());
  double sum = 0.0;
  for (Eigen::Index k = 0; k < logits.cols(); ++k) sum += std::exp(static_cast<double>(logits(0, k)) - mx);
  const double lse = mx + std::log(sum);
  dlogits.resize(1, logits.cols());
  for (Eigen::Index k = 0; k < logits.cols(); ++k)
    dlogits(0, k) = static_cast<T>(std::exp(static_cast<double>(logits(0, k)) - lse) - (k == label ? 1.0 : 0.0));
  return lse - static_cast<double>(logits(0, label));
}

struct WindowStats {
  double loss = 0.0;
  std::size_t correct = 0;
  std::size_t masked = 0;
  int negatives = 0;  // K actually used for this window
  bool clamped = false;
};

/// Pre-training network: [GNN] -> encoder -> masked transformer, scored by the
/// contrastive objective. Parameters are created GNN first, then encoder, then
/// transformer, all from the same init stream.
template <typename T>
class PretrainModel {
 public:
  struct Cache {
    typename GnnStack<T>::Cache gnn;
    typename Encoder<T>::Cache encoder;
    typename Reconstructor<T>::Cache reconstructor;
  };

  PretrainModel(const RunConfig& config, const EdgeWeightMatrix& graph, Eigen::Index n, Rng& init)
      : config_(config), n_(n), channels_(static_cast<Eigen::Index>(graph.size())) {
    if (config.gnn.enabled()) gnn_.emplace(config.gnn, effective_graph(config.gnn, graph), n, init);
    encoder_.emplace(config.encoder, channels_, init);
    positions_ = config.encoder.output_length(static_cast<int>(n));
    if (positions_ < 2)
      throw ValidationError("pretrain: window of " + std::to_string(n) + " samples gives fewer than 2 feature steps");
    reconstructor_.emplace(config.transformer, positions_, init);
  }

  Mat<T> features(const Mat<T>& x, Cache& cache) const {
    if (x.rows() != channels_ || x.cols() != n_)
      throw ValidationError("pretrain: expected a " + std::to_string(channels_) + " x " + std::to_string(n_) +
                            " window");
    if (gnn_) return encoder_->forward(gnn_->forward(x, cache.gnn), cache.encoder);
    return encoder_->forward(x, cache.encoder);
  }

  /// Forward plus (optionally) backward for one window; gradients are scaled
  /// by grad_scale and accumulated into the parameters.
  WindowStats train_window(const Mat<T>& x, Rng& mask_rng, const ForwardContext& ctx, T grad_scale,
                           bool accumulate = true) {
    Cache cache;
    const Mat<T> z = features(x, cache);
    const MaskSpec mask = sample_mask(static_cast<std::size_t>(z.rows()), config_.masking.p_start,
                                      config_.masking.span, mask_rng);
    WindowStats stats;
    stats.masked = mask.masked_count();
    stats.negatives = std::min<int>(config_.contrastive.negatives, static_cast<int>(stats.masked) - 1);
    stats.clamped = stats.negatives < config_.contrastive.negatives;
    const Mat<T> r = reconstructor_->forward(z, mask.mask, cache.reconstructor, ctx);
    const auto res = contrastive_loss(r, z, mask, stats.negatives, config_.contrastive.temperature, mask_rng);
    stats.loss = res.loss;
    stats.correct = static_cast<std::size_t>(std::llround(res.accuracy * static_cast<double>(res.masked)));
    if (!accumulate) return stats;

    Mat<T> dz = reconstructor_->backward(cache.reconstructor, res.d_reconstructed * grad_scale);
    dz += res.d_targets * grad_scale;
    const Mat<T> dh = encoder_->backward(cache.encoder, dz);
    if (gnn_) gnn_->backward(cache.gnn, dh);
    return stats;
  }

  ParamList<T> parameters() {
    ParamList<T> out;
    if (gnn_) gnn_->parameters(out);
    encoder_->parameters(out);
    reconstructor_->parameters(out);
    return out;
  }

  const RunConfig& config() const { return config_; }
  Eigen::Index seq_len() const { return n_; }
  Eigen::Index channels() const { return channels_; }
  Eigen::Index positions() const { return positions_; }

 private:
  RunConfig config_;
  Eigen::Index n_;
  Eigen::Index channels_;
  Eigen::Index positions_ = 0;
  std::optional<GnnStack<T>> gnn_;
  std::optional<Encoder<T>> encoder_;
  std::optional<Reconstructor<T>> reconstructor_;
};

/// Downstream network: adjuster (m -> n) -> [GNN] -> encoder -> head.
/// Creation order matches PretrainModel for the shared parts so that
/// pre-trained tensors line up by name.
template <typename T>
class FinetuneModel {
 public:
  struct Cache {
    typename LinearAdjuster<T>::Cache adjuster;
    typename GnnStack<T>::Cache gnn;
    typename Encoder<T>::Cache encoder;
    typename ClassifierHead<T>::Cache head;
  };

  FinetuneModel(const RunConfig& config, const EdgeWeightMatrix& graph, Eigen::Index m, Eigen::Index n, Rng& init)
      : config_(config),
        adjust_(select_adjuster(static_cast<int>(m), static_cast<int>(n), config.adjuster)),
        channels_(static_cast<Eigen::Index>(graph.size())) {
    if (adjust_.kind == AdjusterKind::kLinear) linear_adjuster_.emplace(m, n);
    if (config.gnn.enabled()) gnn_.emplace(config.gnn, effective_graph(config.gnn, graph), n, init);
    encoder_.emplace(config.encoder, channels_, init);
    const Eigen::Index positions = config.encoder.output_length(static_cast<int>(n));
    head_.emplace(config.head.kind, config.transformer, positions, config.encoder.feature_dim, init);
  }

  Mat<T> logits(const Mat<T>& x, Cache& cache, const ForwardContext& ctx = {}) const {
    if (x.rows() != channels_ || x.cols() != adjust_.m)
      throw ValidationError("finetune: expected a " + std::to_string(channels_) + " x " + std::to_string(adjust_.m) +
                            " window");
    Mat<T> h;
    switch (adjust_.kind) {
      case AdjusterKind::kLinear:
        h = linear_adjuster_->forward(x, cache.adjuster);
        break;
      case AdjusterKind::kPadding:
        h = adjust_padding(x, adjust_.n);
        break;
      case AdjusterKind::kIdentity:
        h = x;
        break;
    }
    if (gnn_) h = gnn_->forward(h, cache.gnn);
    return head_->forward(encoder_->forward(h, cache.encoder), cache.head, ctx);
  }

  void backward(const Cache& cache, const Mat<T>& dlogits) {
    Mat<T> g = encoder_->backward(cache.encoder, head_->backward(cache.head, dlogits));
    if (gnn_) g = gnn_->backward(cache.gnn, g);
    if (linear_adjuster_) linear_adjuster_->backward(cache.adjuster, g);
  }

  ParamList<T> parameters() {
    ParamList<T> out;
    if (linear_adjuster_) linear_adjuster_->parameters(out);
    if (gnn_) gnn_->parameters(out);
    encoder_->parameters(out);
    head_->parameters(out);
    return out;
  }

  const AdjusterConfig& adjuster() const { return adjust_; }
  const RunConfig& config() const { return config_; }

 private:
  RunConfig config_;
  AdjusterConfig adjust_;
  Eigen::Index channels_;
  std::optional<LinearAdjuster<T>> linear_adjuster_;
  std::optional<GnnStack<T>> gnn_;
  std::optional<Encoder<T>> encoder_;
  std::optional<ClassifierHead<T>> head_;
};

}  // namespace graph_bendr
