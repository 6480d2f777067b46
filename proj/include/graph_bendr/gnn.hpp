#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "graph_bendr/graph.hpp"
#include "graph_bendr/param.hpp"

namespace graph_bendr {

enum class GnnArchitecture { kNone, kGcn, kGat, kSage };

std::string to_string(GnnArchitecture arch);
GnnArchitecture gnn_architecture_from_string(const std::string& name);

struct GnnConfig {
  GnnArchitecture architecture = GnnArchitecture::kNone;
  bool use_edge_weights = false;
  int layers = 2;
  int hidden_dim = 0;  // 0: same as the sequence length n
  int gat_heads = 1;
  int edge_embed_dim = 4;
  bool experimental = false;  // permits layers != 2
  // Nonzero: node labels of W are shuffled with this seed before use
  // (geometry ablation).
  std::uint64_t permute_edge_weights_seed = 0;

  bool enabled() const { return architecture != GnnArchitecture::kNone; }
  int resolved_hidden(int n) const { return hidden_dim > 0 ? hidden_dim : n; }
  void validate() const;
};

/// Symmetric renormalized operator D^-1/2 (A + I) D^-1/2 where A is W, or the
/// all-ones off-diagonal matrix when edge weights are off.
MatD gcn_propagation(const MatD& weights, bool use_edge_weights);

/// The graph a configured stack sees: `graph` itself, or a seeded random
/// relabeling of it when permute_edge_weights_seed is nonzero.
EdgeWeightMatrix effective_graph(const GnnConfig& config, const EdgeWeightMatrix& graph);

/// Dense GCN layer: Y = P X Theta + b.
template <typename T>
class GcnLayer {
 public:
  struct Cache {
    Mat<T> px;
  };

  GcnLayer(const std::string& name, Eigen::Index in, Eigen::Index out, const MatD& weights,
           bool use_edge_weights, Rng& rng)
      : propagation_(gcn_propagation(weights, use_edge_weights).template cast<T>()),
        theta_(name + ".theta", init_uniform<T>(in, out, in, rng)),
        bias_(name + ".bias", Mat<T>::Zero(1, out)) {}

  Mat<T> forward(const Mat<T>& x, Cache& cache) const {
    check_input(x);
    cache.px = propagation_ * x;
    Mat<T> y = cache.px * theta_.value;
    y.rowwise() += bias_.value.row(0);
    return y;
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy) {
    theta_.grad.noalias() += cache.px.transpose() * dy;
    bias_.grad += dy.colwise().sum();
    const Mat<T> dpx = dy * theta_.value.transpose();
    return propagation_.transpose() * dpx;
  }

  void parameters(ParamList<T>& out) {
    out.push_back(&theta_);
    out.push_back(&bias_);
  }

  const Mat<T>& propagation() const { return propagation_; }
  Parameter<T>& theta() { return theta_; }
  Parameter<T>& bias() { return bias_; }

 private:
  void check_input(const Mat<T>& x) const {
    if (x.rows() != propagation_.rows() || x.cols() != theta_.value.rows())
      throw ValidationError(theta_.name + ": input shape mismatch");
  }

  Mat<T> propagation_;
  Parameter<T> theta_;
  Parameter<T> bias_;
};

/// Dense multi-head graph attention over the complete graph plus self loops.
/// Per head: e_ij = LeakyReLU(a_src . z_i + a_dst . z_j + a_edge . (theta_e w_ij)),
/// alpha = softmax_j(e), out_i = sum_j alpha_ij z_j with z = X Theta_head.
template <typename T>
class GatLayer {
 public:
  static constexpr double kNegativeSlope = 0.2;

  struct Cache {
    Mat<T> x;
    Mat<T> z;
    std::vector<Mat<T>> pre;    // per head, C x C logits before LeakyReLU
    std::vector<Mat<T>> alpha;  // per head, C x C attention
  };

  GatLayer(const std::string& name, Eigen::Index in, Eigen::Index out, const MatD& weights,
           bool use_edge_weights, int heads, int edge_embed_dim, Rng& rng)
      : heads_(heads), use_edge_weights_(use_edge_weights) {
    if (heads < 1 || out % heads != 0)
      throw ValidationError(name + ": output width must be divisible by the head count");
    const Eigen::Index head_dim = out / heads;
    edge_weights_ = weights.template cast<T>();
    edge_weights_.diagonal().setZero();
    theta_ = Parameter<T>(name + ".theta", init_uniform<T>(in, out, in, rng));
    const Eigen::Index att_fan_in = 2 * head_dim + (use_edge_weights ? edge_embed_dim : 0);
    att_src_ = Parameter<T>(name + ".att_src", init_uniform<T>(heads, head_dim, att_fan_in, rng));
    att_dst_ = Parameter<T>(name + ".att_dst", init_uniform<T>(heads, head_dim, att_fan_in, rng));
    if (use_edge_weights) {
      att_edge_ = Parameter<T>(name + ".att_edge", init_uniform<T>(heads, edge_embed_dim, att_fan_in, rng));
      edge_embed_ = Parameter<T>(name + ".edge_embed", init_uniform<T>(1, edge_embed_dim, 1, rng));
    }
  }

  Mat<T> forward(const Mat<T>& x, Cache& cache) const {
    if (x.rows() != edge_weights_.rows() || x.cols() != theta_.value.rows())
      throw ValidationError(theta_.name + ": input shape mismatch");
    const Eigen::Index c = x.rows();
    const Eigen::Index hd = head_dim();
    cache.x = x;
    cache.z = x * theta_.value;
    cache.pre.assign(static_cast<std::size_t>(heads_), Mat<T>());
    cache.alpha.assign(static_cast<std::size_t>(heads_), Mat<T>());
    Mat<T> out(c, theta_.value.cols());
    for (int h = 0; h < heads_; ++h) {
      const auto z = cache.z.middleCols(h * hd, hd);
      const Mat<T> s = z * att_src_.value.row(h).transpose();  // C x 1
      const Mat<T> t = z * att_dst_.value.row(h).transpose();  // C x 1
      Mat<T> pre(c, c);
      const T edge_scale = edge_coefficient(h);
      for (Eigen::Index i = 0; i < c; ++i)
        for (Eigen::Index j = 0; j < c; ++j) pre(i, j) = s(i, 0) + t(j, 0) + edge_scale * edge_weights_(i, j);
      Mat<T> alpha(c, c);
      for (Eigen::Index i = 0; i < c; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) alpha(i, j) = leaky(pre(i, j));
        const T mx = alpha.row(i).maxCoeff();
        alpha.row(i) = (alpha.row(i).array() - mx).exp();
        alpha.row(i) /= alpha.row(i).sum();
      }
      out.middleCols(h * hd, hd) = alpha * z;
      cache.pre[static_cast<std::size_t>(h)] = std::move(pre);
      cache.alpha[static_cast<std::size_t>(h)] = std::move(alpha);
    }
    return out;
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy) {
    const Eigen::Index c = cache.x.rows();
    const Eigen::Index hd = head_dim();
    Mat<T> dz = Mat<T>::Zero(c, theta_.value.cols());
    for (int h = 0; h < heads_; ++h) {
      const auto& alpha = cache.alpha[static_cast<std::size_t>(h)];
      const auto& pre = cache.pre[static_cast<std::size_t>(h)];
      const auto z = cache.z.middleCols(h * hd, hd);
      const auto dout = dy.middleCols(h * hd, hd);
      dz.middleCols(h * hd, hd).noalias() += alpha.transpose() * dout;
      const Mat<T> dalpha = dout * z.transpose();  // C x C
      Mat<T> dpre(c, c);
      for (Eigen::Index i = 0; i < c; ++i) {
        const T dot = alpha.row(i).dot(dalpha.row(i));
        for (Eigen::Index j = 0; j < c; ++j) {
          const T de = alpha(i, j) * (dalpha(i, j) - dot);
          dpre(i, j) = pre(i, j) > T(0) ? de : static_cast<T>(kNegativeSlope) * de;
        }
      }
      const Mat<T> ds = dpre.rowwise().sum();                 // C x 1
      const Mat<T> dt = dpre.colwise().sum().transpose();     // C x 1
      att_src_.grad.row(h).noalias() += (z.transpose() * ds).transpose();
      att_dst_.grad.row(h).noalias() += (z.transpose() * dt).transpose();
      dz.middleCols(h * hd, hd).noalias() += ds * att_src_.value.row(h);
      dz.middleCols(h * hd, hd).noalias() += dt * att_dst_.value.row(h);
      if (use_edge_weights_) {
        const T dscale = dpre.cwiseProduct(edge_weights_).sum();
        att_edge_.grad.row(h) += dscale * edge_embed_.value.row(0);
        edge_embed_.grad.row(0) += dscale * att_edge_.value.row(h);
      }
    }
    theta_.grad.noalias() += cache.x.transpose() * dz;
    return dz * theta_.value.transpose();
  }

  void parameters(ParamList<T>& out) {
    out.push_back(&theta_);
    out.push_back(&att_src_);
    out.push_back(&att_dst_);
    if (use_edge_weights_) {
      out.push_back(&att_edge_);
      out.push_back(&edge_embed_);
    }
  }

  int heads() const { return heads_; }
  Eigen::Index head_dim() const { return theta_.value.cols() / heads_; }
  Parameter<T>& theta() { return theta_; }
  Parameter<T>& att_src() { return att_src_; }
  Parameter<T>& att_dst() { return att_dst_; }
  Parameter<T>& att_edge() { return att_edge_; }
  Parameter<T>& edge_embed() { return edge_embed_; }

 private:
  static T leaky(T v) { return v > T(0) ? v : static_cast<T>(kNegativeSlope) * v; }

  T edge_coefficient(int h) const {
    if (!use_edge_weights_) return T(0);
    return att_edge_.value.row(h).dot(edge_embed_.value.row(0));
  }

  int heads_;
  bool use_edge_weights_;
  Mat<T> edge_weights_;
  Parameter<T> theta_;
  Parameter<T> att_src_;
  Parameter<T> att_dst_;
  Parameter<T> att_edge_;
  Parameter<T> edge_embed_;
};

/// GraphSAGE with the full-neighborhood mean aggregator:
/// out_i = x_i Theta_self + mean_{j != i}(x_j) Theta_neigh + b.
template <typename T>
class SageLayer {
 public:
  struct Cache {
    Mat<T> x;
    Mat<T> neigh;
  };

  SageLayer(const std::string& name, Eigen::Index nodes, Eigen::Index in, Eigen::Index out, Rng& rng) {
    if (nodes < 2) throw ValidationError(name + ": GraphSAGE needs at least 2 nodes (empty neighbor set)");
    const T inv = T(1) / static_cast<T>(nodes - 1);
    mean_ = Mat<T>::Constant(nodes, nodes, inv);
    mean_.diagonal().setZero();
    theta_self_ = Parameter<T>(name + ".theta_self", init_uniform<T>(in, out, in, rng));
    theta_neigh_ = Parameter<T>(name + ".theta_neigh", init_uniform<T>(in, out, in, rng));
    bias_ = Parameter<T>(name + ".bias", Mat<T>::Zero(1, out));
  }

  Mat<T> forward(const Mat<T>& x, Cache& cache) const {
    if (x.rows() != mean_.rows() || x.cols() != theta_self_.value.rows())
      throw ValidationError(theta_self_.name + ": input shape mismatch");
    cache.x = x;
    cache.neigh = mean_ * x;
    Mat<T> y = x * theta_self_.value;
    y.noalias() += cache.neigh * theta_neigh_.value;
    y.rowwise() += bias_.value.row(0);
    return y;
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy) {
    theta_self_.grad.noalias() += cache.x.transpose() * dy;
    theta_neigh_.grad.noalias() += cache.neigh.transpose() * dy;
    bias_.grad += dy.colwise().sum();
    Mat<T> dx = dy * theta_self_.value.transpose();
    dx.noalias() += mean_.transpose() * (dy * theta_neigh_.value.transpose());
    return dx;
  }

  void parameters(ParamList<T>& out) {
    out.push_back(&theta_self_);
    out.push_back(&theta_neigh_);
    out.push_back(&bias_);
  }

  Parameter<T>& theta_self() { return theta_self_; }
  Parameter<T>& theta_neigh() { return theta_neigh_; }
  Parameter<T>& bias() { return bias_; }

 private:
  Mat<T> mean_;
  Parameter<T> theta_self_;
  Parameter<T> theta_neigh_;
  Parameter<T> bias_;
};

/// Shape-preserving GNN front-end: layer -> ReLU -> ... -> layer, C x n in and out.
template <typename T>
class GnnStack {
 public:
  using Layer = std::variant<GcnLayer<T>, GatLayer<T>, SageLayer<T>>;
  using LayerCache = std::variant<typename GcnLayer<T>::Cache, typename GatLayer<T>::Cache,
                                  typename SageLayer<T>::Cache>;

  struct Cache {
    std::vector<LayerCache> layers;
    std::vector<Mat<T>> pre_relu;
  };

  GnnStack(const GnnConfig& config, const EdgeWeightMatrix& graph, Eigen::Index n, Rng& rng,
           const std::string& name = "gnn")
      : config_(config), n_(n) {
    config.validate();
    if (!config.enabled()) throw ValidationError("GnnStack: architecture 'none' has no layers");
    const Eigen::Index hidden = config.resolved_hidden(static_cast<int>(n));
    const Eigen::Index c = static_cast<Eigen::Index>(graph.size());
    for (int l = 0; l < config.layers; ++l) {
      const Eigen::Index in = l == 0 ? n : hidden;
      const Eigen::Index out = l == config.layers - 1 ? n : hidden;
      const std::string lname = name + "." + std::to_string(l);
      switch (config.architecture) {
        case GnnArchitecture::kGcn:
          layers_.emplace_back(std::in_place_type<GcnLayer<T>>, lname, in, out, graph.weights,
                               config.use_edge_weights, rng);
          break;
        case GnnArchitecture::kGat:
          layers_.emplace_back(std::in_place_type<GatLayer<T>>, lname, in, out, graph.weights,
                               config.use_edge_weights, config.gat_heads, config.edge_embed_dim, rng);
          break;
        case GnnArchitecture::kSage:
          layers_.emplace_back(std::in_place_type<SageLayer<T>>, lname, c, in, out, rng);
          break;
        case GnnArchitecture::kNone:
          break;
      }
    }
  }

  Mat<T> forward(const Mat<T>& x, Cache& cache) const {
    if (x.cols() != n_) throw ValidationError("gnn: expected " + std::to_string(n_) + " columns");
    cache.layers.clear();
    cache.pre_relu.clear();
    Mat<T> h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (l > 0) {
        cache.pre_relu.push_back(h);
        h = h.cwiseMax(T(0));
      }
      h = std::visit(
          [&](const auto& layer) {
            typename std::decay_t<decltype(layer)>::Cache lc;
            Mat<T> out = layer.forward(h, lc);
            cache.layers.emplace_back(std::move(lc));
            return out;
          },
          layers_[l]);
    }
    return h;
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy) {
    Mat<T> g = dy;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      g = std::visit(
          [&](auto& layer) {
            using Lc = typename std::decay_t<decltype(layer)>::Cache;
            return layer.backward(std::get<Lc>(cache.layers[l]), g);
          },
          layers_[l]);
      if (l > 0) {
        const auto& pre = cache.pre_relu[l - 1];
        g = (pre.array() > T(0)).select(g, T(0));
      }
    }
    return g;
  }

  void parameters(ParamList<T>& out) {
    for (auto& layer : layers_) std::visit([&](auto& l) { l.parameters(out); }, layer);
  }

  const GnnConfig& config() const { return config_; }
  std::vector<Layer>& layers() { return layers_; }

 private:
  GnnConfig config_;
  Eigen::Index n_;
  std::vector<Layer> layers_;
};

}  // namespace graph_bendr
