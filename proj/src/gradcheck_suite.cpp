#include "graph_bendr/gradcheck_suite.hpp"

#include <cmath>

#include "graph_bendr/adjust.hpp"
#include "graph_bendr/config.hpp"
#include "graph_bendr/gnn.hpp"
#include "graph_bendr/model.hpp"
#include "graph_bendr/transformer.hpp"

namespace graph_bendr {

namespace {

template <typename L>
void perturb(L& layer, Rng& rng) {
  ParamList<double> params;
  layer.parameters(params);
  for (auto* p : params)
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += uniform(rng, -0.5, 0.5);
}

MatD random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  MatD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -1.0, 1.0);
  return m;
}

EdgeWeightMatrix random_graph(Eigen::Index c, Rng& rng) {
  EdgeWeightMatrix g;
  g.weights = MatD::Zero(c, c);
  for (Eigen::Index i = 0; i < c; ++i)
    for (Eigen::Index j = i + 1; j < c; ++j) g.weights(i, j) = g.weights(j, i) = uniform(rng, 0.3, 3.0);
  g.montage_name = "random";
  for (Eigen::Index i = 0; i < c; ++i) g.labels.push_back("N" + std::to_string(i));
  return g;
}

// True when every parameter receives some gradient and no analytic gradient
// entry is nonzero yet below 1e-5, where finite-difference roundoff (about
// 1e-10 here) would dominate the relative error. Such entries appear when attention saturates or, on a complete graph,
// when a first GAT layer has already made the node rows nearly equal.
template <typename L>
bool informative(L& layer, const MatD& input) {
  ParamList<double> params;
  layer.parameters(params);
  zero_grads(params);
  typename L::Cache cache;
  const MatD y = layer.forward(input, cache);
  layer.backward(cache, MatD::Ones(y.rows(), y.cols()));
  bool ok = true;
  for (auto* p : params) {
    ok = ok && !p->grad.isZero(0.0);
    for (Eigen::Index i = 0; i < p->grad.size(); ++i) {
      const double g = std::abs(p->grad.data()[i]);
      ok = ok && (g == 0.0 || g >= 1e-5);
    }
  }
  zero_grads(params);
  return ok;
}

// Reconstructor with a fixed mask, shaped for grad_check.
struct MaskedReconstructor {
  using Cache = Reconstructor<double>::Cache;
  Reconstructor<double> inner;
  std::vector<bool> mask;

  MatD forward(const MatD& x, Cache& cache) const { return inner.forward(x, mask, cache); }
  MatD backward(const Cache& cache, const MatD& dy) { return inner.backward(cache, dy); }
  void parameters(ParamList<double>& out) { inner.parameters(out); }
};

}  // namespace

std::vector<GradCheckReport> run_gradcheck_suite(const GradCheckSuiteOptions& options) {
  Rng rng = make_stream(options.seed, Stream::kInit);
  std::vector<GradCheckReport> out;
  // Redraws the perturbation and input a bounded number of times until the
  // draw is informative; the last draw is checked regardless.
  constexpr int kMaxDraws = 256;
  auto check = [&](auto& layer, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
    ParamList<double> params;
    layer.parameters(params);
    std::vector<MatD> initial;
    for (auto* p : params) initial.push_back(p->value);
    MatD input;
    for (int draw = 0; draw < kMaxDraws; ++draw) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = initial[i];
      perturb(layer, rng);
      input = random_matrix(rows, cols, rng);
      if (informative(layer, input)) break;
    }
    out.push_back(grad_check(layer, input, options.eps, options.tol, name));
  };

  {
    Linear<double> layer("linear", 5, 3, rng);
    check(layer, 4, 5, "linear");
  }
  {
    LinearAdjuster<double> layer(3, 5);
    check(layer, 2, 3, "adjuster.linear");
  }

  const Eigen::Index c = 4;
  const EdgeWeightMatrix graph = random_graph(c, rng);
  for (bool ew : {false, true}) {
    const std::string suffix = ew ? "+ew" : "";
    {
      GcnLayer<double> layer("gcn", 6, 5, graph.weights, ew, rng);
      check(layer, c, 6, "gcn" + suffix);
    }
    {
      GatLayer<double> layer("gat", 6, 6, graph.weights, ew, 2, 3, rng);
      check(layer, c, 6, "gat" + suffix);
    }
  }
  {
    SageLayer<double> layer("sage", c, 6, 5, rng);
    check(layer, c, 6, "sage");
  }
  const std::pair<GnnArchitecture, bool> stacks[] = {{GnnArchitecture::kGcn, false}, {GnnArchitecture::kGcn, true},
                                                     {GnnArchitecture::kGat, false}, {GnnArchitecture::kGat, true},
                                                     {GnnArchitecture::kSage, false}};
  for (const auto& [arch, ew] : stacks) {
    GnnConfig cfg;
    cfg.architecture = arch;
    cfg.use_edge_weights = ew;
    GnnStack<double> stack(cfg, graph, 8, rng);
    check(stack, c, 8, "gnn_stack." + to_string(arch) + (ew ? "+ew" : ""));
  }

  {
    Conv1d<double> layer("conv1d", 3, 4, 3, 2, rng);
    check(layer, 11, 3, "conv1d");
  }
  {
    GroupNorm<double> layer("groupnorm", 8, 4);
    check(layer, 5, 8, "groupnorm");
  }
  options.encoder.validate();
  const Eigen::Index d = 16;
  for (std::size_t b = 0; b < options.encoder.kernels.size(); ++b) {
    const Eigen::Index in = b == 0 ? c : d;
    const int stride = options.encoder.strides[b];
    EncoderBlock<double> block("encoder.block" + std::to_string(b), in, d, options.encoder.kernels[b], stride, 8, rng);
    check(block, 4 * stride + 1, in, "encoder.block" + std::to_string(b));
  }

  TransformerConfig tcfg;
  tcfg.layers = 1;
  tcfg.heads = 2;
  tcfg.model_dim = 8;
  tcfg.ffn_dim = 16;
  tcfg.dropout = 0.0;
  {
    LayerNorm<double> layer("layernorm", 8);
    check(layer, 5, 8, "layernorm");
  }
  {
    MultiHeadAttention<double> layer("attention", 8, 2, rng);
    check(layer, 6, 8, "attention");
  }
  {
    TransformerLayer<double> layer("transformer.layer0", tcfg, rng);
    check(layer, 6, 8, "transformer.layer");
  }
  {
    MaskedReconstructor rec{Reconstructor<double>(tcfg, 6, rng), {false, true, true, false, false, true}};
    check(rec, 6, 8, "reconstructor");
  }
  for (HeadKind kind : {HeadKind::kBendr, HeadKind::kLinear}) {
    ClassifierHead<double> head(kind, tcfg, 6, 8, rng);
    check(head, 6, 8, "head." + to_string(kind));
  }
  return out;
}

}  // namespace graph_bendr
