#include "graph_bendr/gnn.hpp"

namespace graph_bendr {

std::string to_string(GnnArchitecture arch) {
  switch (arch) {
    case GnnArchitecture::kGcn:
      return "gcn";
    case GnnArchitecture::kGat:
      return "gat";
    case GnnArchitecture::kSage:
      return "sage";
    case GnnArchitecture::kNone:
      break;
  }
  return "none";
}

GnnArchitecture gnn_architecture_from_string(const std::string& name) {
  if (name == "gcn") return GnnArchitecture::kGcn;
  if (name == "gat") return GnnArchitecture::kGat;
  if (name == "sage") return GnnArchitecture::kSage;
  if (name == "none") return GnnArchitecture::kNone;
  throw ConfigError("unknown gnn architecture '" + name + "' (expected gcn|gat|sage|none)");
}

void GnnConfig::validate() const {
  if (architecture == GnnArchitecture::kSage && use_edge_weights)
    throw ConfigError("gnn: GraphSAGE does not take edge weights");
  if (architecture == GnnArchitecture::kNone) return;
  if (layers < 1) throw ConfigError("gnn: layers must be >= 1");
  if (layers != 2 && !experimental) throw ConfigError("gnn: layers != 2 requires gnn.experimental = true");
  if (hidden_dim < 0) throw ConfigError("gnn: hidden_dim must be >= 0");
  if (gat_heads < 1) throw ConfigError("gnn: gat_heads must be >= 1");
  if (edge_embed_dim < 1) throw ConfigError("gnn: edge_embed_dim must be >= 1");
}

MatD gcn_propagation(const MatD& weights, bool use_edge_weights) {
  const Eigen::Index c = weights.rows();
  if (weights.cols() != c) throw ValidationError("gcn: edge weight matrix must be square");
  MatD a = use_edge_weights ? weights : MatD(MatD::Ones(c, c) - MatD::Identity(c, c));
  a += MatD::Identity(c, c);
  const Eigen::VectorXd degree = a.rowwise().sum();
  for (Eigen::Index i = 0; i < c; ++i)
    if (!(degree(i) > 0.0)) throw ValidationError("gcn: non-positive degree at node " + std::to_string(i));
  const Eigen::VectorXd inv_sqrt = degree.array().rsqrt();
  return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

EdgeWeightMatrix effective_graph(const GnnConfig& config, const EdgeWeightMatrix& graph) {
  if (config.permute_edge_weights_seed == 0) return graph;
  Rng rng = make_stream(config.permute_edge_weights_seed, Stream::kData);
  std::vector<std::size_t> perm(graph.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
  return graph.permuted(perm);
}

}  // namespace graph_bendr
