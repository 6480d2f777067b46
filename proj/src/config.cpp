#include "graph_bendr/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace graph_bendr {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("config: '" + section + "' must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!keys.count(key)) throw ConfigError("config: unknown key '" + section + "." + key + "'");
}

template <typename V>
void read(const json& obj, const char* key, V& out) {
  if (obj.contains(key)) out = obj.at(key).get<V>();
}

std::optional<std::uint64_t> read_optional_seed(const json& obj, const char* key) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return obj.at(key).get<std::uint64_t>();
}

}  // namespace

std::string to_string(HeadKind kind) { return kind == HeadKind::kLinear ? "linear" : "bendr"; }

HeadKind head_kind_from_string(const std::string& name) {
  if (name == "bendr") return HeadKind::kBendr;
  if (name == "linear") return HeadKind::kLinear;
  throw ConfigError("unknown head kind '" + name + "' (expected bendr|linear)");
}

StreamSeeds SeedConfig::streams() const {
  StreamSeeds s = StreamSeeds::from_master(seed);
  if (init) s.init = *init;
  if (mask) s.mask = *mask;
  if (sampling) s.sampling = *sampling;
  if (dropout) s.dropout = *dropout;
  return s;
}

void RunConfig::validate() const {
  if (!(data.window_s > 0.0) || !(data.sfreq > 0.0)) throw ConfigError("config: data.window_s and data.sfreq must be > 0");
  gnn.validate();
  encoder.validate();
  transformer.validate();
  if (transformer.model_dim != encoder.feature_dim)
    throw ConfigError("config: transformer.model_dim must equal encoder.feature_dim");
  if (!(masking.p_start > 0.0 && masking.p_start < 1.0)) throw ConfigError("config: masking.p_start must be in (0, 1)");
  if (masking.span < 1) throw ConfigError("config: masking.span must be >= 1");
  if (contrastive.negatives < 0) throw ConfigError("config: contrastive.negatives must be >= 0");
  if (!(contrastive.temperature > 0.0)) throw ConfigError("config: contrastive.temperature must be > 0");
  if (head.num_classes != 2) throw ConfigError("config: only binary heads are supported");
  if (adjuster == AdjusterKind::kIdentity) throw ConfigError("config: adjuster must be linear or padding");
  if (!(optimizer.lr > 0.0) || !(finetune.lr > 0.0)) throw ConfigError("config: learning rates must be > 0");
  if (pretrain.steps < 0 || pretrain.batch_size < 1) throw ConfigError("config: invalid pretrain section");
  if (finetune.epochs < 0 || finetune.batch_size < 1) throw ConfigError("config: invalid finetune section");
}

RunConfig RunConfig::from_json(const json& doc) {
  RunConfig c;
  try {
    reject_unknown(doc, "<root>",
                   {"montage", "data", "gnn", "adjuster", "encoder", "transformer", "masking", "contrastive", "head",
                    "optimizer", "pretrain", "finetune", "seeds"});
    read(doc, "montage", c.montage);
    if (doc.contains("data")) {
      const auto& s = doc.at("data");
      reject_unknown(s, "data", {"window_s", "sfreq"});
      read(s, "window_s", c.data.window_s);
      read(s, "sfreq", c.data.sfreq);
    }
    if (doc.contains("gnn")) {
      const auto& s = doc.at("gnn");
      reject_unknown(s, "gnn",
                     {"architecture", "edge_weights", "layers", "hidden_dim", "gat_heads", "edge_embed_dim",
                      "experimental", "permute_edge_weights_seed"});
      if (s.contains("architecture")) c.gnn.architecture = gnn_architecture_from_string(s.at("architecture"));
      read(s, "edge_weights", c.gnn.use_edge_weights);
      read(s, "layers", c.gnn.layers);
      read(s, "hidden_dim", c.gnn.hidden_dim);
      read(s, "gat_heads", c.gnn.gat_heads);
      read(s, "edge_embed_dim", c.gnn.edge_embed_dim);
      read(s, "experimental", c.gnn.experimental);
      read(s, "permute_edge_weights_seed", c.gnn.permute_edge_weights_seed);
    }
    if (doc.contains("adjuster")) c.adjuster = adjuster_kind_from_string(doc.at("adjuster"));
    if (doc.contains("encoder")) {
      const auto& s = doc.at("encoder");
      reject_unknown(s, "encoder", {"feature_dim", "kernels", "strides", "groups"});
      read(s, "feature_dim", c.encoder.feature_dim);
      read(s, "kernels", c.encoder.kernels);
      read(s, "strides", c.encoder.strides);
      read(s, "groups", c.encoder.groups);
    }
    c.transformer.model_dim = c.encoder.feature_dim;
    c.transformer.ffn_dim = 4 * c.encoder.feature_dim;
    if (doc.contains("transformer")) {
      const auto& s = doc.at("transformer");
      reject_unknown(s, "transformer", {"layers", "heads", "model_dim", "ffn_dim", "dropout"});
      read(s, "layers", c.transformer.layers);
      read(s, "heads", c.transformer.heads);
      read(s, "model_dim", c.transformer.model_dim);
      read(s, "ffn_dim", c.transformer.ffn_dim);
      read(s, "dropout", c.transformer.dropout);
    }
    if (doc.contains("masking")) {
      const auto& s = doc.at("masking");
      reject_unknown(s, "masking", {"p_start", "span"});
      read(s, "p_start", c.masking.p_start);
      read(s, "span", c.masking.span);
    }
    if (doc.contains("contrastive")) {
      const auto& s = doc.at("contrastive");
      reject_unknown(s, "contrastive", {"negatives", "temperature"});
      read(s, "negatives", c.contrastive.negatives);
      read(s, "temperature", c.contrastive.temperature);
    }
    if (doc.contains("head")) {
      const auto& s = doc.at("head");
      reject_unknown(s, "head", {"kind", "num_classes"});
      if (s.contains("kind")) c.head.kind = head_kind_from_string(s.at("kind"));
      read(s, "num_classes", c.head.num_classes);
    }
    if (doc.contains("optimizer")) {
      const auto& s = doc.at("optimizer");
      reject_unknown(s, "optimizer", {"lr", "beta1", "beta2", "eps"});
      read(s, "lr", c.optimizer.lr);
      read(s, "beta1", c.optimizer.beta1);
      read(s, "beta2", c.optimizer.beta2);
      read(s, "eps", c.optimizer.eps);
    }
    if (doc.contains("pretrain")) {
      const auto& s = doc.at("pretrain");
      reject_unknown(s, "pretrain", {"steps", "batch_size"});
      read(s, "steps", c.pretrain.steps);
      read(s, "batch_size", c.pretrain.batch_size);
    }
    if (doc.contains("finetune")) {
      const auto& s = doc.at("finetune");
      reject_unknown(s, "finetune", {"epochs", "batch_size", "lr"});
      read(s, "epochs", c.finetune.epochs);
      read(s, "batch_size", c.finetune.batch_size);
      read(s, "lr", c.finetune.lr);
    }
    if (doc.contains("seeds")) {
      const auto& s = doc.at("seeds");
      reject_unknown(s, "seeds", {"seed", "init", "mask", "sampling", "dropout"});
      read(s, "seed", c.seeds.seed);
      c.seeds.init = read_optional_seed(s, "init");
      c.seeds.mask = read_optional_seed(s, "mask");
      c.seeds.sampling = read_optional_seed(s, "sampling");
      c.seeds.dropout = read_optional_seed(s, "dropout");
    }
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  c.validate();
  return c;
}

json RunConfig::to_json() const {
  auto opt = [](const std::optional<std::uint64_t>& v) { return v ? json(*v) : json(nullptr); };
  return {
      {"montage", montage},
      {"data", {{"window_s", data.window_s}, {"sfreq", data.sfreq}}},
      {"gnn",
       {{"architecture", to_string(gnn.architecture)},
        {"edge_weights", gnn.use_edge_weights},
        {"layers", gnn.layers},
        {"hidden_dim", gnn.hidden_dim},
        {"gat_heads", gnn.gat_heads},
        {"edge_embed_dim", gnn.edge_embed_dim},
        {"experimental", gnn.experimental},
        {"permute_edge_weights_seed", gnn.permute_edge_weights_seed}}},
      {"adjuster", to_string(adjuster)},
      {"encoder",
       {{"feature_dim", encoder.feature_dim},
        {"kernels", encoder.kernels},
        {"strides", encoder.strides},
        {"groups", encoder.groups}}},
      {"transformer",
       {{"layers", transformer.layers},
        {"heads", transformer.heads},
        {"model_dim", transformer.model_dim},
        {"ffn_dim", transformer.ffn_dim},
        {"dropout", transformer.dropout}}},
      {"masking", {{"p_start", masking.p_start}, {"span", masking.span}}},
      {"contrastive", {{"negatives", contrastive.negatives}, {"temperature", contrastive.temperature}}},
      {"head", {{"kind", to_string(head.kind)}, {"num_classes", head.num_classes}}},
      {"optimizer",
       {{"lr", optimizer.lr}, {"beta1", optimizer.beta1}, {"beta2", optimizer.beta2}, {"eps", optimizer.eps}}},
      {"pretrain", {{"steps", pretrain.steps}, {"batch_size", pretrain.batch_size}}},
      {"finetune", {{"epochs", finetune.epochs}, {"batch_size", finetune.batch_size}, {"lr", finetune.lr}}},
      {"seeds",
       {{"seed", seeds.seed},
        {"init", opt(seeds.init)},
        {"mask", opt(seeds.mask)},
        {"sampling", opt(seeds.sampling)},
        {"dropout", opt(seeds.dropout)}}},
  };
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& ex) {
    throw ConfigError("config " + path + ": " + ex.what());
  }
  return from_json(doc);
}

void apply_seed_override(RunConfig& config) {
  if (const char* env = std::getenv("GRAPH_BENDR_SEED"); env != nullptr && *env != '\0') {
    try {
      config.seeds.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("GRAPH_BENDR_SEED is not an integer: ") + env);
    }
  }
}

void TransformerConfig::validate() const {
  if (layers < 0) throw ConfigError("transformer: layers must be >= 0");
  if (heads < 1 || model_dim % heads != 0) throw ConfigError("transformer: model_dim must be divisible by heads");
  if (ffn_dim < 1) throw ConfigError("transformer: ffn_dim must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("transformer: dropout must be in [0, 1)");
}

int EncoderConfig::downsample_factor() const {
  int f = 1;
  for (int s : strides) f *= s;
  return f;
}

int EncoderConfig::output_length(int n) const { return n / downsample_factor(); }

void EncoderConfig::validate() const {
  if (kernels.size() != 6 || strides.size() != 6) throw ConfigError("encoder: exactly 6 blocks are required");
  for (std::size_t i = 0; i < 6; ++i)
    if (kernels[i] < 1 || strides[i] < 1) throw ConfigError("encoder: kernels and strides must be >= 1");
  if (feature_dim < 8) throw ConfigError("encoder: feature_dim must be >= 8");
  if (groups < 1 || feature_dim % groups != 0) throw ConfigError("encoder: feature_dim must be divisible by groups");
}

}  // namespace graph_bendr
