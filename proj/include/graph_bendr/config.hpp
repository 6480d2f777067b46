#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "graph_bendr/adam.hpp"
#include "graph_bendr/adjust.hpp"
#include "graph_bendr/contrastive.hpp"
#include "graph_bendr/encoder.hpp"
#include "graph_bendr/gnn.hpp"
#include "graph_bendr/transformer.hpp"

namespace graph_bendr {

enum class HeadKind { kBendr, kLinear };

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& name);

struct HeadConfig {
  HeadKind kind = HeadKind::kBendr;
  int num_classes = 2;
};

struct DataConfig {
  double window_s = 60.0;  // pre-training window length
  double sfreq = 256.0;
};

struct PretrainConfig {
  int steps = 300;
  int batch_size = 8;
};

struct FinetuneConfig {
  int epochs = 10;
  int batch_size = 8;
  double lr = 1e-3;
};

struct SeedConfig {
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> init, mask, sampling, dropout;

  StreamSeeds streams() const;
};

/// Complete run configuration; every section maps to one JSON object key.
struct RunConfig {
  std::string montage = "default";
  DataConfig data;
  GnnConfig gnn;
  AdjusterKind adjuster = AdjusterKind::kLinear;
  EncoderConfig encoder;
  TransformerConfig transformer;
  MaskingConfig masking;
  ContrastiveConfig contrastive;
  HeadConfig head;
  AdamConfig optimizer;
  PretrainConfig pretrain;
  FinetuneConfig finetune;
  SeedConfig seeds;

  void validate() const;

  /// Missing keys take defaults; unknown keys raise ConfigError.
  static RunConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  static RunConfig load(const std::string& path);
};

/// Applies GRAPH_BENDR_SEED, when set, as the master seed.
void apply_seed_override(RunConfig& config);

}  // namespace graph_bendr
