#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graph_bendr/common.hpp"
#include "graph_bendr/param.hpp"

namespace graph_bendr {

struct NamedTensor {
  std::string name;
  MatF value;
};

/// Binary snapshot: magic "GBCKPT01", u32 little-endian header length, JSON
/// header {config, manifest, rng_state, step, model}, then float32 payloads
/// in manifest order.
struct Checkpoint {
  nlohmann::json config;
  nlohmann::json model;  // seq_len, channels, channel_labels
  std::vector<NamedTensor> tensors;
  std::string rng_state;
  std::int64_t step = 0;

  const NamedTensor* find(const std::string& name) const;

  /// Serialized bytes; identical inputs give identical bytes.
  std::string to_bytes() const;
  static Checkpoint from_bytes(const std::string& bytes);

  /// Writes to a temporary file and renames it into place.
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  template <typename T>
  void add(const ParamList<T>& params, const std::string& prefix = "") {
    for (const auto* p : params) tensors.push_back({prefix + p->name, p->value.template cast<float>()});
  }

  /// Copies every tensor whose name matches a parameter; returns the number of
  /// parameters filled. Shape mismatches throw.
  template <typename T>
  std::size_t fill(const ParamList<T>& params) const {
    std::size_t filled = 0;
    for (auto* p : params) {
      const NamedTensor* t = find(p->name);
      if (t == nullptr) continue;
      if (t->value.rows() != p->value.rows() || t->value.cols() != p->value.cols())
        throw ValidationError("checkpoint tensor '" + p->name + "' has an incompatible shape");
      p->value = t->value.template cast<T>();
      ++filled;
    }
    return filled;
  }
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

}  // namespace graph_bendr
