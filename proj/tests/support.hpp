#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

#include "graph_bendr/common.hpp"
#include "graph_bendr/config.hpp"
#include "graph_bendr/rng.hpp"

namespace graph_bendr::testing {

inline MatD random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  MatD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, lo, hi);
  return m;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("graph_bendr_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

/// Small model for pipeline tests: n = 96 at 32 Hz (3 s), T' = 4.
inline RunConfig tiny_config() {
  RunConfig cfg;
  cfg.data.window_s = 3.0;
  cfg.data.sfreq = 32.0;
  cfg.encoder.feature_dim = 16;
  cfg.encoder.groups = 4;
  cfg.encoder.strides = {3, 2, 2, 2, 1, 1};
  cfg.transformer.layers = 1;
  cfg.transformer.heads = 2;
  cfg.transformer.model_dim = 16;
  cfg.transformer.ffn_dim = 32;
  cfg.transformer.dropout = 0.1;
  cfg.masking.p_start = 0.3;
  cfg.masking.span = 1;
  cfg.contrastive.negatives = 2;
  cfg.pretrain.steps = 4;
  cfg.pretrain.batch_size = 2;
  cfg.finetune.epochs = 2;
  cfg.finetune.batch_size = 4;
  cfg.gnn.hidden_dim = 16;
  return cfg;
}

}  // namespace graph_bendr::testing
