#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graph_bendr/checkpoint.hpp"
#include "graph_bendr/config.hpp"
#include "graph_bendr/model.hpp"
#include "graph_bendr/montage.hpp"
#include "graph_bendr/signal.hpp"

namespace graph_bendr {

/// Receives human-readable progress lines.
using Progress = std::function<void(const std::string&)>;

struct CurvePoint {
  int step = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double chance = 0.0;
};

struct EvalStats {
  double loss = 0.0;
  double accuracy = 0.0;
  double chance = 0.0;
  std::size_t windows = 0;
};

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<CurvePoint> curve;
  EvalStats initial;
  EvalStats trained;
  std::size_t clamped_windows = 0;  // windows where K was reduced to masked - 1
};

/// Channel selection, resampling to config.data.sfreq, per-recording z-score
/// and windowing to config.data.window_s.
std::vector<MatF> prepare_pretrain_windows(const std::vector<Recording>& recordings, const Montage& montage,
                                           const RunConfig& config);

/// Masked contrastive pre-training. All windows must share one shape; the
/// checkpoint records n, the montage and the full config.
PretrainResult pretrain(const std::vector<MatF>& windows, const RunConfig& config, const Montage& montage,
                        const Progress& progress = {});

/// Contrastive loss and accuracy over every window with a fixed mask stream and
/// no dropout.
EvalStats evaluate_pretrain(PretrainModel<float>& model, const std::vector<MatF>& windows, std::uint64_t mask_seed);

/// Short model identifier derived from a GNN configuration: baseline, gcn,
/// gcn+ew, gat, gat+ew, sage (with a "+perm" suffix for permuted geometry).
std::string model_name(const GnnConfig& gnn);

struct FinetuneOptions {
  HeadKind head = HeadKind::kBendr;
  AdjusterKind adjuster = AdjusterKind::kLinear;
  // When set, must match the checkpoint's GNN (architecture and edge weights).
  std::optional<GnnConfig> expect_gnn;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<StreamSeeds> seeds;  // defaults to the checkpoint config's seeds
};

struct FoldAudit {
  int fold = 0;
  std::vector<WindowSource> train;  // after undersampling
  std::vector<WindowSource> test;
  std::size_t train_counts[2] = {0, 0};
  std::size_t test_counts[2] = {0, 0};
  std::size_t test_available[2] = {0, 0};
  bool undersampled = false;
};

struct FoldResult {
  int fold = 0;
  double metric = 0.0;
  double final_train_loss = 0.0;
  FoldAudit audit;
};

struct FinetuneRun {
  std::string model;
  HeadKind head = HeadKind::kBendr;
  AdjusterKind adjuster = AdjusterKind::kLinear;
  AdjusterKind adjuster_applied = AdjusterKind::kLinear;
  Metric metric = Metric::kAccuracy;
  std::vector<FoldResult> folds;
  double mean = 0.0;

  nlohmann::json to_json() const;
};

/// The run configuration a checkpoint was trained with.
RunConfig checkpoint_config(const Checkpoint& checkpoint);

/// Train on every fold except `fold` (undersampled when the dataset is not
/// balanced), evaluate dataset.metric on `fold`. Windows are visited in
/// (subject_id, offset) order before any seeded shuffling, so the result does
/// not depend on dataset order.
FoldResult finetune_fold(const Checkpoint& checkpoint, const TaskDataset& dataset, int fold,
                         const FinetuneOptions& options, const Progress& progress = {});

FinetuneRun crossval(const Checkpoint& checkpoint, const TaskDataset& dataset, const FinetuneOptions& options,
                     const Progress& progress = {});

struct GridModel {
  std::string checkpoint_path;
};

struct GridTask {
  std::string name;
  std::string dir;
};

struct GridOptions {
  std::vector<HeadKind> heads{HeadKind::kBendr, HeadKind::kLinear};
  std::vector<AdjusterKind> adjusters{AdjusterKind::kLinear, AdjusterKind::kPadding};
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<StreamSeeds> seeds;
  std::string out_dir;
  int jobs = 1;
  bool resume = true;
};

struct GridCell {
  std::string model;
  std::string head;
  std::string adjuster;
  std::string task;
  std::string metric;
  std::vector<double> per_fold;
  double mean = 0.0;
  std::uint64_t seed = 0;
  std::string checkpoint_hash;
  std::string key;
  bool flagged = false;  // strictly above the same-head baseline cell

  nlohmann::json to_json() const;
  static GridCell from_json(const nlohmann::json& doc);
};

/// Every (model, head, task, adjuster) combination; one JSON file per cell
/// under out_dir/cells, named by a content hash of checkpoint, dataset and
/// cell settings. Existing cell files are reused when resume is set.
std::vector<GridCell> run_grid(const std::vector<GridModel>& models, const std::vector<GridTask>& tasks,
                               const GridOptions& options, const Progress& progress = {});

/// Sets `flagged` on every non-baseline cell that beats the baseline cell with
/// the same head, adjuster and task.
void flag_cells(std::vector<GridCell>& cells);

std::vector<GridCell> load_cells(const std::string& dir);

struct Report {
  std::string markdown;
  std::string csv;
};

/// One table per adjuster: rows are models (baseline first), sub-rows head
/// configurations, columns tasks. Flagged cells are underlined.
Report make_report(std::vector<GridCell> cells);

}  // namespace graph_bendr
