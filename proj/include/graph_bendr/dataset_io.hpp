#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graph_bendr/signal.hpp"

namespace graph_bendr {

/// Directory layout: manifest.json plus one recording file per entry.
void save_pretrain_corpus(const std::string& dir, const std::vector<Recording>& recordings);
std::vector<Recording> load_pretrain_corpus(const std::string& dir);

/// manifest.json {kind, name, metric, folds, balanced, num_classes,
/// channel_labels, windows: [{path, label, fold, subject_id, offset}]} and one
/// recording file per window under windows/.
void save_task(const std::string& dir, const TaskDataset& dataset, const std::string& name,
               const nlohmann::json& generator = nullptr);
TaskDataset load_task(const std::string& dir, std::string* name = nullptr);

/// SHA-256 over the labels, folds, metric and every sample of the dataset.
std::string task_content_hash(const TaskDataset& dataset);

}  // namespace graph_bendr
