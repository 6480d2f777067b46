#include "graph_bendr/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "graph_bendr/common.hpp"

namespace graph_bendr {

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) throw ValidationError("accuracy: length mismatch");
  if (labels.empty()) throw ValidationError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ValidationError("auroc: length mismatch");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("auroc: labels must be 0 or 1");
    pos += labels[i] == 1 ? 1 : 0;
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw ValidationError("auroc: needs at least one positive and one negative label");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Ranks doubled so that midranks stay integral: a tie block over 1-based
  // ranks [i+1, j] has midrank (i + 1 + j) / 2.
  std::uint64_t doubled_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    std::size_t block_pos = 0;
    for (std::size_t k = i; k < j; ++k) block_pos += labels[order[k]] == 1 ? 1 : 0;
    doubled_rank_sum += block_pos * (i + 1 + j);
    i = j;
  }
  // U = R_pos - P(P+1)/2, counted in halves.
  const std::uint64_t doubled_u = doubled_rank_sum - static_cast<std::uint64_t>(pos) * (pos + 1);
  return static_cast<double>(doubled_u) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

std::vector<std::size_t> undersample(const std::vector<int>& labels, Rng& rng, int num_classes) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) throw ValidationError("undersample: label out of range");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::size_t minority = labels.size();
  for (int c = 0; c < num_classes; ++c) {
    if (by_class[static_cast<std::size_t>(c)].empty())
      throw ValidationError("undersample: class " + std::to_string(c) + " has no samples");
    minority = std::min(minority, by_class[static_cast<std::size_t>(c)].size());
  }
  std::vector<std::size_t> keep;
  for (const auto& idx : by_class) {
    if (idx.size() == minority) {
      keep.insert(keep.end(), idx.begin(), idx.end());
    } else {
      const auto drawn = sample_without_replacement(rng, idx, minority);
      keep.insert(keep.end(), drawn.begin(), drawn.end());
    }
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

}  // namespace graph_bendr
