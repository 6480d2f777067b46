#pragma once

#include <cstddef>
#include <vector>

#include "graph_bendr/rng.hpp"

namespace graph_bendr {

/// Fraction of positions where prediction equals label.
double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

/// Mann-Whitney AUROC with midranks: P(score_pos > score_neg) + 0.5 P(tie).
/// Labels are 0/1; both classes must be present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Indices (ascending) that keep every class at the minority class count.
/// The minority class is kept whole; larger classes are sampled uniformly
/// without replacement.
std::vector<std::size_t> undersample(const std::vector<int>& labels, Rng& rng, int num_classes = 2);

}  // namespace graph_bendr
