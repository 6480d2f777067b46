#pragma once

#include <cmath>
#include <vector>

#include "graph_bendr/param.hpp"

namespace graph_bendr {

struct MaskingConfig {
  double p_start = 0.05;
  int span = 10;
};

struct ContrastiveConfig {
  int negatives = 10;
  double temperature = 0.1;
};

struct MaskSpec {
  double p_start = 0.0;
  int span = 0;
  std::vector<bool> mask;

  std::size_t masked_count() const;
  std::vector<std::size_t> masked_positions() const;
};

/// Marks [s, s + span) for every start s, clipped at the sequence end.
MaskSpec mask_from_starts(std::size_t length, int span, const std::vector<std::size_t>& starts);

/// Each position starts a span with probability p_start. Masks covering no
/// position or every position are redrawn up to `max_retries` times; after
/// that a single span is forced at a uniformly random start.
MaskSpec sample_mask(std::size_t length, double p_start, int span, Rng& rng, int max_retries = 16);

template <typename T>
struct ContrastiveResult {
  double loss = 0.0;
  double accuracy = 0.0;  // fraction of masked positions whose positive logit is the strict maximum
  double chance = 1.0;    // mean of 1 / (K + 1) over masked positions
  std::size_t masked = 0;
  Mat<T> d_reconstructed;
  Mat<T> d_targets;
};

/// InfoNCE over cosine similarities: for each masked t, the positive is
/// cos(r_t, y_t) / tau and the K negatives are cos(r_t, y_j) / tau for masked
/// j != t drawn uniformly without replacement. Loss is the mean over masked t
/// of -log softmax(positive). Gradients are of that mean.
template <typename T>
ContrastiveResult<T> contrastive_loss(const Mat<T>& reconstructed, const Mat<T>& targets, const MaskSpec& mask,
                                      int negatives, double temperature, Rng& rng) {
  if (reconstructed.rows() != targets.rows() || reconstructed.cols() != targets.cols())
    throw ValidationError("contrastive_loss: shape mismatch");
  if (static_cast<Eigen::Index>(mask.mask.size()) != targets.rows())
    throw ValidationError("contrastive_loss: mask length mismatch");
  if (!(temperature > 0.0)) throw ValidationError("contrastive_loss: temperature must be positive");
  const auto positions = mask.masked_positions();
  if (positions.empty()) throw ValidationError("contrastive_loss: no masked positions");
  if (negatives < 0 || static_cast<std::size_t>(negatives) >= positions.size())
    throw ValidationError("contrastive_loss: K = " + std::to_string(negatives) +
                          " negatives needs more than K masked positions (have " + std::to_string(positions.size()) +
                          ")");

  constexpr double kNormFloor = 1e-8;
  const Eigen::Index rows = targets.rows();
  std::vector<double> r_norm(static_cast<std::size_t>(rows)), y_norm(static_cast<std::size_t>(rows));
  for (Eigen::Index t = 0; t < rows; ++t) {
    r_norm[static_cast<std::size_t>(t)] = std::max<double>(reconstructed.row(t).norm(), kNormFloor);
    y_norm[static_cast<std::size_t>(t)] = std::max<double>(targets.row(t).norm(), kNormFloor);
  }
  auto cosine = [&](std::size_t r, std::size_t y) {
    return static_cast<double>(reconstructed.row(static_cast<Eigen::Index>(r)).dot(targets.row(static_cast<Eigen::Index>(y)))) /
           (r_norm[r] * y_norm[y]);
  };

  ContrastiveResult<T> out;
  out.masked = positions.size();
  out.d_reconstructed = Mat<T>::Zero(rows, targets.cols());
  out.d_targets = Mat<T>::Zero(rows, targets.cols());
  const double inv_count = 1.0 / static_cast<double>(positions.size());
  std::size_t correct = 0;
  for (std::size_t t : positions) {
    std::vector<std::size_t> others;
    others.reserve(positions.size() - 1);
    for (std::size_t j : positions)
      if (j != t) others.push_back(j);
    std::vector<std::size_t> candidates{t};
    const auto drawn = sample_without_replacement(rng, others, static_cast<std::size_t>(negatives));
    candidates.insert(candidates.end(), drawn.begin(), drawn.end());

    std::vector<double> cos(candidates.size()), logits(candidates.size());
    double mx = -INFINITY;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      cos[k] = cosine(t, candidates[k]);
      logits[k] = cos[k] / temperature;
      mx = std::max(mx, logits[k]);
    }
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - mx);
    const double lse = mx + std::log(sum);
    out.loss += (lse - logits[0]) * inv_count;
    bool best = true;
    for (std::size_t k = 1; k < logits.size(); ++k) best = best && logits[0] > logits[k];
    if (best) ++correct;

    const auto rt = reconstructed.row(static_cast<Eigen::Index>(t));
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      const double p = std::exp(logits[k] - lse);
      const double dlogit = (p - (k == 0 ? 1.0 : 0.0)) * inv_count;
      const double dcos = dlogit / temperature;
      if (dcos == 0.0) continue;
      const std::size_t j = candidates[k];
      const auto yj = targets.row(static_cast<Eigen::Index>(j));
      const double rn = r_norm[t];
      const double yn = y_norm[j];
      out.d_reconstructed.row(static_cast<Eigen::Index>(t)) +=
          static_cast<T>(dcos) * (yj / static_cast<T>(rn * yn) - static_cast<T>(cos[k] / (rn * rn)) * rt);
      out.d_targets.row(static_cast<Eigen::Index>(j)) +=
          static_cast<T>(dcos) * (rt / static_cast<T>(rn * yn) - static_cast<T>(cos[k] / (yn * yn)) * yj);
    }
  }
  out.accuracy = static_cast<double>(correct) * inv_count;
  out.chance = 1.0 / static_cast<double>(negatives + 1);
  return out;
}

}  // namespace graph_bendr
