#include "graph_bendr/contrastive.hpp"

#include <algorithm>

namespace graph_bendr {

std::size_t MaskSpec::masked_count() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)); }

std::vector<std::size_t> MaskSpec::masked_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < mask.size(); ++t)
    if (mask[t]) out.push_back(t);
  return out;
}

MaskSpec mask_from_starts(std::size_t length, int span, const std::vector<std::size_t>& starts) {
  if (span < 1) throw ValidationError("mask: span must be >= 1");
  MaskSpec spec;
  spec.span = span;
  spec.mask.assign(length, false);
  for (std::size_t s : starts)
    for (std::size_t t = s; t < std::min(length, s + static_cast<std::size_t>(span)); ++t) spec.mask[t] = true;
  return spec;
}

MaskSpec sample_mask(std::size_t length, double p_start, int span, Rng& rng, int max_retries) {
  if (span < 1 || static_cast<std::size_t>(span) >= length)
    throw ValidationError("sample_mask: need length > span >= 1 (length " + std::to_string(length) + ", span " +
                          std::to_string(span) + ")");
  if (!(p_start > 0.0 && p_start < 1.0)) throw ValidationError("sample_mask: p_start must be in (0, 1)");
  std::bernoulli_distribution start(p_start);
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    std::vector<std::size_t> starts;
    for (std::size_t t = 0; t < length; ++t)
      if (start(rng)) starts.push_back(t);
    MaskSpec spec = mask_from_starts(length, span, starts);
    const std::size_t count = spec.masked_count();
    if (count > 0 && count < length) {
      spec.p_start = p_start;
      return spec;
    }
  }
  MaskSpec forced = mask_from_starts(length, span, {uniform_index(rng, length)});
  forced.p_start = p_start;
  return forced;
}

}  // namespace graph_bendr
