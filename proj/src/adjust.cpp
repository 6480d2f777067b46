#include "graph_bendr/adjust.hpp"

#include <cmath>

namespace graph_bendr {

std::string to_string(AdjusterKind kind) {
  switch (kind) {
    case AdjusterKind::kLinear:
      return "linear";
    case AdjusterKind::kPadding:
      return "padding";
    case AdjusterKind::kIdentity:
      break;
  }
  return "identity";
}

AdjusterKind adjuster_kind_from_string(const std::string& name) {
  if (name == "linear") return AdjusterKind::kLinear;
  if (name == "padding") return AdjusterKind::kPadding;
  if (name == "identity") return AdjusterKind::kIdentity;
  throw ConfigError("unknown adjuster '" + name + "' (expected linear|padding)");
}

AdjusterConfig select_adjuster(int m, int n, AdjusterKind requested) {
  if (n <= 0 || m <= 0) throw ValidationError("select_adjuster: lengths must be positive");
  if (m == n) return AdjusterConfig{AdjusterKind::kIdentity, m, n};
  if (requested == AdjusterKind::kPadding && m > n)
    throw ValidationError("select_adjuster: padding cannot shorten m = " + std::to_string(m) + " to n = " +
                          std::to_string(n));
  if (requested == AdjusterKind::kIdentity)
    throw ValidationError("select_adjuster: identity requires m == n");
  return AdjusterConfig{requested, m, n};
}

MatD interpolation_stencil(Eigen::Index m, Eigen::Index n) {
  if (m < 1 || n < 1) throw ValidationError("interpolation_stencil: lengths must be positive");
  MatD s = MatD::Zero(m, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double pos = n == 1 ? 0.0 : static_cast<double>(t) * static_cast<double>(m - 1) / static_cast<double>(n - 1);
    const auto lo = static_cast<Eigen::Index>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 < m && frac > 0.0) {
      s(lo, t) = 1.0 - frac;
      s(lo + 1, t) = frac;
    } else {
      s(std::min(lo, m - 1), t) = 1.0;
    }
  }
  return s;
}

}  // namespace graph_bendr
