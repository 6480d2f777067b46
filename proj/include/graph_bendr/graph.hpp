#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graph_bendr/common.hpp"
#include "graph_bendr/montage.hpp"

namespace graph_bendr {

/// Electrode pairs closer than this central angle are rejected as coincident.
inline constexpr double kDistanceEpsilon = 1e-9;

/// Symmetric C x C reciprocal-geodesic weights with a zero diagonal.
struct EdgeWeightMatrix {
  MatD weights;
  std::string montage_name;
  std::vector<std::string> labels;

  std::size_t size() const { return static_cast<std::size_t>(weights.rows()); }

  /// Relabels nodes: result(i, j) = weights(perm[i], perm[j]).
  EdgeWeightMatrix permuted(const std::vector<std::size_t>& perm) const;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

/// Central angle arccos(a.b / r^2), argument clamped to [-1, 1].
double geodesic_distance(const std::array<double, 3>& a, const std::array<double, 3>& b, double r);

EdgeWeightMatrix build_edge_weights(const Montage& montage);

}  // namespace graph_bendr
