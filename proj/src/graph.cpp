#include "graph_bendr/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace graph_bendr {

namespace {

void require_on_sphere(const std::array<double, 3>& p, double r) {
  const double norm = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
  if (!std::isfinite(norm) || std::abs(norm - r) > 1e-6 * r) {
    std::ostringstream os;
    os << "geodesic_distance: point (" << p[0] << ", " << p[1] << ", " << p[2]
       << ") is not on the sphere of radius " << r;
    throw ValidationError(os.str());
  }
}

}  // namespace

double geodesic_distance(const std::array<double, 3>& a, const std::array<double, 3>& b, double r) {
  if (!(r > 0.0)) throw ValidationError("geodesic_distance: radius must be positive");
  require_on_sphere(a, r);
  require_on_sphere(b, r);
  const double cosine = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (r * r);
  return std::acos(std::clamp(cosine, -1.0, 1.0));
}

EdgeWeightMatrix build_edge_weights(const Montage& montage) {
  montage.validate();
  const auto c = static_cast<Eigen::Index>(montage.size());
  EdgeWeightMatrix w;
  w.montage_name = montage.name;
  w.labels = montage.labels();
  w.weights = MatD::Zero(c, c);
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = i + 1; j < c; ++j) {
      const auto& ei = montage.electrodes[static_cast<std::size_t>(i)];
      const auto& ej = montage.electrodes[static_cast<std::size_t>(j)];
      const double d = geodesic_distance(ei.position(), ej.position(), montage.radius);
      if (d <= kDistanceEpsilon)
        throw ValidationError("build_edge_weights: electrodes '" + ei.label + "' and '" + ej.label +
                              "' coincide");
      w.weights(i, j) = 1.0 / d;
      w.weights(j, i) = w.weights(i, j);
    }
  }
  return w;
}

EdgeWeightMatrix EdgeWeightMatrix::permuted(const std::vector<std::size_t>& perm) const {
  if (perm.size() != size()) throw ValidationError("permuted: permutation size mismatch");
  EdgeWeightMatrix out;
  out.montage_name = montage_name + "-permuted";
  out.labels = labels;
  const auto c = weights.rows();
  out.weights.resize(c, c);
  for (Eigen::Index i = 0; i < c; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      out.weights(i, j) = weights(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]),
                                  static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)]));
  return out;
}

std::string EdgeWeightMatrix::to_csv() const {
  std::string out;
  char buf[32];
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    for (Eigen::Index j = 0; j < weights.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", weights(i, j));
      if (j > 0) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

nlohmann::json EdgeWeightMatrix::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < weights.cols(); ++j) row.push_back(weights(i, j));
    rows.push_back(std::move(row));
  }
  return {{"labels", labels}, {"weights", rows}};
}

}  // namespace graph_bendr
