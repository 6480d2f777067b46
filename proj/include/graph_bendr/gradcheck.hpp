#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "graph_bendr/param.hpp"

namespace graph_bendr {

struct GradCheckReport {
  std::string layer;
  double max_rel_err = 0.0;
  // Worst relative error per parameter; the entry named "input" covers the
  // input gradient.
  std::vector<std::pair<std::string, double>> per_parameter;
  std::size_t entries = 0;
  bool pass = false;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Anything with
///   Mat<double> forward(const Mat<double>&, Cache&) const;
///   Mat<double> backward(const Cache&, const Mat<double>& dy);
///   void parameters(ParamList<double>&);
template <typename L>
concept Checkable = requires(L& layer, const L& clayer, const MatD& x, typename L::Cache& cache,
                             ParamList<double>& params) {
  { clayer.forward(x, cache) } -> std::convertible_to<MatD>;
  { layer.backward(cache, x) } -> std::convertible_to<MatD>;
  layer.parameters(params);
};

/// Central finite differences on loss = sum(output) for every parameter entry
/// and every input entry. Passes iff the largest relative error
/// |a - n| / max(|a|, |n|, 1e-8) is <= tol.
template <Checkable L>
GradCheckReport grad_check(L& layer, const MatD& input, double eps, double tol, const std::string& name) {
  if (!(eps > 0.0)) throw ValidationError("grad_check: eps must be positive");
  ParamList<double> params;
  layer.parameters(params);
  zero_grads(params);

  auto loss_at = [&](const MatD& x) {
    typename L::Cache scratch;
    const MatD y = layer.forward(x, scratch);
    if (!y.allFinite()) throw ValidationError("grad_check: non-finite forward output in layer " + name);
    return y.sum();
  };

  typename L::Cache cache;
  const MatD y = layer.forward(input, cache);
  if (!y.allFinite()) throw ValidationError("grad_check: non-finite forward output in layer " + name);
  const MatD dx = layer.backward(cache, MatD::Ones(y.rows(), y.cols()));

  GradCheckReport report;
  report.layer = name;
  for (auto* p : params) {
    double worst = 0.0;
    const MatD analytic = p->grad;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& v = p->value.data()[i];
      const double saved = v;
      v = saved + eps;
      const double plus = loss_at(input);
      v = saved - eps;
      const double minus = loss_at(input);
      v = saved;
      worst = std::max(worst, relative_error(analytic.data()[i], (plus - minus) / (2.0 * eps)));
      ++report.entries;
    }
    report.per_parameter.emplace_back(p->name, worst);
    report.max_rel_err = std::max(report.max_rel_err, worst);
  }

  MatD x = input;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + eps;
    const double plus = loss_at(x);
    x.data()[i] = saved - eps;
    const double minus = loss_at(x);
    x.data()[i] = saved;
    worst = std::max(worst, relative_error(dx.data()[i], (plus - minus) / (2.0 * eps)));
    ++report.entries;
  }
  report.per_parameter.emplace_back("input", worst);
  report.max_rel_err = std::max(report.max_rel_err, worst);
  report.pass = report.max_rel_err <= tol;
  zero_grads(params);
  return report;
}

}  // namespace graph_bendr
