#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "graph_bendr/param.hpp"

namespace graph_bendr {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected adaptive-moment optimizer state, one accumulator pair per
/// parameter in list order.
template <typename T>
struct AdamState {
  AdamConfig config;
  std::vector<Mat<T>> m;
  std::vector<Mat<T>> v;
  std::int64_t step = 0;

  AdamState() = default;
  AdamState(const AdamConfig& cfg, const ParamList<T>& params) : config(cfg) {
    for (const auto* p : params) {
      m.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
      v.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }
};

/// One Adam update; gradients are zeroed afterwards. Throws ValidationError
/// naming the first parameter whose gradient is not finite (no parameter is
/// touched in that case).
template <typename T>
void adam_step(AdamState<T>& state, const ParamList<T>& params) {
  if (state.m.size() != params.size()) throw ValidationError("adam_step: state does not match parameters");
  for (const auto* p : params)
    if (!p->grad.allFinite()) throw ValidationError("adam_step: non-finite gradient in " + p->name);

  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  // Moments are formed in double; the second moment is stored saturated so a
  // huge finite gradient cannot push it to infinity.
  const double v_max = static_cast<double>(std::numeric_limits<T>::max());
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.rows() != p.value.rows() || m.cols() != p.value.cols())
      throw ValidationError("adam_step: accumulator shape mismatch for " + p.name);
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      const double g = static_cast<double>(p.grad.data()[k]);
      const double mk = c.beta1 * static_cast<double>(m.data()[k]) + (1.0 - c.beta1) * g;
      const double vk = std::min(c.beta2 * static_cast<double>(v.data()[k]) + (1.0 - c.beta2) * g * g, v_max);
      m.data()[k] = static_cast<T>(mk);
      v.data()[k] = static_cast<T>(vk);
      const double update = c.lr * (mk / correction1) / (std::sqrt(vk / correction2) + c.eps);
      p.value.data()[k] = static_cast<T>(static_cast<double>(p.value.data()[k]) - update);
    }
    p.zero_grad();
  }
}

}  // namespace graph_bendr
