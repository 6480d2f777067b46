#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "graph_bendr/common.hpp"
#include "graph_bendr/rng.hpp"

namespace graph_bendr {

/// Trainable tensor. Shapes are 2-D; vectors are stored as 1 x k rows.
template <typename T>
struct Parameter {
  std::string name;
  Mat<T> value;
  Mat<T> grad;

  Parameter() = default;
  Parameter(std::string n, Mat<T> v) : name(std::move(n)), value(std::move(v)) {
    grad = Mat<T>::Zero(value.rows(), value.cols());
  }

  void zero_grad() { grad.setZero(); }
};

template <typename T>
using ParamList = std::vector<Parameter<T>*>;

/// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)), drawn row-major.
template <typename T>
Mat<T> init_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  Mat<T> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = static_cast<T>(uniform(rng, -bound, bound));
  return m;
}

template <typename T>
void zero_grads(const ParamList<T>& params) {
  for (auto* p : params) p->zero_grad();
}

template <typename T>
std::size_t count_values(const ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += static_cast<std::size_t>(p->value.size());
  return n;
}

/// Copies values between two parameter lists with identical names and shapes
/// (typically different precisions).
template <typename T, typename U>
void copy_values(const ParamList<U>& from, const ParamList<T>& to) {
  if (from.size() != to.size()) throw ValidationError("copy_values: parameter count mismatch");
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i]->name != to[i]->name || from[i]->value.rows() != to[i]->value.rows() ||
        from[i]->value.cols() != to[i]->value.cols())
      throw ValidationError("copy_values: mismatch at " + from[i]->name);
    to[i]->value = from[i]->value.template cast<T>();
  }
}

/// Affine map y = x W + b applied to each row of x. Without a bias, b stays
/// zero and is not a parameter.
template <typename T>
class Linear {
 public:
  struct Cache {
    Mat<T> x;
  };

  Linear() = default;
  Linear(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng, bool bias = true)
      : weight_(name + ".weight", init_uniform<T>(in, out, in, rng)),
        bias_(name + ".bias", Mat<T>::Zero(1, out)),
        has_bias_(bias) {}

  Mat<T> forward(const Mat<T>& x, Cache& cache) const {
    cache.x = x;
    return apply(x);
  }

  Mat<T> apply(const Mat<T>& x) const {
    if (x.cols() != weight_.value.rows())
      throw ValidationError(weight_.name + ": expected " + std::to_string(weight_.value.rows()) +
                            " input columns, got " + std::to_string(x.cols()));
    Mat<T> y = x * weight_.value;
    if (has_bias_) y.rowwise() += bias_.value.row(0);
    return y;
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy) {
    weight_.grad.noalias() += cache.x.transpose() * dy;
    if (has_bias_) bias_.grad += dy.colwise().sum();
    return dy * weight_.value.transpose();
  }

  void parameters(ParamList<T>& out) {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_);
  }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }
  const Parameter<T>& weight() const { return weight_; }
  const Parameter<T>& bias() const { return bias_; }
  Eigen::Index in_features() const { return weight_.value.rows(); }
  Eigen::Index out_features() const { return weight_.value.cols(); }

 private:
  Parameter<T> weight_;
  Parameter<T> bias_;
  bool has_bias_ = true;
};

}  // namespace graph_bendr
