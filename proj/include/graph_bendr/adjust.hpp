#pragma once

#include <string>

#include "graph_bendr/param.hpp"

namespace graph_bendr {

enum class AdjusterKind { kIdentity, kLinear, kPadding };

std::string to_string(AdjusterKind kind);
AdjusterKind adjuster_kind_from_string(const std::string& name);

struct AdjusterConfig {
  AdjusterKind kind = AdjusterKind::kIdentity;
  int m = 0;  // source length
  int n = 0;  // target length
};

/// Identity whenever m == n, otherwise the requested kind. Padding cannot
/// shorten, so padding with m > n is rejected here.
AdjusterConfig select_adjuster(int m, int n, AdjusterKind requested);

/// Repeats each row's last value until the row has n columns.
template <typename T>
Mat<T> adjust_padding(const Mat<T>& x, Eigen::Index n) {
  const Eigen::Index m = x.cols();
  if (m < 1) throw ValidationError("adjust_padding: empty input");
  if (m > n) throw ValidationError("adjust_padding: m = " + std::to_string(m) + " exceeds n = " + std::to_string(n));
  Mat<T> y(x.rows(), n);
  y.leftCols(m) = x;
  for (Eigen::Index r = 0; r < x.rows(); ++r) y.row(r).rightCols(n - m).setConstant(x(r, m - 1));
  return y;
}

/// m x n linear-interpolation stencil (align corners); every column sums to 1
/// so constant rows map to the same constant.
MatD interpolation_stencil(Eigen::Index m, Eigen::Index n);

/// Channel-shared learned length map: Y = X M with M of shape m x n.
template <typename T>
class LinearAdjuster {
 public:
  struct Cache {
    Mat<T> x;
  };

  LinearAdjuster(Eigen::Index m, Eigen::Index n, const std::string& name = "adjuster")
      : map_(name + ".map", interpolation_stencil(m, n).template cast<T>()) {}

  Mat<T> forward(const Mat<T>& x, Cache& cache) const {
    if (x.cols() != map_.value.rows())
      throw ValidationError("adjust_linear: expected " + std::to_string(map_.value.rows()) + " columns, got " +
                            std::to_string(x.cols()));
    cache.x = x;
    return x * map_.value;
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy) {
    map_.grad.noalias() += cache.x.transpose() * dy;
    return dy * map_.value.transpose();
  }

  void parameters(ParamList<T>& out) { out.push_back(&map_); }

  Parameter<T>& map() { return map_; }

 private:
  Parameter<T> map_;
};

}  // namespace graph_bendr
