#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace graph_bendr {

// Row-major so that one row is one channel (or one time step for
// time-major feature matrices).
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using MatD = Mat<double>;
using MatF = Mat<float>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A file on disk does not follow its declared binary or JSON layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Configuration document or command-line usage problem.
class ConfigError : public Error {
 public:
  using Error::Error;
};

template <typename T, typename U>
Mat<T> cast(const Mat<U>& m) {
  return m.template cast<T>();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace graph_bendr
