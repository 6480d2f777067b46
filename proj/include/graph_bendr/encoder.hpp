#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "graph_bendr/param.hpp"

namespace graph_bendr {

struct EncoderConfig {
  int feature_dim = 64;
  std::vector<int> kernels = {3, 3, 3, 3, 3, 3};
  std::vector<int> strides = {3, 2, 2, 2, 2, 2};
  int groups = 8;

  int downsample_factor() const;
  /// Output length for an input of length n: floor(n / downsample_factor).
  int output_length(int n) const;
  void validate() const;
};

template <typename T>
T gelu(T x) {
  return static_cast<T>(0.5) * x * (T(1) + std::erf(x * static_cast<T>(M_SQRT1_2)));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = static_cast<T>(0.5) * (T(1) + std::erf(x * static_cast<T>(M_SQRT1_2)));
  const T pdf = std::exp(static_cast<T>(-0.5) * x * x) * static_cast<T>(0.5 * M_2_SQRTPI * M_SQRT1_2);
  return cdf + x * pdf;
}

/// 1-D convolution over time on time-major input (L x in_channels). Output
/// length is floor(L / stride); tap k of output t reads input row
/// t * stride + k - pad, where pad = max(0, (kernel - stride) / 2), and rows
/// outside [0, L) read as zero.
template <typename T>
class Conv1d {
 public:
  struct Cache {
    Mat<T> cols;  // T_out x (kernel * in)
    Eigen::Index in_length = 0;
  };

  Conv1d() = default;
  Conv1d(const std::string& name, Eigen::Index in, Eigen::Index out, int kernel, int stride, Rng& rng)
      : in_(in), kernel_(kernel), stride_(stride), pad_(std::max(0, (kernel - stride) / 2)),
        linear_(name, in * kernel, out, rng) {}

  Eigen::Index output_length(Eigen::Index in_length) const { return in_length / stride_; }

  Mat<T> forward(const Mat<T>& x, Cache& cache) const {
    if (x.cols() != in_) throw ValidationError(linear_.weight().name + ": channel mismatch");
    const Eigen::Index out_len = output_length(x.rows());
    cache.in_length = x.rows();
    cache.cols = Mat<T>::Zero(out_len, in_ * kernel_);
    for (Eigen::Index t = 0; t < out_len; ++t) {
      for (int k = 0; k < kernel_; ++k) {
        const Eigen::Index src = t * stride_ + k - pad_;
        if (src < 0 || src >= x.rows()) continue;
        cache.cols.row(t).segment(k * in_, in_) = x.row(src);
      }
    }
    return linear_.apply(cache.cols);
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy) {
    typename Linear<T>::Cache lc{cache.cols};
    const Mat<T> dcols = linear_.backward(lc, dy);
    Mat<T> dx = Mat<T>::Zero(cache.in_length, in_);
    for (Eigen::Index t = 0; t < dcols.rows(); ++t) {
      for (int k = 0; k < kernel_; ++k) {
        const Eigen::Index src = t * stride_ + k - pad_;
        if (src < 0 || src >= cache.in_length) continue;
        dx.row(src) += dcols.row(t).segment(k * in_, in_);
      }
    }
    return dx;
  }

  void parameters(ParamList<T>& out) { linear_.parameters(out); }
  Linear<T>& linear() { return linear_; }

 private:
  Eigen::Index in_ = 0;
  int kernel_ = 1;
  int stride_ = 1;
  int pad_ = 0;
  Linear<T> linear_;
};

/// Group normalization over (time x channels-in-group) with per-channel affine.
template <typename T>
class GroupNorm {
 public:
  static constexpr double kEps = 1e-5;

  struct Cache {
    Mat<T> xhat;
    std::vector<T> inv_std;
  };

  GroupNorm() = default;
  GroupNorm(const std::string& name, Eigen::Index channels, int groups)
      : groups_(groups),
        gamma_(name + ".gamma", Mat<T>::Ones(1, channels)),
        beta_(name + ".beta", Mat<T>::Zero(1, channels)) {
    if (groups < 1 || channels % groups != 0)
      throw ValidationError(name + ": channels must be divisible by groups");
  }

  Mat<T> forward(const Mat<T>& x, Cache& cache) const {
    const Eigen::Index width = x.cols() / groups_;
    cache.xhat.resize(x.rows(), x.cols());
    cache.inv_std.assign(static_cast<std::size_t>(groups_), T(0));
    for (int g = 0; g < groups_; ++g) {
      const auto block = x.middleCols(g * width, width);
      const T mean = block.mean();
      const T var = (block.array() - mean).square().mean();
      const T inv = T(1) / std::sqrt(var + static_cast<T>(kEps));
      cache.inv_std[static_cast<std::size_t>(g)] = inv;
      cache.xhat.middleCols(g * width, width) = (block.array() - mean) * inv;
    }
    Mat<T> y = cache.xhat.array().rowwise() * gamma_.value.row(0).array();
    y.rowwise() += beta_.value.row(0);
    return y;
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy) {
    gamma_.grad += dy.cwiseProduct(cache.xhat).colwise().sum();
    beta_.grad += dy.colwise().sum();
    const Mat<T> dxhat = dy.array().rowwise() * gamma_.value.row(0).array();
    const Eigen::Index width = dy.cols() / groups_;
    const T count = static_cast<T>(dy.rows() * width);
    Mat<T> dx(dy.rows(), dy.cols());
    for (int g = 0; g < groups_; ++g) {
      const auto dh = dxhat.middleCols(g * width, width);
      const auto xh = cache.xhat.middleCols(g * width, width);
      const T sum_dh = dh.sum();
      const T sum_dh_xh = dh.cwiseProduct(xh).sum();
      dx.middleCols(g * width, width) =
          (cache.inv_std[static_cast<std::size_t>(g)] / count) *
          (count * dh.array() - sum_dh - xh.array() * sum_dh_xh);
    }
    return dx;
  }

  void parameters(ParamList<T>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

 private:
  int groups_ = 1;
  Parameter<T> gamma_;
  Parameter<T> beta_;
};

/// conv -> group norm -> GELU
template <typename T>
class EncoderBlock {
 public:
  struct Cache {
    typename Conv1d<T>::Cache conv;
    typename GroupNorm<T>::Cache norm;
    Mat<T> normed;
  };

  EncoderBlock(const std::string& name, Eigen::Index in, Eigen::Index out, int kernel, int stride, int groups,
               Rng& rng)
      : conv_(name + ".conv", in, out, kernel, stride, rng), norm_(name + ".norm", out, groups) {}

  Mat<T> forward(const Mat<T>& x, Cache& cache) const {
    const Mat<T> c = conv_.forward(x, cache.conv);
    cache.normed = norm_.forward(c, cache.norm);
    return cache.normed.unaryExpr([](T v) { return gelu(v); });
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy) {
    const Mat<T> dn = dy.cwiseProduct(cache.normed.unaryExpr([](T v) { return gelu_grad(v); }));
    return conv_.backward(cache.conv, norm_.backward(cache.norm, dn));
  }

  void parameters(ParamList<T>& out) {
    conv_.parameters(out);
    norm_.parameters(out);
  }

  Conv1d<T>& conv() { return conv_; }

 private:
  Conv1d<T> conv_;
  GroupNorm<T> norm_;
};

/// Six-block convolutional encoder. Input is channel-major C x n; output is
/// time-major T' x d.
template <typename T>
class Encoder {
 public:
  struct Cache {
    std::vector<typename EncoderBlock<T>::Cache> blocks;
  };

  Encoder(const EncoderConfig& config, Eigen::Index channels, Rng& rng, const std::string& name = "encoder")
      : config_(config) {
    config.validate();
    for (std::size_t b = 0; b < config.kernels.size(); ++b) {
      const Eigen::Index in = b == 0 ? channels : config.feature_dim;
      blocks_.emplace_back(name + ".block" + std::to_string(b), in, config.feature_dim, config.kernels[b],
                           config.strides[b], config.groups, rng);
    }
  }

  Mat<T> forward(const Mat<T>& x, Cache& cache) const {
    const int factor = config_.downsample_factor();
    if (x.cols() < factor)
      throw ValidationError("encode: input length " + std::to_string(x.cols()) + " is below the minimum of " +
                            std::to_string(factor) + " samples");
    cache.blocks.resize(blocks_.size());
    Mat<T> h = x.transpose();
    for (std::size_t b = 0; b < blocks_.size(); ++b) h = blocks_[b].forward(h, cache.blocks[b]);
    return h;
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy) {
    Mat<T> g = dy;
    for (std::size_t b = blocks_.size(); b-- > 0;) g = blocks_[b].backward(cache.blocks[b], g);
    return g.transpose();
  }

  void parameters(ParamList<T>& out) {
    for (auto& b : blocks_) b.parameters(out);
  }

  const EncoderConfig& config() const { return config_; }
  std::vector<EncoderBlock<T>>& blocks() { return blocks_; }

 private:
  EncoderConfig config_;
  std::vector<EncoderBlock<T>> blocks_;
};

}  // namespace graph_bendr
