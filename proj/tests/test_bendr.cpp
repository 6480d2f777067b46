#include <gtest/gtest.h>

#include <cmath>

#include "graph_bendr/contrastive.hpp"
#include "graph_bendr/encoder.hpp"
#include "graph_bendr/gradcheck.hpp"
#include "graph_bendr/model.hpp"
#include "graph_bendr/transformer.hpp"
#include "support.hpp"

namespace gb = graph_bendr;
using gb::MatD;
using gb::testing::random_matrix;

namespace {

gb::TransformerConfig small_transformer(int layers, int heads, int dim, int ffn) {
  gb::TransformerConfig t;
  t.layers = layers;
  t.heads = heads;
  t.model_dim = dim;
  t.ffn_dim = ffn;
  t.dropout = 0.0;
  return t;
}

std::vector<double> layer_norm(std::vector<double> v) {
  double mean = 0.0, var = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  for (double& x : v) x = (x - mean) / std::sqrt(var + 1e-5);
  return v;
}

double gelu_ref(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

}  // namespace

TEST(Encoder, DownsampleArithmetic) {
  gb::EncoderConfig cfg;
  EXPECT_EQ(cfg.downsample_factor(), 96);
  EXPECT_EQ(cfg.output_length(15360), 160);
  gb::EncoderConfig toy = cfg;
  toy.strides = {3, 2, 2, 2, 1, 1};
  EXPECT_EQ(toy.downsample_factor(), 24);
  EXPECT_EQ(toy.output_length(768), 32);
}

TEST(Encoder, FullLengthShape) {
  gb::EncoderConfig cfg;
  cfg.feature_dim = 8;
  cfg.groups = 2;
  gb::Rng rng = gb::make_stream(1, gb::Stream::kInit);
  gb::Encoder<float> enc(cfg, 19, rng);
  gb::Encoder<float>::Cache cache;
  const gb::MatF z = enc.forward(random_matrix(19, 15360, rng).cast<float>(), cache);
  EXPECT_EQ(z.rows(), 160);
  EXPECT_EQ(z.cols(), 8);
  EXPECT_TRUE(z.allFinite());
}

TEST(Encoder, ZeroInputGivesZeroOutput) {
  gb::EncoderConfig cfg;
  cfg.feature_dim = 8;
  cfg.groups = 4;
  gb::Rng rng = gb::make_stream(2, gb::Stream::kInit);
  gb::Encoder<double> enc(cfg, 4, rng);
  gb::Encoder<double>::Cache cache;
  EXPECT_TRUE(enc.forward(MatD::Zero(4, 192), cache).isZero(0.0));
}

TEST(Encoder, TooShortInputNamesMinimum) {
  gb::EncoderConfig cfg;
  cfg.feature_dim = 8;
  cfg.groups = 2;
  gb::Rng rng = gb::make_stream(3, gb::Stream::kInit);
  gb::Encoder<double> enc(cfg, 2, rng);
  gb::Encoder<double>::Cache cache;
  try {
    enc.forward(MatD::Ones(2, 95), cache);
    FAIL() << "expected an error";
  } catch (const gb::ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("96"), std::string::npos);
  }
}

TEST(Conv1d, ThreeTapKernelMatchesHandComputation) {
  gb::Rng rng = gb::make_stream(4, gb::Stream::kInit);
  gb::Conv1d<double> conv("c", 1, 1, 3, 1, rng);
  conv.linear().weight().value << 0.5, -1.0, 2.0;
  conv.linear().bias().value << 0.25;
  MatD x(6, 1);
  x << 1, 2, 3, 4, 5, 6;
  gb::Conv1d<double>::Cache cache;
  const MatD y = conv.forward(x, cache);
  ASSERT_EQ(y.rows(), 6);
  // pad = 1: y_t = 0.5 x_{t-1} - x_t + 2 x_{t+1} + 0.25 with zero borders
  const double xs[8] = {0, 1, 2, 3, 4, 5, 6, 0};
  for (int t = 0; t < 6; ++t) EXPECT_NEAR(y(t, 0), 0.5 * xs[t] - xs[t + 1] + 2.0 * xs[t + 2] + 0.25, 1e-6);
}

TEST(Conv1d, StridedOutputLength) {
  gb::Rng rng = gb::make_stream(5, gb::Stream::kInit);
  gb::Conv1d<double> conv("c", 2, 3, 3, 2, rng);
  gb::Conv1d<double>::Cache cache;
  EXPECT_EQ(conv.forward(random_matrix(11, 2, rng), cache).rows(), 5);
}

TEST(Mask, ClippedSpanFromStart) {
  const auto m = gb::mask_from_starts(6, 5, {0});
  EXPECT_EQ(m.mask, (std::vector<bool>{true, true, true, true, true, false}));
  const auto clipped = gb::mask_from_starts(6, 4, {4});
  EXPECT_EQ(clipped.masked_positions(), (std::vector<std::size_t>{4, 5}));
}

TEST(Mask, NeverMasksEverything) {
  gb::Rng rng = gb::make_stream(6, gb::Stream::kMask);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = gb::sample_mask(4, 0.999, 1, rng);
    EXPECT_GE(m.masked_count(), 1u);
    EXPECT_LE(m.masked_count(), 3u);
  }
}

TEST(Mask, CoverageMatchesClosedForm) {
  gb::Rng rng = gb::make_stream(7, gb::Stream::kMask);
  double total = 0.0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) total += static_cast<double>(gb::sample_mask(160, 0.05, 10, rng).masked_count());
  const double expected = 1.0 - std::pow(0.95, 10);
  EXPECT_NEAR(total / trials / 160.0, expected, 0.05);
}

TEST(Mask, RejectsBadArguments) {
  gb::Rng rng = gb::make_stream(8, gb::Stream::kMask);
  EXPECT_THROW(gb::sample_mask(4, 0.5, 4, rng), gb::ValidationError);
  EXPECT_THROW(gb::sample_mask(10, 0.0, 2, rng), gb::ValidationError);
  EXPECT_THROW(gb::sample_mask(10, 0.5, 0, rng), gb::ValidationError);
}

TEST(Reconstructor, NoLayersIsMaskPlusPositions) {
  gb::Rng rng = gb::make_stream(9, gb::Stream::kInit);
  gb::Reconstructor<double> rec(small_transformer(0, 1, 4, 8), 5, rng);
  const MatD z = random_matrix(5, 4, rng);
  const std::vector<bool> mask = {false, true, false, false, true};
  gb::Reconstructor<double>::Cache cache;
  const MatD y = rec.forward(z, mask, cache);
  for (int t = 0; t < 5; ++t) {
    const gb::RowVec<double> in = mask[t] ? gb::RowVec<double>(rec.mask_embedding().value.row(0)) : gb::RowVec<double>(z.row(t));
    EXPECT_LT((y.row(t) - in - rec.positional().value.row(t)).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Attention, RowsSumToOne) {
  gb::Rng rng = gb::make_stream(10, gb::Stream::kInit);
  gb::MultiHeadAttention<double> attn("a", 8, 4, rng);
  gb::MultiHeadAttention<double>::Cache cache;
  attn.forward(random_matrix(7, 8, rng, -3, 3), cache);
  ASSERT_EQ(cache.attention.size(), 4u);
  for (const auto& a : cache.attention)
    for (Eigen::Index i = 0; i < a.rows(); ++i) EXPECT_NEAR(a.row(i).sum(), 1.0, 1e-6);
}

TEST(Attention, SingleHeadLayerMatchesScalarOracle) {
  gb::Rng rng = gb::make_stream(11, gb::Stream::kInit);
  const auto tcfg = small_transformer(1, 1, 4, 6);
  gb::TransformerLayer<double> layer("l", tcfg, rng);
  auto& attn = layer.attention();
  for (auto* lin : {&attn.wq(), &attn.wv(), &attn.wo(), &layer.ff1(), &layer.ff2()})
    lin->bias().value = random_matrix(1, lin->out_features(), rng, -0.3, 0.3);
  const MatD x = random_matrix(3, 4, rng, -2, 2);
  gb::TransformerLayer<double>::Cache cache;
  const MatD y = layer.forward(x, cache);

  auto affine = [](const std::vector<double>& v, const gb::Linear<double>& lin) {
    std::vector<double> out(static_cast<std::size_t>(lin.out_features()));
    for (std::size_t j = 0; j < out.size(); ++j) {
      double acc = lin.bias().value(0, static_cast<Eigen::Index>(j));
      for (std::size_t i = 0; i < v.size(); ++i)
        acc += v[i] * lin.weight().value(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      out[j] = acc;
    }
    return out;
  };
  auto key = [&](const std::vector<double>& v) {
    std::vector<double> out(4, 0.0);
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) out[j] += v[i] * attn.wk().weight().value(i, j);
    return out;
  };
  std::vector<std::vector<double>> q(3), k(3), v(3), h(3);
  for (int t = 0; t < 3; ++t) {
    const auto n1 = layer_norm({x(t, 0), x(t, 1), x(t, 2), x(t, 3)});
    q[t] = affine(n1, attn.wq());
    k[t] = key(n1);
    v[t] = affine(n1, attn.wv());
  }
  for (int t = 0; t < 3; ++t) {
    double s[3], mx = -1e300, denom = 0.0;
    for (int u = 0; u < 3; ++u) {
      s[u] = 0.0;
      for (int i = 0; i < 4; ++i) s[u] += q[t][i] * k[u][i];
      s[u] /= 2.0;  // sqrt(head dim 4)
      mx = std::max(mx, s[u]);
    }
    for (double& e : s) denom += (e = std::exp(e - mx));
    std::vector<double> o(4, 0.0);
    for (int u = 0; u < 3; ++u)
      for (int i = 0; i < 4; ++i) o[i] += s[u] / denom * v[u][i];
    const auto a = affine(o, attn.wo());
    h[t].resize(4);
    for (int i = 0; i < 4; ++i) h[t][i] = x(t, i) + a[i];
    auto hidden = affine(layer_norm(h[t]), layer.ff1());
    for (double& e : hidden) e = gelu_ref(e);
    const auto f = affine(hidden, layer.ff2());
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(y(t, i), h[t][i] + f[i], 1e-5);
  }
}

TEST(Attention, HeadsMustDivideDim) {
  gb::Rng rng = gb::make_stream(1, gb::Stream::kInit);
  EXPECT_THROW(gb::MultiHeadAttention<double>("a", 6, 4, rng), gb::ValidationError);
}

TEST(Dropout, InactiveOutsideTraining) {
  gb::Rng rng = gb::make_stream(12, gb::Stream::kInit);
  auto tcfg = small_transformer(1, 2, 4, 8);
  tcfg.dropout = 0.5;
  gb::TransformerLayer<double> layer("l", tcfg, rng);
  const MatD x = random_matrix(5, 4, rng);
  gb::TransformerLayer<double>::Cache c1, c2, c3;
  EXPECT_TRUE(layer.forward(x, c1) == layer.forward(x, c2));
  gb::Rng drop = gb::make_stream(1, gb::Stream::kDropout);
  gb::ForwardContext ctx{true, &drop};
  EXPECT_FALSE(layer.forward(x, c3, ctx) == layer.forward(x, c1));
}

TEST(Contrastive, NoNegativesGivesZeroLoss) {
  gb::Rng rng = gb::make_stream(13, gb::Stream::kMask);
  const MatD r = random_matrix(4, 3, rng);
  const MatD y = random_matrix(4, 3, rng);
  const auto res = gb::contrastive_loss(r, y, gb::mask_from_starts(4, 1, {1, 2}), 0, 0.1, rng);
  EXPECT_EQ(res.loss, 0.0);
  EXPECT_EQ(res.chance, 1.0);
  EXPECT_TRUE(res.d_reconstructed.isZero(0.0));
}

TEST(Contrastive, PerfectReconstructionClosedForm) {
  gb::Rng rng = gb::make_stream(14, gb::Stream::kMask);
  const MatD y = MatD::Identity(2, 2);
  const auto res = gb::contrastive_loss(y, y, gb::mask_from_starts(2, 2, {0}), 1, 0.1, rng);
  EXPECT_NEAR(res.loss, std::log1p(std::exp(-10.0)), 1e-12);
  EXPECT_NEAR(res.loss, 4.54e-5, 1e-7);
  EXPECT_EQ(res.accuracy, 1.0);
  EXPECT_EQ(res.chance, 0.5);
}

TEST(Contrastive, SwappedReconstructionClosedForm) {
  gb::Rng rng = gb::make_stream(15, gb::Stream::kMask);
  const MatD y = MatD::Identity(2, 2);
  MatD r(2, 2);
  r << 0, 1, 1, 0;
  const auto res = gb::contrastive_loss(r, y, gb::mask_from_starts(2, 2, {0}), 1, 0.1, rng);
  EXPECT_NEAR(res.loss, std::log1p(std::exp(10.0)), 1e-9);
  EXPECT_NEAR(res.loss, 10.0000454, 1e-6);
  EXPECT_EQ(res.accuracy, 0.0);
}

TEST(Contrastive, ErrorsAndNonNegativity) {
  gb::Rng rng = gb::make_stream(16, gb::Stream::kMask);
  const MatD r = random_matrix(6, 4, rng);
  const MatD y = random_matrix(6, 4, rng);
  EXPECT_THROW(gb::contrastive_loss(r, y, gb::mask_from_starts(6, 2, {0}), 2, 0.1, rng), gb::ValidationError);
  EXPECT_THROW(gb::contrastive_loss(r, y, gb::MaskSpec{0.1, 1, std::vector<bool>(6, false)}, 0, 0.1, rng),
               gb::ValidationError);
  for (int trial = 0; trial < 50; ++trial) {
    const auto res = gb::contrastive_loss(random_matrix(6, 4, rng), y, gb::mask_from_starts(6, 3, {0, 3}), 4, 0.1, rng);
    EXPECT_GE(res.loss, 0.0);
  }
}

TEST(Contrastive, GradientsMatchFiniteDifferences) {
  gb::Rng rng = gb::make_stream(17, gb::Stream::kMask);
  MatD r = random_matrix(6, 3, rng);
  MatD y = random_matrix(6, 3, rng);
  const auto mask = gb::mask_from_starts(6, 2, {0, 3});
  const std::uint64_t seed = 99;
  auto loss = [&](const MatD& a, const MatD& b) {
    gb::Rng s = gb::make_stream(seed, gb::Stream::kMask);
    return gb::contrastive_loss(a, b, mask, 2, 0.5, s).loss;
  };
  gb::Rng s = gb::make_stream(seed, gb::Stream::kMask);
  const auto res = gb::contrastive_loss(r, y, mask, 2, 0.5, s);
  const double eps = 1e-6;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    MatD rp = r, rm = r, yp = y, ym = y;
    rp.data()[i] += eps;
    rm.data()[i] -= eps;
    yp.data()[i] += eps;
    ym.data()[i] -= eps;
    EXPECT_NEAR(res.d_reconstructed.data()[i], (loss(rp, y) - loss(rm, y)) / (2 * eps), 1e-6);
    EXPECT_NEAR(res.d_targets.data()[i], (loss(r, yp) - loss(r, ym)) / (2 * eps), 1e-6);
  }
}

TEST(Contrastive, FixedSeedIsBitReproducible) {
  gb::Rng rng = gb::make_stream(18, gb::Stream::kData);
  const MatD r = random_matrix(12, 5, rng);
  const MatD y = random_matrix(12, 5, rng);
  const auto mask = gb::mask_from_starts(12, 3, {0, 5, 9});
  gb::Rng a = gb::make_stream(3, gb::Stream::kMask);
  gb::Rng b = gb::make_stream(3, gb::Stream::kMask);
  EXPECT_EQ(gb::contrastive_loss(r, y, mask, 4, 0.1, a).loss, gb::contrastive_loss(r, y, mask, 4, 0.1, b).loss);
}

TEST(Head, LinearKindOnConstantFeatures) {
  gb::Rng rng = gb::make_stream(19, gb::Stream::kInit);
  gb::ClassifierHead<double> head(gb::HeadKind::kLinear, small_transformer(1, 1, 4, 8), 5, 4, rng);
  head.linear().bias().value = random_matrix(1, 2, rng);
  const MatD v = random_matrix(1, 4, rng);
  gb::ClassifierHead<double>::Cache cache;
  const MatD logits = head.forward(v.replicate(5, 1), cache);
  EXPECT_LT((logits - (v * head.linear().weight().value + head.linear().bias().value)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Head, BendrWithoutLayersReducesToLinear) {
  gb::Rng r1 = gb::make_stream(20, gb::Stream::kInit);
  gb::ClassifierHead<double> bendr(gb::HeadKind::kBendr, small_transformer(0, 1, 4, 8), 6, 4, r1);
  bendr.context()->positional().value.setZero();
  gb::Rng r2 = gb::make_stream(21, gb::Stream::kInit);
  gb::ClassifierHead<double> linear(gb::HeadKind::kLinear, small_transformer(0, 1, 4, 8), 6, 4, r2);
  linear.linear().weight().value = bendr.linear().weight().value;
  const MatD z = random_matrix(6, 4, r2);
  gb::ClassifierHead<double>::Cache ca, cb;
  EXPECT_LT((bendr.forward(z, ca) - linear.forward(z, cb)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Head, BendrGradientsMatchFiniteDifferences) {
  gb::Rng rng = gb::make_stream(22, gb::Stream::kInit);
  gb::ClassifierHead<double> head(gb::HeadKind::kBendr, small_transformer(1, 2, 8, 16), 6, 8, rng);
  const auto report = gb::grad_check(head, random_matrix(6, 8, rng), 1e-5, 1e-4, "head.bendr");
  EXPECT_TRUE(report.pass) << report.max_rel_err;
}

TEST(Head, BendrNeedsMatchingWidth) {
  gb::Rng rng = gb::make_stream(23, gb::Stream::kInit);
  EXPECT_THROW(gb::ClassifierHead<double>(gb::HeadKind::kBendr, small_transformer(1, 1, 8, 8), 4, 4, rng),
               gb::ValidationError);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  MatD logits(1, 2);
  logits << 0.3, -1.2;
  MatD d;
  const double loss = gb::softmax_cross_entropy(logits, 1, d);
  const double p1 = std::exp(-1.2) / (std::exp(0.3) + std::exp(-1.2));
  EXPECT_NEAR(loss, -std::log(p1), 1e-12);
  EXPECT_NEAR(d(0, 1), p1 - 1.0, 1e-12);
  EXPECT_NEAR(d(0, 0), 1.0 - p1, 1e-12);
}
