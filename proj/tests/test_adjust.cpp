#include <gtest/gtest.h>

#include "graph_bendr/adjust.hpp"
#include "graph_bendr/gradcheck.hpp"
#include "support.hpp"

namespace gb = graph_bendr;
using gb::MatD;
using gb::testing::random_matrix;

TEST(Padding, RepeatsLastValue) {
  MatD x(1, 3);
  x << 1, 2, 3;
  MatD expected(1, 5);
  expected << 1, 2, 3, 3, 3;
  EXPECT_TRUE(gb::adjust_padding(x, 5) == expected);

  MatD single(1, 1);
  single << 7;
  EXPECT_TRUE(gb::adjust_padding(single, 4) == MatD::Constant(1, 4, 7));
}

TEST(Padding, EqualLengthIsUnchanged) {
  gb::Rng rng = gb::make_stream(1, gb::Stream::kData);
  const gb::MatF x = random_matrix(3, 9, rng).cast<float>();
  EXPECT_TRUE(gb::adjust_padding(x, 9) == x);
}

TEST(Padding, RejectsShorteningAndEmptyInput) {
  EXPECT_THROW(gb::adjust_padding(MatD(MatD::Ones(2, 6)), 5), gb::ValidationError);
  EXPECT_THROW(gb::adjust_padding(MatD(2, 0), 5), gb::ValidationError);
}

TEST(Padding, PrefixExactSuffixConstantOnRandomInputs) {
  gb::Rng rng = gb::make_stream(2, gb::Stream::kData);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index c = 1 + static_cast<Eigen::Index>(gb::uniform_index(rng, 5));
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(gb::uniform_index(rng, 40));
    const Eigen::Index n = m + static_cast<Eigen::Index>(gb::uniform_index(rng, 40));
    const gb::MatF x = random_matrix(c, m, rng, -1e3, 1e3).cast<float>();
    const gb::MatF y = gb::adjust_padding(x, n);
    ASSERT_EQ(y.cols(), n);
    for (Eigen::Index r = 0; r < c; ++r) {
      ASSERT_TRUE(y.row(r).head(m) == x.row(r));
      for (Eigen::Index t = m; t < n; ++t) ASSERT_EQ(y(r, t), x(r, m - 1));
    }
  }
}

TEST(SelectAdjuster, BypassWhenLengthsMatch) {
  for (auto kind : {gb::AdjusterKind::kLinear, gb::AdjusterKind::kPadding, gb::AdjusterKind::kIdentity}) {
    const auto cfg = gb::select_adjuster(15360, 15360, kind);
    EXPECT_EQ(cfg.kind, gb::AdjusterKind::kIdentity);
  }
  EXPECT_EQ(gb::select_adjuster(512, 15360, gb::AdjusterKind::kPadding).kind, gb::AdjusterKind::kPadding);
  EXPECT_EQ(gb::select_adjuster(512, 256, gb::AdjusterKind::kLinear).kind, gb::AdjusterKind::kLinear);
  EXPECT_THROW(gb::select_adjuster(512, 256, gb::AdjusterKind::kPadding), gb::ValidationError);
}

TEST(SelectAdjuster, NamesRoundTrip) {
  for (auto kind : {gb::AdjusterKind::kLinear, gb::AdjusterKind::kPadding, gb::AdjusterKind::kIdentity})
    EXPECT_EQ(gb::adjuster_kind_from_string(gb::to_string(kind)), kind);
  EXPECT_THROW(gb::adjuster_kind_from_string("cubic"), gb::ConfigError);
}

TEST(LinearAdjuster, IdentityAndZeroMaps) {
  gb::Rng rng = gb::make_stream(3, gb::Stream::kData);
  gb::LinearAdjuster<double> adj(6, 6);
  const MatD x = random_matrix(4, 6, rng);
  gb::LinearAdjuster<double>::Cache cache;
  EXPECT_TRUE(adj.forward(x, cache).isApprox(x, 1e-15));
  adj.map().value.setZero();
  EXPECT_TRUE(adj.forward(x, cache).isZero(0.0));
}

TEST(LinearAdjuster, MatchesRowByRowDotProducts) {
  gb::Rng rng = gb::make_stream(4, gb::Stream::kData);
  gb::LinearAdjuster<double> adj(3, 5);
  adj.map().value = random_matrix(3, 5, rng);
  const MatD x = random_matrix(2, 3, rng);
  gb::LinearAdjuster<double>::Cache cache;
  const MatD y = adj.forward(x, cache);
  for (int r = 0; r < 2; ++r)
    for (int j = 0; j < 5; ++j) {
      double acc = 0.0;
      for (int i = 0; i < 3; ++i) acc += x(r, i) * adj.map().value(i, j);
      EXPECT_NEAR(y(r, j), acc, 1e-6);
    }
  EXPECT_TRUE(gb::grad_check(adj, x, 1e-5, 1e-4, "adjuster").pass);
}

TEST(LinearAdjuster, InterpolationInitKeepsConstants) {
  for (auto [m, n] : std::vector<std::pair<int, int>>{{3, 5}, {512, 768}, {768, 512}, {2, 2}, {1, 4}, {100, 37}}) {
    gb::LinearAdjuster<float> adj(m, n);
    gb::LinearAdjuster<float>::Cache cache;
    const gb::MatF y = adj.forward(gb::MatF::Constant(3, m, -2.5f), cache);
    EXPECT_LT((y.array() + 2.5f).abs().maxCoeff(), 1e-6) << m << "->" << n;
  }
}

TEST(LinearAdjuster, StencilInterpolatesRamps) {
  const MatD s = gb::interpolation_stencil(3, 5);
  MatD ramp(1, 3);
  ramp << 0, 1, 2;
  MatD expected(1, 5);
  expected << 0, 0.5, 1, 1.5, 2;
  EXPECT_LT((ramp * s - expected).cwiseAbs().maxCoeff(), 1e-15);
  for (Eigen::Index j = 0; j < s.cols(); ++j) EXPECT_NEAR(s.col(j).sum(), 1.0, 1e-15);
}

TEST(LinearAdjuster, RejectsWrongLength) {
  gb::LinearAdjuster<double> adj(4, 8);
  gb::LinearAdjuster<double>::Cache cache;
  EXPECT_THROW(adj.forward(MatD::Ones(2, 5), cache), gb::ValidationError);
}
