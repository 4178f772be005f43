#include "rboxgeo/mcp.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

using namespace rboxgeo;

namespace {

FeatureLevel level_from(int k, int h, int w, const Eigen::MatrixXd& values) { return FeatureLevel{k, h, w, values}; }

}  // namespace

TEST(GlobalAveragePool, Examples) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(2, 6, 3.5);
  EXPECT_TRUE(global_average_pool(level_from(3, 2, 3, c)).isApprox(Eigen::Vector2d(3.5, 3.5)));
  Eigen::MatrixXd one(3, 1);
  one << 1, -2, 5;
  EXPECT_EQ(global_average_pool(level_from(3, 1, 1, one)), Eigen::VectorXd(one.col(0)));
  Eigen::MatrixXd four(1, 4);
  four << 1, 2, 3, 4;
  EXPECT_DOUBLE_EQ(global_average_pool(level_from(3, 2, 2, four))[0], 2.5);
}

TEST(CosineScoreMap, Examples) {
  const Eigen::Vector2d g(1, 2);
  Eigen::MatrixXd v(2, 3);
  v.col(0) = g;
  v.col(1) = Eigen::Vector2d(-2, 1);
  v.col(2) = -2 * g;
  const Eigen::MatrixXd s = cosine_score_map(g, level_from(3, 1, 3, v));
  EXPECT_NEAR(s(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(s(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(s(0, 2), -1.0, 1e-15);
  EXPECT_THROW(cosine_score_map(Eigen::Vector3d(1, 2, 3), level_from(3, 1, 3, v)), std::invalid_argument);
}

TEST(MinmaxNormalize, Examples) {
  const double eps = 1e-6;
  Eigen::MatrixXd s(1, 3);
  s << 1, 2, 3;
  const Eigen::MatrixXd a = minmax_normalize(s, eps);
  EXPECT_EQ(a(0, 0), 0.0);
  EXPECT_NEAR(a(0, 1), 0.5, 1e-5);
  EXPECT_NEAR(a(0, 2), 1.0, 1e-5);
  EXPECT_TRUE(minmax_normalize(Eigen::MatrixXd::Constant(2, 2, 4.0), eps).isZero(0));
  Eigen::MatrixXd pm(1, 2);
  pm << -1, 1;
  EXPECT_NEAR(minmax_normalize(pm, eps)(0, 1), 2 / (2 + eps), 1e-15);
}

TEST(Modulate, Examples) {
  Eigen::MatrixXd f(2, 1);
  f << 2, -4;
  const FeatureLevel level = level_from(3, 1, 1, f);
  const FeatureLevel half = modulate(Eigen::MatrixXd::Constant(1, 1, 0.5), level);
  EXPECT_EQ(half.at(0, 0)[0], 1.0);
  EXPECT_EQ(half.at(0, 0)[1], -2.0);
  EXPECT_EQ(modulate(Eigen::MatrixXd::Ones(1, 1), level), level);
  EXPECT_TRUE(modulate(Eigen::MatrixXd::Zero(1, 1), level).values.isZero(0));
  EXPECT_THROW(modulate(Eigen::MatrixXd::Ones(2, 1), level), std::invalid_argument);
}

TEST(McpForward, ConstructedSeparability) {
  std::mt19937_64 g(3);
  FeaturePyramid q = testing_support::random_pyramid(g, 3, 4, 4, 0.1, 1.0);
  FeaturePyramid r = testing_support::random_pyramid(g, 3, 4, 4);
  // Level 3: location (1,2) equals GAP(query); every other location is orthogonal to it.
  const Eigen::VectorXd gap = global_average_pool(q.levels[0]);
  const Eigen::Vector3d any(0.3, -0.7, 1.1);
  const Eigen::VectorXd ortho = any - any.dot(gap.normalized()) * gap.normalized();
  FeatureLevel& l = r.levels[0];
  for (int i = 0; i < l.h; ++i)
    for (int j = 0; j < l.w; ++j) l.at(i, j) = (i == 1 && j == 2) ? gap : ortho;
  const auto att = mcp_attention(q, r);
  const auto out = mcp_forward(q, r);
  for (int i = 0; i < l.h; ++i)
    for (int j = 0; j < l.w; ++j) {
      if (i == 1 && j == 2) {
        EXPECT_NEAR(att[0](i, j), 1.0, 1e-5);
        EXPECT_GT(out.levels[0].at(i, j).norm(), 0.99);
      } else {
        EXPECT_NEAR(att[0](i, j), 0.0, 1e-12);
        EXPECT_NEAR(out.levels[0].at(i, j).norm(), 0.0, 1e-12);
      }
    }
}

TEST(McpForward, MatchesLoopOracle) {
  std::mt19937_64 g(99);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + trial % 4;
    const FeaturePyramid q = testing_support::random_pyramid(g, d, 16, 12);
    const FeaturePyramid r = testing_support::random_pyramid(g, d, 32, 24);
    const FeaturePyramid out = mcp_forward(q, r);
    for (std::size_t n = 0; n < out.levels.size(); ++n) {
      const auto o = testing_support::mcp_oracle_level(q.levels[n], r.levels[n], kAttentionEps);
      const FeatureLevel& lv = out.levels[n];
      for (int c = 0; c < d; ++c)
        for (int i = 0; i < lv.h; ++i)
          for (int j = 0; j < lv.w; ++j)
            ASSERT_NEAR(lv.at(i, j)[c], o.out[std::size_t(c)][std::size_t(i)][std::size_t(j)], 1e-9);
    }
  }
}

TEST(McpForward, TwoByTwoLevelsMatchOracle) {
  std::mt19937_64 g(5);
  const FeaturePyramid q = testing_support::random_pyramid(g, 2, 2, 2);
  FeaturePyramid r;
  for (int k = kFirstLevel; k <= kLastLevel; ++k) {
    FeatureLevel l{k, 2, 2, Eigen::MatrixXd(2, 4)};
    for (int n = 0; n < 8; ++n) l.values(n % 2, n / 2) = testing_support::uniform(g, -1, 1);
    r.levels.push_back(l);
  }
  const auto out = mcp_forward(q, r);
  for (std::size_t n = 0; n < 5; ++n) {
    const auto o = testing_support::mcp_oracle_level(q.levels[n], r.levels[n], kAttentionEps);
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          EXPECT_NEAR(out.levels[n].at(i, j)[c], o.out[std::size_t(c)][std::size_t(i)][std::size_t(j)], 1e-9);
  }
}

TEST(McpForward, PositiveScaleInvarianceAndArgmax) {
  std::mt19937_64 g(7);
  for (int trial = 0; trial < 20; ++trial) {
    const FeaturePyramid q = testing_support::random_pyramid(g, 4, 8, 8);
    const FeaturePyramid r = testing_support::random_pyramid(g, 4, 16, 16);
    FeaturePyramid qs = q;
    const double scale = testing_support::uniform(g, 0.01, 100);
    for (auto& l : qs.levels) l.values *= scale;
    const auto a = mcp_forward(q, r);
    const auto b = mcp_forward(qs, r);
    for (std::size_t n = 0; n < a.levels.size(); ++n)
      EXPECT_LT((a.levels[n].values - b.levels[n].values).cwiseAbs().maxCoeff(), 1e-12);
    const auto att = mcp_attention(q, r);
    for (std::size_t n = 0; n < att.size(); ++n) {
      const Eigen::MatrixXd cos = cosine_score_map(global_average_pool(q.levels[n]), r.levels[n]);
      EXPECT_EQ(argmax_scan(att[n]), argmax_scan(cos));
      EXPECT_GE(att[n].minCoeff(), 0.0);
      EXPECT_LE(att[n].maxCoeff(), 1.0);
    }
  }
}

TEST(McpForward, RejectsMismatchedPyramids) {
  std::mt19937_64 g(8);
  const FeaturePyramid q = testing_support::random_pyramid(g, 3, 4, 4);
  const FeaturePyramid r = testing_support::random_pyramid(g, 4, 4, 4);
  EXPECT_THROW(mcp_forward(q, r), std::invalid_argument);
  FeaturePyramid short_p = q;
  short_p.levels.pop_back();
  EXPECT_THROW(mcp_forward(short_p, q), std::invalid_argument);
  FeaturePyramid bad = q;
  bad.levels[2].values(0, 0) = std::nan("");
  EXPECT_THROW(mcp_forward(bad, q), std::invalid_argument);
}

TEST(ArgmaxScan, FirstMaximumInRowMajorOrder) {
  Eigen::MatrixXd m(2, 3);
  m << 0, 5, 1, 5, 2, 5;
  EXPECT_EQ(argmax_scan(m), std::make_pair(0, 1));
}

TEST(LevelSize, CeilingDivision) {
  EXPECT_EQ(level_size(256, 256, 3), std::make_pair(32, 32));
  EXPECT_EQ(level_size(100, 130, 7), std::make_pair(1, 2));
}

TEST(PyramidContainer, RoundTripIsFloatExact) {
  std::mt19937_64 g(9);
  const FeaturePyramid p = testing_support::random_pyramid(g, 3, 8, 4);
  std::stringstream s;
  write_pyramid(s, p);
  const FeaturePyramid back = read_pyramid(s);
  ASSERT_EQ(back.levels.size(), p.levels.size());
  for (std::size_t n = 0; n < p.levels.size(); ++n) {
    EXPECT_EQ(back.levels[n].h, p.levels[n].h);
    EXPECT_TRUE(back.levels[n].values.isApprox(p.levels[n].values.cast<float>().cast<double>(), 0));
  }
  std::stringstream truncated(s.str().substr(0, 20));
  EXPECT_ANY_THROW(read_pyramid(truncated));
}
