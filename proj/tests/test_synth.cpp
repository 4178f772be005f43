#include "rboxgeo/synth.hpp"

#include "rboxgeo/assignment.hpp"
#include "rboxgeo/mcp.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

using namespace rboxgeo;
using testing_support::kPi;

TEST(Synth, DeterministicPerSeed) {
  SynthConfig c;
  c.noise = 0.3;
  const SyntheticScene a = synth_scene(17, c), b = synth_scene(17, c), other = synth_scene(18, c);
  EXPECT_EQ(a.gt_rbox.cx, b.gt_rbox.cx);
  EXPECT_EQ(a.gt_rbox.theta, b.gt_rbox.theta);
  EXPECT_TRUE(a.query == b.query);
  EXPECT_TRUE(a.reference == b.reference);
  EXPECT_TRUE((a.raster == b.raster).all());
  EXPECT_NE(a.gt_rbox.cx, other.gt_rbox.cx);
}

TEST(Synth, BatchIndependentOfWorkers) {
  SynthConfig c;
  c.noise = 0.2;
  const auto one = synth_batch(5, 12, c, 1);
  const auto four = synth_batch(5, 12, c, 4);
  ASSERT_EQ(one.size(), 12u);
  for (std::size_t n = 0; n < one.size(); ++n) {
    EXPECT_EQ(one[n].seed, 5 + n);
    EXPECT_TRUE(one[n].reference == four[n].reference);
    EXPECT_EQ(one[n].gt_rbox.theta, four[n].gt_rbox.theta);
  }
}

TEST(Synth, SceneIsWellFormed) {
  SynthConfig c;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SyntheticScene s = synth_scene(seed, c);
    const RBoxd& b = s.gt_rbox;
    EXPECT_GE(std::min(b.w, b.h), c.min_side);
    EXPECT_LE(std::max(b.w, b.h), c.max_side);
    EXPECT_GE(b.theta, -kPi / 2);
    EXPECT_LT(b.theta, kPi / 2);
    const HBoxd hull = rbox_to_hbox(b);
    EXPECT_GE(hull.xmin, 0);
    EXPECT_GE(hull.ymin, 0);
    EXPECT_LE(hull.xmax, c.image_w);
    EXPECT_LE(hull.ymax, c.image_h);
    EXPECT_GE(s.click.x, 0);
    EXPECT_LT(s.click.x, c.query_w);
    EXPECT_GE(s.click.y, 0);
    EXPECT_LT(s.click.y, c.query_h);
    validate_pyramid(s.query);
    validate_pyramid(s.reference);
    EXPECT_EQ(s.reference.levels.size(), static_cast<std::size_t>(kNumLevels));
    EXPECT_EQ(s.raster.rows(), c.image_h);
    EXPECT_GT(s.raster.cast<int>().sum(), 0);
    EXPECT_TRUE(check_record(scene_record(s)).empty());
  }
}

TEST(Synth, PlantedSimilarityBounds) {
  SynthConfig c;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SyntheticScene s = synth_scene(seed, c);
    for (const FeatureLevel& q : s.query.levels) {
      const FeatureLevel& r = s.reference.levels.at(static_cast<std::size_t>(q.k - kFirstLevel));
      const Eigen::MatrixXd cos = cosine_score_map(global_average_pool(q), r);
      for (int i = 0; i < r.h; ++i)
        for (int j = 0; j < r.w; ++j) {
          const Point2d p = feature_to_image(i, j, r.stride());
          if (testing_support::inside(p.x(), p.y(), s.gt_rbox))
            EXPECT_GE(cos(i, j), kPlantInsideMin - 1e-9);
          else
            EXPECT_LE(cos(i, j), kPlantOutsideMax + 1e-9);
        }
    }
  }
}

TEST(Synth, AttentionPeakInsideTargetAtZeroNoise) {
  SynthConfig c;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const SyntheticScene s = synth_scene(seed, c);
    const auto att = mcp_attention(s.query, s.reference);
    const auto [i, j] = argmax_scan(att.front());
    const Point2d p = feature_to_image(i, j, 1 << kFirstLevel);
    EXPECT_TRUE(testing_support::inside(p.x(), p.y(), s.gt_rbox)) << "seed " << seed;
  }
}

TEST(Synth, PinnedAngle) {
  SynthConfig c;
  c.theta_min_deg = c.theta_max_deg = 0;
  const auto batch = synth_batch(0, 30, c);
  std::vector<RBoxd> boxes;
  for (const auto& s : batch) boxes.push_back(s.gt_rbox);
  for (const auto& b : boxes) EXPECT_EQ(b.theta, 0.0);
  EXPECT_EQ(rotation_stats(boxes).fraction_rotated, 0.0);
}

TEST(Synth, RotatedFractionIsExact) {
  for (double f : {0.0, 0.25, 0.6, 1.0}) {
    SynthConfig c;
    c.rotated_fraction = f;
    for (std::size_t count : {10u, 20u, 100u}) {
      std::vector<RBoxd> boxes;
      for (const auto& s : synth_batch(3, count, c)) boxes.push_back(s.gt_rbox);
      const RotationStats st = rotation_stats(boxes, 1.0);
      EXPECT_NEAR(st.fraction_rotated, std::floor(count * f) / count, 1e-15) << f << " " << count;
    }
  }
}

TEST(Synth, InvalidConfigs) {
  SynthConfig c;
  c.max_side = 1000;
  EXPECT_THROW(synth_scene(0, c), std::invalid_argument);
  c = {};
  c.min_side = 0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = {};
  c.rotated_fraction = 1.5;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = {};
  c.theta_min_deg = 10;
  c.theta_max_deg = -10;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = {};
  c.noise = -1;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = {};
  c.channels = 0;
  EXPECT_THROW(validate(c), std::invalid_argument);
}
