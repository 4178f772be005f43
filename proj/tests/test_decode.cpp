#include "rboxgeo/assignment.hpp"
#include "rboxgeo/decode.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <random>
#include <stdexcept>

using namespace rboxgeo;
using testing_support::kPi;

TEST(DecodeRbox, Examples) {
  const RBoxd d = decode_rbox(Point2d(5, 5), BoxOffsets{1, 1, 3, 1, 0});
  EXPECT_DOUBLE_EQ(d.cx, 6);
  EXPECT_DOUBLE_EQ(d.cy, 5);
  EXPECT_DOUBLE_EQ(d.w, 4);
  EXPECT_DOUBLE_EQ(d.h, 2);
  EXPECT_EQ(d.theta, 0);
  const RBoxd b{3, 4, 10, 6, 0.5};
  const RBoxd c = decode_rbox(b.center(), BoxOffsets{5, 3, 5, 3, 0.5});
  EXPECT_NEAR(c.cx, 3, 1e-12);
  EXPECT_NEAR(c.cy, 4, 1e-12);
  EXPECT_THROW(decode_rbox(Point2d(0, 0), BoxOffsets{0, 0, 0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(decode_rbox(Point2d(0, 0), BoxOffsets{-1, 1, 2, 1, 0}), std::invalid_argument);
}

TEST(DecodeRbox, EncodeDecodeRoundTrip) {
  std::mt19937_64 g(51);
  for (int n = 0; n < 1000; ++n) {
    const RBoxd b = normalized(testing_support::random_box(g, 0, 100, 1, 50));
    const double u = testing_support::uniform(g, -0.5, 0.5) * b.w;
    const double v = testing_support::uniform(g, -0.5, 0.5) * b.h;
    const Point2d p(b.cx + u * std::cos(b.theta) - v * std::sin(b.theta),
                    b.cy + u * std::sin(b.theta) + v * std::cos(b.theta));
    const RBoxd d = decode_rbox(p, box_frame_offsets(p, b));
    EXPECT_NEAR(d.cx, b.cx, 1e-6);
    EXPECT_NEAR(d.cy, b.cy, 1e-6);
    EXPECT_NEAR(d.w, b.w, 1e-6);
    EXPECT_NEAR(d.h, b.h, 1e-6);
    EXPECT_NEAR(d.theta, b.theta, 1e-12);
  }
}

TEST(FuseScore, Examples) {
  EXPECT_EQ(fuse_score(1, 1), 1.0);
  EXPECT_NEAR(fuse_score(0.37, 0.37), 0.37, 1e-15);
  EXPECT_NEAR(fuse_score(0.9, 0.4), 0.6, 1e-15);
}

namespace {
Prediction pred(RBoxd b, double score, int level = 3, long order = 0) { return {b, score, level, order}; }
}  // namespace

TEST(RotatedNms, Examples) {
  const RBoxd a{0, 0, 10, 10, 0};
  EXPECT_EQ(rotated_nms({pred(a, 0.9)}, 0.5).size(), 1u);
  const auto two = rotated_nms({pred(a, 0.8, 3, 1), pred(a, 0.9, 3, 0)}, 0.5);
  ASSERT_EQ(two.size(), 1u);
  EXPECT_EQ(two[0].score, 0.9);

  // B shifted so IoU(A,B) = 0.6: overlap 10*(10-s), union 10*(10+s) -> s = 2.5.
  const RBoxd b{2.5, 0, 10, 10, 0};
  const RBoxd c{100, 100, 10, 10, 0.3};
  ASSERT_NEAR(rbox_iou(a, b), 0.6, 1e-12);
  ASSERT_EQ(rbox_iou(a, c), 0.0);
  const auto kept = rotated_nms({pred(b, 0.8, 3, 1), pred(c, 0.7, 3, 2), pred(a, 0.9, 3, 0)}, 0.5);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].box, a);
  EXPECT_EQ(kept[1].box, c);
  EXPECT_THROW(rotated_nms({}, 1.5), std::invalid_argument);
}

TEST(SelectTop1, ExamplesAndTies) {
  const RBoxd a{0, 0, 1, 1, 0};
  EXPECT_EQ(select_top1(std::vector<Prediction>{pred(a, 0.3)}).score, 0.3);
  const std::vector<Prediction> p{pred(a, 0.2, 3, 0), pred(a, 0.7, 3, 1), pred(a, 0.5, 3, 2)};
  EXPECT_EQ(select_top1(p).score, 0.7);
  const std::vector<Prediction> tie{pred(a, 0.5, 4, 0), pred(a, 0.5, 3, 9), pred(a, 0.5, 3, 2)};
  const Prediction t = select_top1(tie);
  EXPECT_EQ(t.level, 3);
  EXPECT_EQ(t.order, 2);
  EXPECT_THROW(select_top1(std::vector<Prediction>{}), NoPrediction);
}

TEST(DecodePredictions, FloorAndTop1) {
  std::vector<RawPrediction> raw;
  raw.push_back({3, 0, 0, 0.2, 0.2, {2, 2, 2, 2, 0}});
  raw.push_back({3, 0, 1, 0.9, 0.4, {2, 2, 2, 2, 0}});
  raw.push_back({4, 0, 0, 1e-9, 1e-9, {2, 2, 2, 2, 0}});
  const auto top = decode_predictions(raw);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_NEAR(top[0].score, 0.6, 1e-15);
  EXPECT_NEAR(top[0].box.cx, 12, 1e-12);

  DecodeOptions multi;
  multi.multi_output = true;
  multi.nms_thr = 0.99;
  EXPECT_EQ(decode_predictions(raw, multi).size(), 2u);  // the sub-floor one is dropped

  std::vector<RawPrediction> weak{{3, 0, 0, 1e-9, 1e-9, {2, 2, 2, 2, 0}}};
  EXPECT_EQ(decode_predictions(weak).size(), 1u);  // floor never empties the output
  EXPECT_THROW(decode_predictions(std::vector<RawPrediction>{}), NoPrediction);
}

TEST(SamPrompt, Modes) {
  const Prediction axis = pred(RBoxd{5, 5, 4, 2, 0}, 0.8);
  const SamPrompt h = export_sam_prompt(axis, PromptMode::hbox, "a");
  ASSERT_EQ(h.box.size(), 4u);
  EXPECT_DOUBLE_EQ(h.box[0], 3);
  EXPECT_DOUBLE_EQ(h.box[1], 4);
  EXPECT_DOUBLE_EQ(h.box[2], 7);
  EXPECT_DOUBLE_EQ(h.box[3], 6);

  const Prediction diamond = pred(RBoxd{0, 0, 2, 2, kPi / 4}, 0.5);
  const SamPrompt d = export_sam_prompt(diamond, PromptMode::hbox);
  EXPECT_NEAR(d.box[0], -std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(d.box[3], std::sqrt(2.0), 1e-12);

  const SamPrompt c = export_sam_prompt(diamond, PromptMode::rbox_corners, "b");
  const auto corners = rbox_corners(diamond.box);
  ASSERT_EQ(c.box.size(), 8u);
  for (std::size_t n = 0; n < 4; ++n) {
    EXPECT_EQ(c.box[2 * n], corners[n].x());
    EXPECT_EQ(c.box[2 * n + 1], corners[n].y());
  }

  const auto j = nlohmann::json::parse(to_json_line(c));
  EXPECT_EQ(j.at("image_id"), "b");
  EXPECT_EQ(j.at("mode"), "rbox-corners");
  EXPECT_EQ(j.at("box").size(), 8u);
  EXPECT_EQ(j.at("score"), 0.5);
  EXPECT_EQ(to_json_line(c).find('\n'), std::string::npos);
}
