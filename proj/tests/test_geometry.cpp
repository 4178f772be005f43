#include "rboxgeo/geometry.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

using namespace rboxgeo;
using testing_support::kPi;

namespace {

Polygond square(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

// Every vertex of `expected` appears in `got` (and sizes match).
void expect_same_vertex_set(const Polygond& got, const Polygond& expected, double tol = 1e-12) {
  ASSERT_EQ(got.size(), expected.size());
  for (const auto& e : expected) {
    const bool found = std::any_of(got.begin(), got.end(), [&](const Point2d& p) { return (p - e).norm() < tol; });
    EXPECT_TRUE(found) << "missing vertex (" << e.x() << ", " << e.y() << ")";
  }
}

}  // namespace

TEST(NormalizeAngle, Examples) {
  EXPECT_EQ(normalize_angle(0.0), 0.0);
  EXPECT_NEAR(normalize_angle(kPi), 0.0, 1e-15);
  EXPECT_NEAR(normalize_angle(1.7), 1.7 - kPi, 1e-15);
  EXPECT_NEAR(normalize_angle(-kPi / 2), -kPi / 2, 1e-15);
  EXPECT_NEAR(normalize_angle(kPi / 2), -kPi / 2, 1e-15);
}

TEST(NormalizeAngle, RangeAndPeriod) {
  std::mt19937_64 g(11);
  for (int n = 0; n < 1000; ++n) {
    const double t = testing_support::uniform(g, -50, 50);
    const double r = normalize_angle(t);
    EXPECT_GE(r, -kPi / 2);
    EXPECT_LT(r, kPi / 2);
    EXPECT_NEAR(std::sin(2 * r), std::sin(2 * t), 1e-9);
    EXPECT_NEAR(std::cos(2 * r), std::cos(2 * t), 1e-9);
  }
}

TEST(NormalizeAngle, RejectsNonFinite) {
  EXPECT_THROW(normalize_angle(std::numeric_limits<double>::quiet_NaN()), std::invalid_argument);
  EXPECT_THROW(normalize_angle(std::numeric_limits<double>::infinity()), std::invalid_argument);
}

TEST(RboxCorners, Examples) {
  expect_same_vertex_set(rbox_corners(RBoxd{0, 0, 2, 4, 0}), {{-1, -2}, {1, -2}, {1, 2}, {-1, 2}});
  const double r2 = std::sqrt(2.0);
  expect_same_vertex_set(rbox_corners(RBoxd{0, 0, 2, 2, kPi / 4}), {{r2, 0}, {0, r2}, {-r2, 0}, {0, -r2}});
  expect_same_vertex_set(rbox_corners(RBoxd{10, 5, 6, 2, kPi / 2}), rbox_corners(RBoxd{10, 5, 2, 6, 0}), 1e-12);
}

TEST(RboxCorners, PositiveOrientationAndArea) {
  std::mt19937_64 g(3);
  for (int n = 0; n < 200; ++n) {
    const RBoxd b = testing_support::random_box(g);
    const auto c = rbox_corners(b);
    EXPECT_GT(signed_area(c), 0);
    EXPECT_NEAR(polygon_area(c), b.w * b.h, 1e-9 * b.w * b.h);
  }
}

TEST(ConvexIntersect, Examples) {
  const auto unit = square(0, 0, 1, 1);
  EXPECT_NEAR(polygon_area(convex_intersect(unit, unit)), 1.0, 1e-15);
  EXPECT_TRUE(convex_intersect(unit, square(2, 2, 3, 3)).empty());
  const auto overlap = convex_intersect(square(0, 0, 2, 2), square(1, 1, 3, 3));
  expect_same_vertex_set(overlap, square(1, 1, 2, 2));
}

TEST(ConvexIntersect, TouchingEdgeHasZeroArea) {
  const auto touch = convex_intersect(square(0, 0, 1, 1), square(1, 0, 2, 1));
  EXPECT_NEAR(polygon_area(touch), 0.0, 1e-12);
}

TEST(PolygonArea, Examples) {
  EXPECT_EQ(polygon_area(Polygond{}), 0.0);
  EXPECT_DOUBLE_EQ(polygon_area(square(0, 0, 1, 1)), 1.0);
  EXPECT_DOUBLE_EQ(polygon_area(Polygond{{0, 0}, {2, 0}, {0, 2}}), 2.0);
  EXPECT_DOUBLE_EQ(polygon_area(Polygond{{0, 0}, {0, 2}, {2, 0}}), 2.0);  // clockwise input
}

TEST(RboxIou, Examples) {
  const RBoxd a{3, 4, 5, 2, 0.3};
  EXPECT_EQ(rbox_iou(a, a), 1.0);
  EXPECT_NEAR(rbox_iou(RBoxd{0, 0, 1, 1, 0}, RBoxd{0.5, 0, 1, 1, 0}), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(rbox_iou(RBoxd{0, 0, 4, 1, 0}, RBoxd{0, 0, 4, 1, kPi / 2}), 1.0 / 7.0, 1e-12);
  EXPECT_EQ(rbox_iou(RBoxd{0, 0, 1, 1, 0}, RBoxd{10, 0, 1, 1, 0.4}), 0.0);
}

TEST(RboxIou, CrossShapeAgreesWithMonteCarlo) {
  std::mt19937_64 g(5);
  const RBoxd a{0, 0, 4, 1, 0};
  const RBoxd b{0, 0, 4, 1, kPi / 2};
  EXPECT_NEAR(testing_support::monte_carlo_iou(a, b, g), 1.0 / 7.0, 0.003);
}

TEST(RboxIou, AgreesWithMonteCarloOnRandomPairs) {
  std::mt19937_64 g(17);
  for (int n = 0; n < 20; ++n) {
    const RBoxd a = testing_support::random_box(g, 40, 60, 5, 40);
    const RBoxd b = testing_support::random_box(g, 40, 60, 5, 40);
    EXPECT_NEAR(rbox_iou(a, b), testing_support::monte_carlo_iou(a, b, g, 400), 0.01) << n;
  }
}

TEST(RboxIou, SymmetryRangeAndAngleInvariance) {
  std::mt19937_64 g(23);
  for (int n = 0; n < 500; ++n) {
    const RBoxd a = testing_support::random_box(g, 40, 60);
    const RBoxd b = testing_support::random_box(g, 40, 60);
    const double iou = rbox_iou(a, b);
    EXPECT_GE(iou, 0.0);
    EXPECT_LE(iou, 1.0);
    EXPECT_EQ(iou, rbox_iou(b, a));
    RBoxd a_turned = a;
    a_turned.theta += kPi;
    EXPECT_NEAR(rbox_iou(a_turned, b), iou, 1e-9);
    // (w, h, theta) and (h, w, theta + pi/2) describe the same rectangle.
    const RBoxd a_swapped{a.cx, a.cy, a.h, a.w, a.theta + kPi / 2};
    EXPECT_NEAR(rbox_iou(a_swapped, b), iou, 1e-9);
    // Rigid motion of both boxes leaves IoU unchanged.
    const RBoxd as{a.cx + 13, a.cy - 7, a.w, a.h, a.theta};
    const RBoxd bs{b.cx + 13, b.cy - 7, b.w, b.h, b.theta};
    EXPECT_NEAR(rbox_iou(as, bs), iou, 1e-9);
  }
}

TEST(RboxIou, NestedBoxes) {
  const RBoxd outer{0, 0, 10, 10, 0.2};
  const RBoxd inner{0, 0, 2, 3, 0.2};
  EXPECT_NEAR(rbox_iou(outer, inner), 6.0 / 100.0, 1e-12);
}

TEST(RboxIou, RejectsInvalidBoxes) {
  EXPECT_THROW(rbox_iou(RBoxd{0, 0, 0, 1, 0}, RBoxd{0, 0, 1, 1, 0}), std::invalid_argument);
  EXPECT_THROW(rbox_iou(RBoxd{0, 0, 1, -1, 0}, RBoxd{0, 0, 1, 1, 0}), std::invalid_argument);
  EXPECT_THROW(rbox_iou(RBoxd{std::nan(""), 0, 1, 1, 0}, RBoxd{0, 0, 1, 1, 0}), std::invalid_argument);
}

TEST(HboxIou, Examples) {
  const HBoxd a{0, 0, 2, 2};
  EXPECT_EQ(hbox_iou(a, a), 1.0);
  EXPECT_EQ(hbox_iou(a, HBoxd{5, 5, 6, 6}), 0.0);
  EXPECT_NEAR(hbox_iou(a, HBoxd{1, 1, 3, 3}), 1.0 / 7.0, 1e-15);
}

TEST(HboxIou, MatchesRboxIouAtZeroAngle) {
  std::mt19937_64 g(29);
  for (int n = 0; n < 200; ++n) {
    RBoxd a = testing_support::random_box(g, 40, 60);
    RBoxd b = testing_support::random_box(g, 40, 60);
    a.theta = b.theta = 0;
    EXPECT_NEAR(hbox_iou(rbox_to_hbox(a), rbox_to_hbox(b)), rbox_iou(a, b), 1e-12);
  }
}

TEST(RboxToHbox, Examples) {
  const HBoxd h = rbox_to_hbox(RBoxd{5, 6, 4, 2, 0});
  EXPECT_DOUBLE_EQ(h.xmin, 3);
  EXPECT_DOUBLE_EQ(h.ymin, 5);
  EXPECT_DOUBLE_EQ(h.xmax, 7);
  EXPECT_DOUBLE_EQ(h.ymax, 7);
  const HBoxd d = rbox_to_hbox(RBoxd{0, 0, 2, 2, kPi / 4});
  EXPECT_NEAR(d.xmin, -std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(d.ymax, std::sqrt(2.0), 1e-12);
  const HBoxd t = rbox_to_hbox(RBoxd{0, 0, 4, 2, kPi / 6});
  EXPECT_NEAR(t.xmax, std::sqrt(3.0) + 0.5, 1e-12);
  EXPECT_NEAR(t.ymax, 1 + std::sqrt(3.0) / 2, 1e-12);
}

TEST(RboxToHbox, IsTightHullOfCorners) {
  std::mt19937_64 g(31);
  for (int n = 0; n < 300; ++n) {
    const RBoxd b = testing_support::random_box(g);
    const HBoxd h = rbox_to_hbox(b);
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (const auto& c : rbox_corners(b)) {
      x0 = std::min(x0, c.x());
      y0 = std::min(y0, c.y());
      x1 = std::max(x1, c.x());
      y1 = std::max(y1, c.y());
    }
    EXPECT_NEAR(h.xmin, x0, 1e-9);
    EXPECT_NEAR(h.ymin, y0, 1e-9);
    EXPECT_NEAR(h.xmax, x1, 1e-9);
    EXPECT_NEAR(h.ymax, y1, 1e-9);
    EXPECT_GE(h.area(), b.area() * (1 - 1e-12));
  }
}

TEST(HboxToRbox, RoundTrip) {
  const HBoxd h{1, 2, 5, 8};
  const RBoxd r = hbox_to_rbox(h);
  EXPECT_EQ(r.theta, 0.0);
  const HBoxd back = rbox_to_hbox(r);
  EXPECT_DOUBLE_EQ(back.xmin, 1);
  EXPECT_DOUBLE_EQ(back.ymin, 2);
  EXPECT_DOUBLE_EQ(back.xmax, 5);
  EXPECT_DOUBLE_EQ(back.ymax, 8);
}

TEST(PointInRbox, Examples) {
  const RBoxd b{0, 0, 2, 2, 0};
  EXPECT_TRUE(point_in_rbox(Point2d{0, 0}, b));
  EXPECT_TRUE(point_in_rbox(Point2d{1, 1}, b));
  EXPECT_FALSE(point_in_rbox(Point2d{1.1, 0}, b));
  const RBoxd r{3, 3, 6, 1, 0.7};
  for (const auto& c : rbox_corners(r)) EXPECT_TRUE(point_in_rbox(c, r));
}

TEST(PointInRbox, AgreesWithProjectionOracle) {
  std::mt19937_64 g(37);
  for (int n = 0; n < 2000; ++n) {
    const RBoxd b = testing_support::random_box(g, 0, 10, 1, 8);
    const Point2d p{testing_support::uniform(g, -5, 15), testing_support::uniform(g, -5, 15)};
    EXPECT_EQ(point_in_rbox(p, b), testing_support::inside(p.x(), p.y(), b));
  }
}

TEST(CenterDistance, Examples) {
  EXPECT_EQ(center_distance(RBoxd{1, 2, 1, 1, 0}, RBoxd{1, 2, 3, 3, 1}), 0.0);
  EXPECT_DOUBLE_EQ(center_distance(RBoxd{0, 0, 1, 1, 0}, RBoxd{3, 4, 1, 1, 0}), 5.0);
  EXPECT_DOUBLE_EQ(center_distance(RBoxd{1, 1, 1, 1, 0}, RBoxd{2, 3, 1, 1, 0}), std::sqrt(5.0));
}

TEST(Templated, FloatScalarWorks) {
  const RBox<float> a{0, 0, 1, 1, 0};
  const RBox<float> b{0.5f, 0, 1, 1, 0};
  EXPECT_NEAR(rbox_iou(a, b), 1.0f / 3.0f, 1e-6f);
}

TEST(HboxIou, AdjacentDiagonalStripsAreAmbiguous) {
  // Parallel 45 degree strips separated by a 1 px gap: hulls overlap heavily, boxes not at all.
  const RBoxd a{100, 100, 100, 4, kPi / 4};
  const RBoxd b{100 - 5 * std::sin(kPi / 4), 100 + 5 * std::cos(kPi / 4), 100, 4, kPi / 4};
  EXPECT_GE(hbox_iou(rbox_to_hbox(a), rbox_to_hbox(b)), 0.33);
  EXPECT_LE(rbox_iou(a, b), 0.01);
  std::mt19937_64 g(3);
  EXPECT_LE(testing_support::monte_carlo_iou(a, b, g, 400), 0.01);
}
