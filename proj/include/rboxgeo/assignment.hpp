// Anchor-free rotated target assignment over the pyramid, and the IoU-based
// anchor assignment used by the horizontal head.
#ifndef RBOXGEO_ASSIGNMENT_HPP
#define RBOXGEO_ASSIGNMENT_HPP

#include "rboxgeo/geometry.hpp"

#include <Eigen/Core>

#include <algorithm>

#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace rboxgeo {

struct LevelShape {
  int k{3};
  int h{1};
  int w{1};
  int stride() const { return 1 << k; }
};

/// Shapes of levels 3..7 for an image_h x image_w input.
std::vector<LevelShape> pyramid_shapes(int image_h, int image_w);

/// Box-frame distances from a location to the four edges, plus the box angle.
struct BoxOffsets {
  double l{0};
  double t{0};
  double r{0};
  double b{0};
  double theta{0};
  double max_extent() const { return std::max(std::max(l, t), std::max(r, b)); }
};

enum class SampleLabel { negative, positive, ignored };

struct LocationTarget {
  int k{3};
  int i{0};
  int j{0};
  Point2d image_point{0, 0};
  SampleLabel label{SampleLabel::negative};
  double centerness{0};    // positives only
  BoxOffsets regression;   // positives only
  int gt_index{-1};        // positives only
};

/// Per-level inclusive bounds on max(l, t, r, b).
struct ScaleRanges {
  std::vector<std::pair<double, double>> bounds;

  /// (0,64), (64,128), (128,256), (256,512), (512,inf).
  static ScaleRanges fcos_default();
  /// (0,inf) on every level: pure containment.
  static ScaleRanges containment(int levels = 5);
};

/// Image point of feature location (i, j): y = floor(s/2) + i*s, x = floor(s/2) + j*s.
Point2d feature_to_image(int i, int j, int stride);

/// Throws std::invalid_argument when p lies outside b.
BoxOffsets box_frame_offsets(const Point2d& p, const RBoxd& b);

double centerness(double l, double t, double r, double b);
inline double centerness(const BoxOffsets& o) { return centerness(o.l, o.t, o.r, o.b); }

/// One target per location, level-major then row-major. A location inside
/// several boxes takes the smallest one that passes the range filter.
std::vector<LocationTarget> assign_rbox_targets(std::span<const LevelShape> shapes,
                                                std::span<const RBoxd> gts,
                                                const ScaleRanges& ranges);
std::vector<LocationTarget> assign_rbox_targets(std::span<const LevelShape> shapes,
                                                const RBoxd& gt, const ScaleRanges& ranges);

// -- horizontal head ---------------------------------------------------------

/// One square anchor of side scale*s per location, same order as the targets.
std::vector<HBoxd> make_anchors(std::span<const LevelShape> shapes, double scale = 4.0);

/// (dx, dy, dw, dh): centre delta over anchor size, log size ratio.
Eigen::Vector4d encode_hbox_deltas(const HBoxd& anchor, const HBoxd& gt);

struct AnchorTarget {
  SampleLabel label{SampleLabel::negative};
  double iou{0};
  Eigen::Vector4d deltas{Eigen::Vector4d::Zero()};  // positives only
};

std::vector<AnchorTarget> assign_hbox_targets(std::span<const HBoxd> anchors, const HBoxd& gt,
                                              double pos_thr = 0.5, double neg_thr = 0.4);

}  // namespace rboxgeo

#endif  // RBOXGEO_ASSIGNMENT_HPP
