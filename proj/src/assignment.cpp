#include "rboxgeo/assignment.hpp"

#include "rboxgeo/mcp.hpp"

#include <cmath>
#include <stdexcept>

namespace rboxgeo {

std::vector<LevelShape> pyramid_shapes(int image_h, int image_w) {
  if (image_h < 1 || image_w < 1) throw std::invalid_argument("pyramid_shapes: empty image");
  std::vector<LevelShape> out;
  for (int k = kFirstLevel; k <= kLastLevel; ++k) {
    const auto [h, w] = level_size(image_h, image_w, k);
    out.push_back({k, h, w});
  }
  return out;
}

ScaleRanges ScaleRanges::fcos_default() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {{{0, 64}, {64, 128}, {128, 256}, {256, 512}, {512, inf}}};
}

ScaleRanges ScaleRanges::containment(int levels) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {std::vector<std::pair<double, double>>(static_cast<std::size_t>(levels), {0.0, inf})};
}

Point2d feature_to_image(int i, int j, int stride) {
  const int half = stride / 2;
  return {static_cast<double>(half + j * stride), static_cast<double>(half + i * stride)};
}

BoxOffsets box_frame_offsets(const Point2d& p, const RBoxd& box) {
  if (!is_valid(box)) throw std::invalid_argument("box_frame_offsets: invalid box");
  const RBoxd b = normalized(box);
  if (!point_in_rbox(p, b)) throw std::invalid_argument("box_frame_offsets: point outside box");
  const Point2d q = to_box_frame(p, b);
  // Clamp the containment slack so offsets stay non-negative.
  const double x = std::clamp(q.x(), -b.w / 2, b.w / 2);
  const double y = std::clamp(q.y(), -b.h / 2, b.h / 2);
  return {b.w / 2 + x, b.h / 2 + y, b.w / 2 - x, b.h / 2 - y, b.theta};
}

double centerness(double l, double t, double r, double b) {
  for (double v : {l, t, r, b})
    if (!std::isfinite(v) || v < 0) throw std::invalid_argument("centerness: offsets must be finite and >= 0");
  if (l + r <= 0 || t + b <= 0) throw std::invalid_argument("centerness: degenerate extent");
  const double lr = std::min(l, r) / std::max(l, r);
  const double tb = std::min(t, b) / std::max(t, b);
  return std::sqrt(lr * tb);
}

std::vector<LocationTarget> assign_rbox_targets(std::span<const LevelShape> shapes,
                                                std::span<const RBoxd> gts,
                                                const ScaleRanges& ranges) {
  if (ranges.bounds.size() < shapes.size())
    throw std::invalid_argument("assign_rbox_targets: fewer scale ranges than levels");
  std::vector<RBoxd> boxes;
  boxes.reserve(gts.size());
  for (const auto& g : gts) {
    require_valid(g, "assign_rbox_targets");
    boxes.push_back(normalized(g));
  }

  std::vector<LocationTarget> out;
  for (std::size_t n = 0; n < shapes.size(); ++n) {
    const LevelShape& shape = shapes[n];
    const auto [lo, hi] = ranges.bounds[n];
    for (int i = 0; i < shape.h; ++i) {
      for (int j = 0; j < shape.w; ++j) {
        LocationTarget tgt;
        tgt.k = shape.k;
        tgt.i = i;
        tgt.j = j;
        tgt.image_point = feature_to_image(i, j, shape.stride());
        double best_area = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < boxes.size(); ++g) {
          if (!point_in_rbox(tgt.image_point, boxes[g])) continue;
          const BoxOffsets off = box_frame_offsets(tgt.image_point, boxes[g]);
          const double m = off.max_extent();
          if (m < lo || m > hi) continue;
          if (boxes[g].area() < best_area) {
            best_area = boxes[g].area();
            tgt.label = SampleLabel::positive;
            tgt.regression = off;
            tgt.gt_index = static_cast<int>(g);
          }
        }
        if (tgt.label == SampleLabel::positive) tgt.centerness = centerness(tgt.regression);
        out.push_back(tgt);
      }
    }
  }
  return out;
}

std::vector<LocationTarget> assign_rbox_targets(std::span<const LevelShape> shapes,
                                                const RBoxd& gt, const ScaleRanges& ranges) {
  return assign_rbox_targets(shapes, std::span<const RBoxd>(&gt, 1), ranges);
}

std::vector<HBoxd> make_anchors(std::span<const LevelShape> shapes, double scale) {
  std::vector<HBoxd> out;
  for (const auto& s : shapes) {
    const double half = scale * s.stride() / 2;
    for (int i = 0; i < s.h; ++i) {
      for (int j = 0; j < s.w; ++j) {
        const Point2d c = feature_to_image(i, j, s.stride());
        out.push_back({c.x() - half, c.y() - half, c.x() + half, c.y() + half});
      }
    }
  }
  return out;
}

Eigen::Vector4d encode_hbox_deltas(const HBoxd& anchor, const HBoxd& gt) {
  require_valid(anchor, "encode_hbox_deltas");
  require_valid(gt, "encode_hbox_deltas");
  const Point2d ac = anchor.center();
  const Point2d gc = gt.center();
  return {(gc.x() - ac.x()) / anchor.width(), (gc.y() - ac.y()) / anchor.height(),
          std::log(gt.width() / anchor.width()), std::log(gt.height() / anchor.height())};
}

std::vector<AnchorTarget> assign_hbox_targets(std::span<const HBoxd> anchors, const HBoxd& gt,
                                              double pos_thr, double neg_thr) {
  if (!(neg_thr >= 0 && neg_thr <= pos_thr && pos_thr <= 1))
    throw std::invalid_argument("assign_hbox_targets: need 0 <= neg_thr <= pos_thr <= 1");
  require_valid(gt, "assign_hbox_targets");
  std::vector<AnchorTarget> out;
  out.reserve(anchors.size());
  for (const auto& a : anchors) {
    AnchorTarget t;
    t.iou = hbox_iou(a, gt);
    if (t.iou >= pos_thr) {
      t.label = SampleLabel::positive;
      t.deltas = encode_hbox_deltas(a, gt);
    } else if (t.iou < neg_thr) {
      t.label = SampleLabel::negative;
    } else {
      t.label = SampleLabel::ignored;
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace rboxgeo
