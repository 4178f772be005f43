// Rotated / axis-aligned rectangle algebra.
//
// Frame: image pixels, x to the right, y downward. An RBox angle is measured
// from the image x-axis to the box's w-edge and is kept in [-pi/2, pi/2).
// Polygons are stored with positive shoelace area ("CCW" in the x-right /
// y-up reading of the same numbers).
#ifndef RBOXGEO_GEOMETRY_HPP
#define RBOXGEO_GEOMETRY_HPP

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace rboxgeo {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

template <typename Scalar>
using ConvexPolygon = std::vector<Point2<Scalar>>;

/// Clipped intersections below this area (px^2) are reported as empty.
inline constexpr double kAreaEps = 1e-9;
/// Vertex merge / collinearity tolerance (px) used while clipping.
inline constexpr double kCollinearEps = 1e-9;
/// Slack (px) on the boundary-inclusive containment test.
inline constexpr double kContainEps = 1e-9;

template <typename Scalar>
struct RBox {
  Scalar cx{0};
  Scalar cy{0};
  Scalar w{1};
  Scalar h{1};
  Scalar theta{0};

  Point2<Scalar> center() const { return {cx, cy}; }
  Scalar area() const { return w * h; }
  bool operator==(const RBox&) const = default;
};

template <typename Scalar>
struct HBox {
  Scalar xmin{0};
  Scalar ymin{0};
  Scalar xmax{1};
  Scalar ymax{1};

  Scalar width() const { return xmax - xmin; }
  Scalar height() const { return ymax - ymin; }
  Scalar area() const { return width() * height(); }
  Point2<Scalar> center() const { return {(xmin + xmax) / 2, (ymin + ymax) / 2}; }
  bool operator==(const HBox&) const = default;
};

using RBoxd = RBox<double>;
using HBoxd = HBox<double>;
using Point2d = Point2<double>;
using Polygond = ConvexPolygon<double>;

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

template <typename Scalar>
bool is_valid(const RBox<Scalar>& b) {
  using std::isfinite;
  return isfinite(b.cx) && isfinite(b.cy) && isfinite(b.w) && isfinite(b.h) &&
         isfinite(b.theta) && b.w > 0 && b.h > 0;
}

template <typename Scalar>
bool is_valid(const HBox<Scalar>& b) {
  using std::isfinite;
  return isfinite(b.xmin) && isfinite(b.ymin) && isfinite(b.xmax) &&
         isfinite(b.ymax) && b.xmax > b.xmin && b.ymax > b.ymin;
}

template <typename Box>
void require_valid(const Box& b, const char* what) {
  if (!is_valid(b)) throw std::invalid_argument(std::string(what) + ": invalid box");
}

// ---------------------------------------------------------------------------
// Angles
// ---------------------------------------------------------------------------

/// Maps theta onto [-pi/2, pi/2), preserving it modulo pi.
template <typename Scalar>
Scalar normalize_angle(Scalar theta) {
  if (!std::isfinite(theta)) throw std::invalid_argument("normalize_angle: non-finite angle");
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  constexpr Scalar half = pi / 2;
  Scalar r = theta - pi * std::floor((theta + half) / pi);
  if (r >= half) r -= pi;
  if (r < -half) r += pi;
  return r;
}

template <typename Scalar>
RBox<Scalar> normalized(RBox<Scalar> b) {
  b.theta = normalize_angle(b.theta);
  return b;
}

// ---------------------------------------------------------------------------
// Polygons
// ---------------------------------------------------------------------------

template <typename Scalar>
Scalar cross2(const Point2<Scalar>& a, const Point2<Scalar>& b) {
  return a.x() * b.y() - a.y() * b.x();
}

template <typename Scalar>
Scalar signed_area(const ConvexPolygon<Scalar>& p) {
  const std::size_t n = p.size();
  if (n < 3) return Scalar(0);
  Scalar acc(0);
  for (std::size_t i = 0; i < n; ++i) acc += cross2(p[i], p[(i + 1) % n]);
  return acc / 2;
}

template <typename Scalar>
Scalar polygon_area(const ConvexPolygon<Scalar>& p) {
  return std::abs(signed_area(p));
}

/// Corners in the order (-w/2,-h/2), (w/2,-h/2), (w/2,h/2), (-w/2,h/2) of the
/// box frame; positive shoelace area.
template <typename Scalar>
ConvexPolygon<Scalar> rbox_corners(const RBox<Scalar>& b) {
  const Scalar c = std::cos(b.theta);
  const Scalar s = std::sin(b.theta);
  const Scalar hw = b.w / 2;
  const Scalar hh = b.h / 2;
  constexpr std::array<std::array<int, 2>, 4> signs{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
  ConvexPolygon<Scalar> out;
  out.reserve(4);
  for (const auto& sg : signs) {
    const Scalar lx = sg[0] * hw;
    const Scalar ly = sg[1] * hh;
    out.emplace_back(b.cx + c * lx - s * ly, b.cy + s * lx + c * ly);
  }
  return out;
}

template <typename Scalar>
ConvexPolygon<Scalar> hbox_corners(const HBox<Scalar>& b) {
  return {{b.xmin, b.ymin}, {b.xmax, b.ymin}, {b.xmax, b.ymax}, {b.xmin, b.ymax}};
}

namespace detail {

// Merges near-duplicate neighbours and drops vertices lying on the segment
// joining their neighbours.
template <typename Scalar>
void simplify(ConvexPolygon<Scalar>& p) {
  const Scalar tol(kCollinearEps);
  bool changed = true;
  while (changed && p.size() >= 3) {
    changed = false;
    const std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& prev = p[(i + n - 1) % n];
      const auto& cur = p[i];
      const auto& next = p[(i + 1) % n];
      const Point2<Scalar> base = next - prev;
      const Scalar len = base.norm();
      const bool duplicate = (cur - prev).norm() <= tol;
      const bool collinear =
          len > tol ? std::abs(cross2<Scalar>(base, cur - prev)) / len <= tol : true;
      if (duplicate || collinear) {
        p.erase(p.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  if (p.size() < 3) p.clear();
}

}  // namespace detail

/// Sutherland-Hodgman clip of one convex polygon by another.
template <typename Scalar>
ConvexPolygon<Scalar> convex_intersect(ConvexPolygon<Scalar> subject, ConvexPolygon<Scalar> clip) {
  if (subject.size() < 3 || clip.size() < 3) return {};
  if (signed_area(subject) < 0) std::reverse(subject.begin(), subject.end());
  if (signed_area(clip) < 0) std::reverse(clip.begin(), clip.end());

  const Scalar tol(kCollinearEps);
  ConvexPolygon<Scalar> input;
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !subject.empty(); ++e) {
    const Point2<Scalar>& a = clip[e];
    const Point2<Scalar> edge = clip[(e + 1) % m] - a;
    const Scalar len = edge.norm();
    if (len <= tol) continue;
    input.swap(subject);
    subject.clear();
    const std::size_t n = input.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Point2<Scalar>& cur = input[k];
      const Point2<Scalar>& nxt = input[(k + 1) % n];
      // Signed distance to the edge line; the interior is on the left.
      const Scalar dc = cross2<Scalar>(edge, cur - a) / len;
      const Scalar dn = cross2<Scalar>(edge, nxt - a) / len;
      const bool cur_in = dc >= -tol;
      const bool nxt_in = dn >= -tol;
      if (cur_in && nxt_in) {
        subject.push_back(nxt);
      } else if (cur_in != nxt_in) {
        const Scalar t = std::clamp<Scalar>(dc / (dc - dn), Scalar(0), Scalar(1));
        subject.push_back(cur + t * (nxt - cur));
        if (nxt_in) subject.push_back(nxt);
      }
    }
  }
  detail::simplify(subject);
  if (polygon_area(subject) < Scalar(kAreaEps)) return {};
  return subject;
}

// ---------------------------------------------------------------------------
// Boxes
// ---------------------------------------------------------------------------

template <typename Scalar>
HBox<Scalar> rbox_to_hbox(const RBox<Scalar>& b) {
  const Scalar c = std::abs(std::cos(b.theta));
  const Scalar s = std::abs(std::sin(b.theta));
  const Scalar ex = c * b.w / 2 + s * b.h / 2;
  const Scalar ey = s * b.w / 2 + c * b.h / 2;
  return {b.cx - ex, b.cy - ey, b.cx + ex, b.cy + ey};
}

template <typename Scalar>
RBox<Scalar> hbox_to_rbox(const HBox<Scalar>& b) {
  const auto c = b.center();
  return {c.x(), c.y(), b.width(), b.height(), Scalar(0)};
}

/// Point expressed in the box frame (origin at the centre, x along w).
template <typename Scalar>
Point2<Scalar> to_box_frame(const Point2<Scalar>& p, const RBox<Scalar>& b) {
  const Scalar c = std::cos(b.theta);
  const Scalar s = std::sin(b.theta);
  const Scalar dx = p.x() - b.cx;
  const Scalar dy = p.y() - b.cy;
  return {c * dx + s * dy, -s * dx + c * dy};
}

/// Boundary-inclusive containment.
template <typename Scalar>
bool point_in_rbox(const Point2<Scalar>& p, const RBox<Scalar>& b) {
  const Point2<Scalar> q = to_box_frame(p, b);
  const Scalar tol(kContainEps);
  return std::abs(q.x()) <= b.w / 2 + tol && std::abs(q.y()) <= b.h / 2 + tol;
}

template <typename Scalar>
Scalar center_distance(const RBox<Scalar>& a, const RBox<Scalar>& b) {
  return std::hypot(a.cx - b.cx, a.cy - b.cy);
}

template <typename Scalar>
Scalar hbox_iou(const HBox<Scalar>& a, const HBox<Scalar>& b) {
  const Scalar iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const Scalar ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (iw <= 0 || ih <= 0) return Scalar(0);
  const Scalar inter = iw * ih;
  return std::clamp<Scalar>(inter / (a.area() + b.area() - inter), Scalar(0), Scalar(1));
}

template <typename Scalar>
Scalar rbox_intersection_area(const RBox<Scalar>& a, const RBox<Scalar>& b) {
  // Clip in a frame centred on `a` so the result does not depend on where the
  // pair sits in the image.
  const RBox<Scalar> la{Scalar(0), Scalar(0), a.w, a.h, a.theta};
  const RBox<Scalar> lb{b.cx - a.cx, b.cy - a.cy, b.w, b.h, b.theta};
  return polygon_area(convex_intersect(rbox_corners(la), rbox_corners(lb)));
}

template <typename Scalar>
Scalar rbox_iou(const RBox<Scalar>& a, const RBox<Scalar>& b) {
  require_valid(a, "rbox_iou");
  require_valid(b, "rbox_iou");
  if (a == b) return Scalar(1);
  const Scalar reach = std::hypot(a.w, a.h) / 2 + std::hypot(b.w, b.h) / 2;
  if (center_distance(a, b) >= reach) return Scalar(0);
  // Canonical argument order makes the result exactly symmetric.
  const auto key = [](const RBox<Scalar>& r) {
    return std::array<Scalar, 5>{r.cx, r.cy, r.w, r.h, r.theta};
  };
  const bool swap = key(b) < key(a);
  const Scalar inter = swap ? rbox_intersection_area(b, a) : rbox_intersection_area(a, b);
  const Scalar uni = a.area() + b.area() - inter;
  if (uni <= 0) return Scalar(0);
  return std::clamp<Scalar>(inter / uni, Scalar(0), Scalar(1));
}

}  // namespace rboxgeo

#endif  // RBOXGEO_GEOMETRY_HPP
