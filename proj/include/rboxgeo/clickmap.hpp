// Click representation map: a proximity channel stacked onto the query image.
#ifndef RBOXGEO_CLICKMAP_HPP
#define RBOXGEO_CLICKMAP_HPP

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace rboxgeo {

struct ImagePlane {
  int h{1};
  int w{1};
};

/// Click location in query-image pixels (x = column, y = row).
template <typename Scalar>
struct ClickPoint {
  Scalar x{0};
  Scalar y{0};
};

/// Rows index image rows (i), columns index image columns (j).
template <typename Scalar>
using ScalarMap = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// A C x h x w grid stored as one h x w matrix per channel.
template <typename Scalar>
using ChannelStack = std::vector<ScalarMap<Scalar>>;

template <typename Scalar>
bool click_in_plane(const ImagePlane& plane, const ClickPoint<Scalar>& pc) {
  return std::isfinite(pc.x) && std::isfinite(pc.y) && pc.x >= 0 && pc.y >= 0 &&
         pc.x < Scalar(plane.w) && pc.y < Scalar(plane.h);
}

/// P(i,j) = (1 - |z(i,j) - pc| / sqrt(h^2 + w^2))^2 with z(i,j) = (x=j, y=i).
template <typename Scalar>
ScalarMap<Scalar> make_click_map(const ImagePlane& plane, const ClickPoint<Scalar>& pc) {
  if (plane.h < 1 || plane.w < 1) throw std::invalid_argument("make_click_map: empty plane");
  if (!click_in_plane(plane, pc)) throw std::invalid_argument("make_click_map: click outside image");
  const Scalar diag = std::sqrt(Scalar(plane.h) * plane.h + Scalar(plane.w) * plane.w);
  ScalarMap<Scalar> map(plane.h, plane.w);
  for (Eigen::Index j = 0; j < map.cols(); ++j) {
    for (Eigen::Index i = 0; i < map.rows(); ++i) {
      const Scalar d = std::hypot(Scalar(j) - pc.x, Scalar(i) - pc.y);
      const Scalar v = Scalar(1) - d / diag;
      map(i, j) = v * v;
    }
  }
  return map;
}

template <typename Scalar>
ChannelStack<Scalar> attach_click_channel(const ChannelStack<Scalar>& image, const ScalarMap<Scalar>& map) {
  if (image.size() != 3) throw std::invalid_argument("attach_click_channel: expected 3 image channels");
  for (const auto& ch : image) {
    if (ch.rows() != map.rows() || ch.cols() != map.cols())
      throw std::invalid_argument("attach_click_channel: spatial shape mismatch");
  }
  ChannelStack<Scalar> out = image;
  out.push_back(map);
  return out;
}

}  // namespace rboxgeo

#endif  // RBOXGEO_CLICKMAP_HPP
