#include "rboxgeo/eval.hpp"

#include "rboxgeo/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace rboxgeo {

const char* to_string(Criterion c) { return c == Criterion::rbox ? "rbox" : "hbox"; }

Criterion parse_criterion(const std::string& s) {
  if (s == "rbox") return Criterion::rbox;
  if (s == "hbox") return Criterion::hbox;
  throw std::invalid_argument("unknown criterion: " + s);
}

double criterion_iou(const RBoxd& a, const RBoxd& b, Criterion c) {
  if (c == Criterion::rbox) return rbox_iou(a, b);
  return hbox_iou(rbox_to_hbox(a), rbox_to_hbox(b));
}

double acc_at(std::span<const BoxPair> pairs, double t, Criterion c) {
  if (pairs.empty()) throw UndefinedMetric("acc_at: no pairs");
  if (!(t > 0 && t <= 1)) throw std::invalid_argument("acc_at: threshold outside (0,1]");
  std::size_t hits = 0;
  for (const auto& p : pairs)
    if (criterion_iou(p.pred, p.gt, c) >= t) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

GapReport criterion_gap(std::span<const BoxPair> pairs, double t) {
  GapReport r;
  r.acc_hbox = acc_at(pairs, t, Criterion::hbox);
  r.acc_rbox = acc_at(pairs, t, Criterion::rbox);
  r.gap = r.acc_hbox - r.acc_rbox;
  r.n = pairs.size();
  return r;
}

namespace {

struct MaskMoments {
  double count{0};
  double sum_x{0};
  double sum_y{0};
  int xmin{0}, xmax{-1}, ymin{0}, ymax{-1};

  explicit MaskMoments(const BinaryMask& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (!m(i, j)) continue;
        const int x = static_cast<int>(j);
        const int y = static_cast<int>(i);
        if (count == 0) {
          xmin = xmax = x;
          ymin = ymax = y;
        }
        count += 1;
        sum_x += x;
        sum_y += y;
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
  }

  Point2d centroid(CentroidMode mode) const {
    if (mode == CentroidMode::pixel_mean) return {sum_x / count, sum_y / count};
    return {(xmin + xmax) / 2.0, (ymin + ymax) / 2.0};
  }
};

}  // namespace

MaskPairMetrics mask_pair_metrics(const BinaryMask& pred, const BinaryMask& gt, CentroidMode mode) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
    throw std::invalid_argument("mask_pair_metrics: mask shapes differ");
  const auto a = (pred != 0);
  const auto b = (gt != 0);
  const double inter = static_cast<double>((a && b).count());
  const double uni = static_cast<double>((a || b).count());
  const MaskMoments mp(pred);
  const MaskMoments mg(gt);

  MaskPairMetrics out;
  if (uni == 0) {
    out.iou = 1.0;
    out.dice = 1.0;
  } else {
    out.iou = inter / uni;
    out.dice = 2 * inter / (mp.count + mg.count);
  }
  out.area_error_px = std::abs(mp.count - mg.count);
  if (mp.count > 0 && mg.count > 0) {
    out.centers_defined = true;
    out.center_error_px = (mp.centroid(mode) - mg.centroid(mode)).norm();
  }
  return out;
}

MaskMetrics mask_metrics(std::span<const MaskPair> pairs, const GsdConfig& gsd, CentroidMode mode) {
  if (pairs.empty()) throw UndefinedMetric("mask_metrics: no pairs");
  if (!(gsd.meters_per_pixel > 0) || !std::isfinite(gsd.meters_per_pixel))
    throw std::invalid_argument("mask_metrics: ground sample distance must be positive");
  std::vector<double> ious, dices, areas, centers;
  for (const auto& p : pairs) {
    const MaskPairMetrics m = mask_pair_metrics(p.pred, p.gt, mode);
    ious.push_back(m.iou);
    dices.push_back(m.dice);
    areas.push_back(m.area_error_px);
    if (m.centers_defined) centers.push_back(m.center_error_px);
  }
  const double g = gsd.meters_per_pixel;
  MaskMetrics out;
  out.n = pairs.size();
  out.n_centered = centers.size();
  out.miou = pairwise_mean(ious);
  out.mdice = pairwise_mean(dices);
  out.aae = pairwise_mean(areas) * g * g;
  out.me = pairwise_mean(centers) * g;
  return out;
}

BinaryMask rasterize_rbox(const RBoxd& b, int h, int w) {
  if (h < 1 || w < 1) throw std::invalid_argument("rasterize_rbox: empty raster");
  BinaryMask m = BinaryMask::Zero(h, w);
  const HBoxd hull = rbox_to_hbox(b);
  const int i0 = std::max(0, static_cast<int>(std::floor(hull.ymin)));
  const int i1 = std::min(h - 1, static_cast<int>(std::ceil(hull.ymax)));
  const int j0 = std::max(0, static_cast<int>(std::floor(hull.xmin)));
  const int j1 = std::min(w - 1, static_cast<int>(std::ceil(hull.xmax)));
  for (int i = i0; i <= i1; ++i)
    for (int j = j0; j <= j1; ++j)
      if (point_in_rbox(Point2d(j, i), b)) m(i, j) = 1;
  return m;
}

RotationStats rotation_stats(std::span<const RBoxd> annotations, double rot_thr_deg) {
  if (annotations.empty()) throw UndefinedMetric("rotation_stats: no annotations");
  RotationStats out;
  out.n = annotations.size();
  std::size_t rotated = 0;
  constexpr double bin_width = 90.0 / kRotationBins;
  for (const auto& b : annotations) {
    const double deg = std::abs(normalize_angle(b.theta)) * 180.0 / std::numbers::pi;
    if (deg > rot_thr_deg) ++rotated;
    const int bin = std::min(kRotationBins - 1, static_cast<int>(deg / bin_width));
    ++out.histogram[static_cast<std::size_t>(bin)];
  }
  out.fraction_rotated = static_cast<double>(rotated) / static_cast<double>(out.n);
  return out;
}

EvalReport evaluate_boxes(std::span<const BoxPair> pairs, Criterion c) {
  EvalReport r;
  r.n = pairs.size();
  r.acc25 = acc_at(pairs, 0.25, c);
  r.acc50 = acc_at(pairs, 0.50, c);
  r.acc75 = acc_at(pairs, 0.75, c);
  return r;
}

}  // namespace rboxgeo
