// Benchmark metrics: Acc@t under rotated or horizontal IoU, mask metrics with
// ground-sample-distance conversion, rotation statistics and the HBox/RBox
// criterion gap.
#ifndef RBOXGEO_EVAL_HPP
#define RBOXGEO_EVAL_HPP

#include "rboxgeo/geometry.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

namespace rboxgeo {

/// A metric asked for over an empty set.
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class Criterion { rbox, hbox };

const char* to_string(Criterion c);
Criterion parse_criterion(const std::string& s);

struct BoxPair {
  RBoxd pred;
  RBoxd gt;
};

/// Rotated IoU, or IoU of the axis-aligned hulls.
double criterion_iou(const RBoxd& a, const RBoxd& b, Criterion c);

/// Fraction of pairs with IoU >= t, t in (0, 1].
double acc_at(std::span<const BoxPair> pairs, double t, Criterion c);

struct GapReport {
  double acc_hbox{0};
  double acc_rbox{0};
  double gap{0};  // acc_hbox - acc_rbox
  std::size_t n{0};
};

GapReport criterion_gap(std::span<const BoxPair> pairs, double t);

/// Non-zero entries are foreground. Rows are image rows.
using BinaryMask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

struct GsdConfig {
  double meters_per_pixel{1.0};
};

enum class CentroidMode { pixel_mean, box_center };

struct MaskPair {
  BinaryMask pred;
  BinaryMask gt;
};

struct MaskPairMetrics {
  double iou{0};
  double dice{0};
  double area_error_px{0};    // |area_pred - area_gt| in px^2
  double center_error_px{0};  // valid only when centers_defined
  bool centers_defined{false};
};

MaskPairMetrics mask_pair_metrics(const BinaryMask& pred, const BinaryMask& gt,
                                  CentroidMode mode = CentroidMode::pixel_mean);

struct MaskMetrics {
  double miou{0};
  double mdice{0};
  double aae{0};  // m^2
  double me{0};   // m, over pairs where both masks are non-empty
  std::size_t n{0};
  std::size_t n_centered{0};
};

MaskMetrics mask_metrics(std::span<const MaskPair> pairs, const GsdConfig& gsd,
                         CentroidMode mode = CentroidMode::pixel_mean);

/// Pixel (i, j) is set when the point (x = j, y = i) lies in the box.
BinaryMask rasterize_rbox(const RBoxd& b, int h, int w);

inline constexpr int kRotationBins = 18;

struct RotationStats {
  double fraction_rotated{0};
  std::array<std::size_t, kRotationBins> histogram{};  // |theta| in 5-degree bins over [0, 90)
  std::size_t n{0};
};

RotationStats rotation_stats(std::span<const RBoxd> annotations, double rot_thr_deg = 1.0);

struct EvalReport {
  std::size_t n{0};
  double acc25{0};
  double acc50{0};
  double acc75{0};
  std::optional<MaskMetrics> masks;
};

EvalReport evaluate_boxes(std::span<const BoxPair> pairs, Criterion c);

}  // namespace rboxgeo

#endif  // RBOXGEO_EVAL_HPP
