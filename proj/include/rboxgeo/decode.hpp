// From per-location head outputs to one geo-localization answer.
#ifndef RBOXGEO_DECODE_HPP
#define RBOXGEO_DECODE_HPP

#include "rboxgeo/assignment.hpp"
#include "rboxgeo/geometry.hpp"

#include <Eigen/Core>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rboxgeo {

/// Raised when a selection is requested from an empty prediction list.
class NoPrediction : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inverse of box_frame_offsets.
RBoxd decode_rbox(const Point2d& location, const BoxOffsets& reg);

/// Inverse of encode_hbox_deltas.
HBoxd decode_hbox_deltas(const HBoxd& anchor, const Eigen::Vector4d& deltas);

/// Geometric mean of classification and centerness.
double fuse_score(double cls, double centerness);

struct RawPrediction {
  int k{3};
  int i{0};
  int j{0};
  double cls{0};
  double centerness{0};
  BoxOffsets regression;
};

struct Prediction {
  RBoxd box;
  double score{0};
  int level{3};
  long order{0};  // scan position within the level
};

/// Score descending, then earlier level, then earlier scan position.
bool ranks_before(const Prediction& a, const Prediction& b);

std::vector<Prediction> rotated_nms(std::vector<Prediction> preds, double iou_thr);

Prediction select_top1(std::span<const Prediction> preds);

inline constexpr double kScoreFloor = 1e-4;

struct DecodeOptions {
  bool multi_output{false};
  double nms_thr{0.1};
  double score_floor{kScoreFloor};
};

/// Decodes, fuses, drops sub-floor scores (unless nothing would remain) and
/// returns either the single best prediction or the NMS survivors.
std::vector<Prediction> decode_predictions(std::span<const RawPrediction> raw,
                                           const DecodeOptions& opts = {});

enum class PromptMode { hbox, rbox_corners };

struct SamPrompt {
  std::string image_id;
  PromptMode mode{PromptMode::hbox};
  std::vector<double> box;  // 4 numbers (hbox) or 8 (corners)
  double score{0};
};

SamPrompt export_sam_prompt(const Prediction& p, PromptMode mode, std::string image_id = {});

/// {"image_id": ..., "mode": ..., "box": [...], "score": ...} without a newline.
std::string to_json_line(const SamPrompt& prompt);

const char* to_string(PromptMode mode);

}  // namespace rboxgeo

#endif  // RBOXGEO_DECODE_HPP
