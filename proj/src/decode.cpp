#include "rboxgeo/decode.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace rboxgeo {

RBoxd decode_rbox(const Point2d& location, const BoxOffsets& reg) {
  for (double v : {reg.l, reg.t, reg.r, reg.b})
    if (!std::isfinite(v) || v < 0) throw std::invalid_argument("decode_rbox: offsets must be finite and >= 0");
  if (reg.l + reg.r <= 0 || reg.t + reg.b <= 0)
    throw std::invalid_argument("decode_rbox: zero extent");
  const double c = std::cos(reg.theta);
  const double s = std::sin(reg.theta);
  const double ox = (reg.r - reg.l) / 2;
  const double oy = (reg.b - reg.t) / 2;
  return {location.x() + c * ox - s * oy, location.y() + s * ox + c * oy, reg.l + reg.r,
          reg.t + reg.b, reg.theta};
}

HBoxd decode_hbox_deltas(const HBoxd& anchor, const Eigen::Vector4d& d) {
  const Point2d ac = anchor.center();
  const double cx = ac.x() + d[0] * anchor.width();
  const double cy = ac.y() + d[1] * anchor.height();
  const double w = anchor.width() * std::exp(d[2]);
  const double h = anchor.height() * std::exp(d[3]);
  return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

double fuse_score(double cls, double centerness) {
  return std::sqrt(std::clamp(cls, 0.0, 1.0) * std::clamp(centerness, 0.0, 1.0));
}

bool ranks_before(const Prediction& a, const Prediction& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.level != b.level) return a.level < b.level;
  return a.order < b.order;
}

std::vector<Prediction> rotated_nms(std::vector<Prediction> preds, double iou_thr) {
  if (!(iou_thr >= 0 && iou_thr <= 1)) throw std::invalid_argument("rotated_nms: threshold outside [0,1]");
  std::stable_sort(preds.begin(), preds.end(), ranks_before);
  std::vector<Prediction> kept;
  for (const auto& p : preds) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Prediction& k) {
      return rbox_iou(k.box, p.box) >= iou_thr;
    });
    if (!suppressed) kept.push_back(p);
  }
  return kept;
}

Prediction select_top1(std::span<const Prediction> preds) {
  if (preds.empty()) throw NoPrediction("select_top1: no predictions");
  return *std::min_element(preds.begin(), preds.end(), ranks_before);
}

std::vector<Prediction> decode_predictions(std::span<const RawPrediction> raw,
                                           const DecodeOptions& opts) {
  std::vector<Prediction> all;
  all.reserve(raw.size());
  long order = 0;
  int level = raw.empty() ? 0 : raw.front().k;
  for (const auto& r : raw) {
    if (r.k != level) {
      level = r.k;
      order = 0;
    }
    const Point2d at = feature_to_image(r.i, r.j, 1 << r.k);
    all.push_back({decode_rbox(at, r.regression), fuse_score(r.cls, r.centerness), r.k, order++});
  }
  if (all.empty()) throw NoPrediction("decode_predictions: no raw predictions");

  std::vector<Prediction> confident;
  std::copy_if(all.begin(), all.end(), std::back_inserter(confident),
               [&](const Prediction& p) { return p.score >= opts.score_floor; });
  if (confident.empty()) confident = std::move(all);

  if (opts.multi_output) return rotated_nms(std::move(confident), opts.nms_thr);
  return {select_top1(confident)};
}

SamPrompt export_sam_prompt(const Prediction& p, PromptMode mode, std::string image_id) {
  SamPrompt out{std::move(image_id), mode, {}, p.score};
  if (mode == PromptMode::hbox) {
    const HBoxd h = rbox_to_hbox(p.box);
    out.box = {h.xmin, h.ymin, h.xmax, h.ymax};
  } else {
    for (const auto& c : rbox_corners(p.box)) {
      out.box.push_back(c.x());
      out.box.push_back(c.y());
    }
  }
  return out;
}

const char* to_string(PromptMode mode) {
  return mode == PromptMode::hbox ? "hbox" : "rbox-corners";
}

std::string to_json_line(const SamPrompt& prompt) {
  nlohmann::ordered_json j;
  j["image_id"] = prompt.image_id;
  j["mode"] = to_string(prompt.mode);
  j["box"] = prompt.box;
  j["score"] = prompt.score;
  return j.dump();
}

}  // namespace rboxgeo
