#include "rboxgeo/losses.hpp"

#include "rboxgeo/decode.hpp"
#include "rboxgeo/mcp.hpp"
#include "rboxgeo/reduce.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rboxgeo {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

double clamp_prob(double p) {
  if (std::isnan(p)) throw std::invalid_argument("probability is NaN");
  return std::clamp(p, kProbEps, 1.0 - kProbEps);
}

}  // namespace

double focal_loss(double p, int y, double gamma, double alpha_f) {
  if (y != 0 && y != 1) throw std::invalid_argument("focal_loss: label must be 0 or 1");
  const double q = clamp_prob(p);
  const double pt = y == 1 ? q : 1.0 - q;
  const double at = y == 1 ? alpha_f : 1.0 - alpha_f;
  return -at * std::pow(1.0 - pt, gamma) * std::log(pt);
}

double centerness_bce(double pred, double target) {
  if (!(target >= 0 && target <= 1)) throw std::invalid_argument("centerness_bce: target outside [0,1]");
  const double q = clamp_prob(pred);
  double loss = 0;
  if (target > 0) loss -= target * std::log(q);
  if (target < 1) loss -= (1 - target) * std::log(1 - q);
  return loss;
}

double iou_loss(double iou, IouLossForm form) {
  if (form == IouLossForm::linear) return 1.0 - iou;
  return -std::log(std::max(iou, kProbEps));
}

double iou_loss_hbox(const HBoxd& pred, const HBoxd& gt, IouLossForm form) {
  return iou_loss(hbox_iou(pred, gt), form);
}

OsLossTerms os_loss_terms(const RBoxd& pred, const RBoxd& gt, const OSLossParams& params) {
  const double d = center_distance(pred, gt);
  const double sig = sigmoid(d);
  const double dtheta = normalize_angle(pred.theta - gt.theta);
  OsLossTerms t;
  t.iou = iou_loss(rbox_iou(pred, gt), params.iou_form);
  t.distance = params.alpha * (params.distance_mode == DistanceMode::sigmoid ? sig : 2 * sig - 1);
  t.angle = params.beta * std::abs(std::sin(dtheta));
  return t;
}

double os_loss(const RBoxd& pred, const RBoxd& gt, const OSLossParams& params) {
  return os_loss_terms(pred, gt, params).total();
}

BoxVector iou_fd_steps(const RBoxd& pred, double rel_step) {
  const double size = (pred.w + pred.h) / 2;
  return {rel_step * size, rel_step * size, rel_step * pred.w, rel_step * pred.h, rel_step};
}

BoxVector central_difference(const std::function<double(const RBoxd&)>& f, const RBoxd& at,
                             const BoxVector& steps) {
  BoxVector g;
  const BoxVector x = to_vector(at);
  for (int n = 0; n < 5; ++n) {
    BoxVector hi = x;
    BoxVector lo = x;
    hi[n] += steps[n];
    lo[n] -= steps[n];
    g[n] = (f(to_rbox(hi)) - f(to_rbox(lo))) / (2 * steps[n]);
  }
  return g;
}

OsLossGradient os_loss_grad(const RBoxd& pred, const RBoxd& gt, const OSLossParams& params) {
  require_valid(pred, "os_loss_grad");
  require_valid(gt, "os_loss_grad");
  OsLossGradient out;
  out.grad = central_difference(
      [&](const RBoxd& b) { return iou_loss(rbox_iou(b, gt), params.iou_form); }, pred,
      iou_fd_steps(pred));

  const double dx = pred.cx - gt.cx;
  const double dy = pred.cy - gt.cy;
  const double d = std::hypot(dx, dy);
  if (d > kKinkDistance) {
    const double s = sigmoid(d);
    const double scale = params.distance_mode == DistanceMode::sigmoid ? 1.0 : 2.0;
    const double slope = params.alpha * scale * s * (1 - s);
    out.grad[0] += slope * dx / d;
    out.grad[1] += slope * dy / d;
  } else {
    out.at_kink = true;
  }

  const double dtheta = normalize_angle(pred.theta - gt.theta);
  const double sn = std::sin(dtheta);
  if (sn != 0) out.grad[4] += params.beta * (sn > 0 ? 1.0 : -1.0) * std::cos(dtheta);
  else out.at_kink = true;
  return out;
}

LossBreakdown total_loss(std::span<const LocationPrediction> predictions,
                         std::span<const LocationTarget> targets, const TotalLossWeights& weights,
                         const OSLossParams& params, HeadKind head, const FocalParams& focal) {
  if (predictions.size() != targets.size())
    throw std::invalid_argument("total_loss: predictions and targets are not location-aligned");
  std::vector<double> cls_terms;
  std::vector<double> cn_terms;
  std::vector<double> reg_terms;
  std::vector<double> cn_targets;
  cls_terms.reserve(targets.size());

  for (std::size_t n = 0; n < targets.size(); ++n) {
    const LocationTarget& t = targets[n];
    const LocationPrediction& p = predictions[n];
    if (t.label == SampleLabel::ignored) continue;
    const bool positive = t.label == SampleLabel::positive;
    cls_terms.push_back(focal_loss(p.cls, positive ? 1 : 0, focal.gamma, focal.alpha));
    if (!positive) continue;
    cn_terms.push_back(centerness_bce(p.centerness, t.centerness));
    cn_targets.push_back(t.centerness);
    const RBoxd pred_box = decode_rbox(t.image_point, p.regression);
    const RBoxd gt_box = decode_rbox(t.image_point, t.regression);
    const double reg = head == HeadKind::rbox
                           ? os_loss(pred_box, gt_box, params)
                           : iou_loss_hbox(rbox_to_hbox(pred_box), rbox_to_hbox(gt_box), params.iou_form);
    reg_terms.push_back(t.centerness * reg);
  }

  LossBreakdown out;
  out.weights = weights;
  out.n_pos = static_cast<int>(cn_targets.size());
  out.sum_cn_pos = pairwise_sum(cn_targets);
  const double npos = std::max(out.n_pos, 1);
  const double cn_norm = std::max(out.sum_cn_pos, kNormEps);
  out.classification = pairwise_sum(cls_terms) / npos;
  out.centerness = pairwise_sum(cn_terms) / npos;
  out.regression = pairwise_sum(reg_terms) / cn_norm;
  out.total = weights.mu1 * out.classification + weights.mu2 * out.centerness +
              weights.mu3 * out.regression;
  return out;
}

FitResult fit_rbox(const RBoxd& init, const RBoxd& gt, const OSLossParams& params, double lr,
                   int steps) {
  require_valid(init, "fit_rbox");
  require_valid(gt, "fit_rbox");
  if (!(lr > 0) || !std::isfinite(lr)) throw std::invalid_argument("fit_rbox: lr must be positive");
  if (steps < 0) throw std::invalid_argument("fit_rbox: negative step count");

  FitResult result;
  RBoxd x = normalized(init);
  double fx = os_loss(x, gt, params);
  result.trajectory.push_back({x, fx});
  if (!std::isfinite(fx)) {
    result.diverged = true;
    result.diagnostic = "initial loss is not finite";
    return result;
  }

  // Lengths are scaled by the squared box size so one lr suits any box scale.
  const double size = (init.w + init.h) / 2;
  const BoxVector precond{size * size, size * size, size * size, size * size, 1.0};
  const std::array<BoxVector, 3> blocks{BoxVector{1, 1, 0, 0, 0}, BoxVector{0, 0, 1, 1, 0},
                                        BoxVector{0, 0, 0, 0, 1}};
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxHalvings = 60;
  std::array<double, 3> block_step{lr, lr, lr};

  for (int it = 1; it <= steps; ++it) {
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      const BoxVector g = os_loss_grad(x, gt, params).grad;
      if (!g.allFinite()) {
        result.diverged = true;
        break;
      }
      const BoxVector dir = -(blocks[bi].array() * precond.array() * g.array()).matrix();
      const double slope = g.dot(dir);
      if (!(slope < 0)) continue;
      double t = std::min(block_step[bi] * 2, lr);
      for (int h = 0; h < kMaxHalvings; ++h, t /= 2) {
        const RBoxd cand = to_rbox(to_vector(x) + t * dir);
        if (!is_valid(cand)) continue;
        const double fc = os_loss(cand, gt, params);
        if (std::isfinite(fc) && fc <= fx + kArmijo * t * slope) {
          x = normalized(cand);
          fx = fc;
          block_step[bi] = t;
          break;
        }
      }
    }
    result.trajectory.push_back({x, fx});
    if (result.diverged || !std::isfinite(fx)) {
      result.diverged = true;
      std::ostringstream msg;
      msg << "non-finite loss or gradient at step " << it;
      result.diagnostic = msg.str();
      break;
    }
  }
  return result;
}

}  // namespace rboxgeo
