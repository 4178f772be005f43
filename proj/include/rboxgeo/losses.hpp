// Training objective: focal classification, centerness cross-entropy, IoU
// loss for the horizontal head and the orientation-sensitive box loss, with
// gradients and a small gradient-descent box fitter.
#ifndef RBOXGEO_LOSSES_HPP
#define RBOXGEO_LOSSES_HPP

#include "rboxgeo/assignment.hpp"
#include "rboxgeo/geometry.hpp"

#include <Eigen/Core>

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rboxgeo {

inline constexpr double kProbEps = 1e-7;
/// Below this centre distance the distance term is treated as at its kink.
inline constexpr double kKinkDistance = 1e-8;
/// Relative finite-difference step for the IoU term.
inline constexpr double kIouFdStep = 1e-4;

enum class IouLossForm { linear, log };         // 1 - IoU, or -ln IoU
enum class DistanceMode { sigmoid, centered };  // sigmoid(d), or 2*sigmoid(d) - 1

struct OSLossParams {
  double alpha{1.0};
  double beta{1.0};
  IouLossForm iou_form{IouLossForm::linear};
  DistanceMode distance_mode{DistanceMode::sigmoid};
};

struct TotalLossWeights {
  double mu1{1.0};
  double mu2{1.0};
  double mu3{1.0};
};

/// Normalised, unweighted terms; total = mu1*classification +
/// mu2*centerness + mu3*regression.
struct LossBreakdown {
  double classification{0};
  double centerness{0};
  double regression{0};
  double total{0};
  int n_pos{0};
  double sum_cn_pos{0};
  TotalLossWeights weights;

  double classification_contribution() const { return weights.mu1 * classification; }
  double centerness_contribution() const { return weights.mu2 * centerness; }
  double regression_contribution() const { return weights.mu3 * regression; }
};

using BoxVector = Eigen::Matrix<double, 5, 1>;  // (cx, cy, w, h, theta)

inline BoxVector to_vector(const RBoxd& b) { return {b.cx, b.cy, b.w, b.h, b.theta}; }
inline RBoxd to_rbox(const BoxVector& v) { return {v[0], v[1], v[2], v[3], v[4]}; }

double sigmoid(double x);

/// -alpha_t (1 - p_t)^gamma ln p_t with alpha_t = alpha_f for y = 1 and
/// 1 - alpha_f for y = 0. p is clamped to [kProbEps, 1 - kProbEps].
double focal_loss(double p, int y, double gamma = 2.0, double alpha_f = 0.25);

/// Soft-target binary cross-entropy.
double centerness_bce(double pred, double target);

double iou_loss(double iou, IouLossForm form = IouLossForm::linear);
double iou_loss_hbox(const HBoxd& pred, const HBoxd& gt, IouLossForm form = IouLossForm::linear);

struct OsLossTerms {
  double iou{0};       // L_IoU
  double distance{0};  // alpha * sigmoid(d_c)
  double angle{0};     // beta * |sin(dtheta)|
  double total() const { return iou + distance + angle; }
};

OsLossTerms os_loss_terms(const RBoxd& pred, const RBoxd& gt, const OSLossParams& params = {});
double os_loss(const RBoxd& pred, const RBoxd& gt, const OSLossParams& params = {});

struct OsLossGradient {
  BoxVector grad{BoxVector::Zero()};
  bool at_kink{false};
};

/// Analytic distance and angle terms; central differences for the IoU term.
OsLossGradient os_loss_grad(const RBoxd& pred, const RBoxd& gt, const OSLossParams& params = {});

/// Finite-difference steps used for the IoU term of os_loss_grad.
BoxVector iou_fd_steps(const RBoxd& pred, double rel_step = kIouFdStep);

/// Central differences of an arbitrary box function.
BoxVector central_difference(const std::function<double(const RBoxd&)>& f, const RBoxd& at,
                             const BoxVector& steps);

// -- Total objective ---------------------------------------------------------

struct LocationPrediction {
  double cls{0};
  double centerness{0};
  BoxOffsets regression;
};

enum class HeadKind { rbox, hbox };

struct FocalParams {
  double gamma{2.0};
  double alpha{0.25};
};

/// Location-aligned predictions and targets. Ignored targets are skipped.
LossBreakdown total_loss(std::span<const LocationPrediction> predictions,
                         std::span<const LocationTarget> targets,
                         const TotalLossWeights& weights = {}, const OSLossParams& params = {},
                         HeadKind head = HeadKind::rbox, const FocalParams& focal = {});

// -- Box fitting -------------------------------------------------------------

struct FitStep {
  RBoxd box;
  double loss{0};
};

struct FitResult {
  std::vector<FitStep> trajectory;  // initial state first
  bool diverged{false};
  std::string diagnostic;
};

/// Preconditioned gradient descent on os_loss with backtracking. Centre,
/// size and angle are updated as separate blocks; lr caps each block step.
FitResult fit_rbox(const RBoxd& init, const RBoxd& gt, const OSLossParams& params, double lr,
                   int steps);

}  // namespace rboxgeo

#endif  // RBOXGEO_LOSSES_HPP
