#include "rboxgeo/pipeline.hpp"

#include "rboxgeo/parallel.hpp"
#include "rboxgeo/reduce.hpp"
#include "rboxgeo/rng.hpp"

#include <cmath>

namespace rboxgeo {

namespace {
constexpr std::uint64_t kHeadStream = 300;
}

std::vector<RawPrediction> simulate_head(const SyntheticScene& scene, const FeaturePyramid& refined,
                                         const std::vector<LocationTarget>& targets,
                                         const PipelineConfig& config) {
  CounterRng rng(scene.seed, kHeadStream);
  const double noise = config.synth.noise;
  std::vector<RawPrediction> out;
  out.reserve(targets.size());
  for (const auto& t : targets) {
    const FeatureLevel& level = refined.levels.at(static_cast<std::size_t>(t.k - kFirstLevel));
    RawPrediction p;
    p.k = t.k;
    p.i = t.i;
    p.j = t.j;
    p.cls = std::clamp(level.at(t.i, t.j).norm(), kProbEps, 1 - kProbEps);
    if (t.label == SampleLabel::positive) {
      const double s = config.head.log_extent_sigma * noise;
      p.regression = t.regression;
      p.regression.l *= std::exp(s * rng.normal());
      p.regression.t *= std::exp(s * rng.normal());
      p.regression.r *= std::exp(s * rng.normal());
      p.regression.b *= std::exp(s * rng.normal());
      p.regression.theta = normalize_angle(t.regression.theta + config.head.theta_sigma * noise * rng.normal());
      p.centerness = std::clamp(t.centerness, kProbEps, 1 - kProbEps);
    } else {
      const double half = config.head.negative_box_scale * (1 << t.k) / 2;
      p.regression = {half, half, half, half, 0};
      p.centerness = config.head.negative_centerness;
    }
    out.push_back(p);
  }
  return out;
}

SceneOutcome run_scene(const SyntheticScene& scene, const PipelineConfig& config) {
  const FeaturePyramid refined = mcp_forward(scene.query, scene.reference, config.eps);
  const auto shapes = pyramid_shapes(scene.reference_plane.h, scene.reference_plane.w);
  const auto targets = assign_rbox_targets(shapes, scene.gt_rbox, config.ranges);
  const auto raw = simulate_head(scene, refined, targets, config);
  const auto preds = decode_predictions(raw, config.decode);
  std::vector<LocationPrediction> head;
  head.reserve(raw.size());
  for (const auto& r : raw) head.push_back({r.cls, r.centerness, r.regression});

  SceneOutcome o;
  o.seed = scene.seed;
  o.gt = scene.gt_rbox;
  o.prediction = select_top1(preds);
  o.iou = criterion_iou(o.prediction.box, o.gt, config.criterion);
  for (const auto& t : targets) o.n_positive += t.label == SampleLabel::positive ? 1 : 0;
  const BinaryMask pred_mask =
      rasterize_rbox(o.prediction.box, scene.reference_plane.h, scene.reference_plane.w);
  o.mask = mask_pair_metrics(pred_mask, scene.raster, config.centroid);
  o.loss = total_loss(head, targets, config.weights, config.loss);
  return o;
}

PipelineReport run_pipeline(std::uint64_t first_seed, std::size_t count,
                            const PipelineConfig& config, int workers) {
  validate(config.synth);
  PipelineReport report;
  report.scenes.resize(count);
  std::vector<MaskPair> masks(count);
  parallel_for(count, workers, [&](std::size_t n) {
    const SyntheticScene scene = batch_scene(first_seed, n, config.synth);
    report.scenes[n] = run_scene(scene, config);
    masks[n] = {rasterize_rbox(report.scenes[n].prediction.box, scene.reference_plane.h,
                               scene.reference_plane.w),
                scene.raster};
  });
  std::vector<BoxPair> pairs;
  pairs.reserve(count);
  for (const auto& s : report.scenes) pairs.push_back({s.prediction.box, s.gt});
  report.eval = evaluate_boxes(pairs, config.criterion);
  report.eval.masks = mask_metrics(masks, config.gsd, config.centroid);

  const auto mean_of = [&](auto field) {
    std::vector<double> v;
    v.reserve(count);
    for (const auto& s : report.scenes) v.push_back(s.loss.*field);
    return pairwise_mean(v);
  };
  LossBreakdown& m = report.mean_loss;
  m.weights = config.weights;
  m.classification = mean_of(&LossBreakdown::classification);
  m.centerness = mean_of(&LossBreakdown::centerness);
  m.regression = mean_of(&LossBreakdown::regression);
  m.total = mean_of(&LossBreakdown::total);
  return report;
}

}  // namespace rboxgeo
