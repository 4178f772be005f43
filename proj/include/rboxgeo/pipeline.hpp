// End-to-end desk-scale run: synthetic scene -> cross-view attention ->
// target assignment -> simulated head -> decode -> metrics.
//
// The head is simulated, not learned. Its classification output at each
// location is the magnitude of the refined reference feature (the attention
// value). Its regression output is the assigned target perturbed by
// noise-scaled jitter at positives, and a default stride-sized box at
// negatives, whose centerness output is an uninformed constant.
#ifndef RBOXGEO_PIPELINE_HPP
#define RBOXGEO_PIPELINE_HPP

#include "rboxgeo/assignment.hpp"
#include "rboxgeo/decode.hpp"
#include "rboxgeo/eval.hpp"
#include "rboxgeo/losses.hpp"
#include "rboxgeo/mcp.hpp"
#include "rboxgeo/synth.hpp"

#include <cstdint>
#include <vector>

namespace rboxgeo {

struct SimulatedHead {
  double log_extent_sigma{0.1};     // per unit of scene noise
  double theta_sigma{0.05};         // rad per unit of scene noise
  double negative_centerness{0.25};
  double negative_box_scale{4.0};   // side of the negative default box, in strides
};

struct PipelineConfig {
  SynthConfig synth;
  double eps{kAttentionEps};
  ScaleRanges ranges{ScaleRanges::fcos_default()};
  SimulatedHead head;
  DecodeOptions decode;
  TotalLossWeights weights;
  OSLossParams loss;
  Criterion criterion{Criterion::rbox};
  GsdConfig gsd;
  CentroidMode centroid{CentroidMode::pixel_mean};
};

struct SceneOutcome {
  std::uint64_t seed{0};
  RBoxd gt;
  Prediction prediction;
  double iou{0};
  int n_positive{0};
  MaskPairMetrics mask;
  LossBreakdown loss;  // head outputs scored against the assigned targets
};

struct PipelineReport {
  std::vector<SceneOutcome> scenes;
  EvalReport eval;
  LossBreakdown mean_loss;  // component-wise mean over scenes
};

std::vector<RawPrediction> simulate_head(const SyntheticScene& scene, const FeaturePyramid& refined,
                                         const std::vector<LocationTarget>& targets,
                                         const PipelineConfig& config);

SceneOutcome run_scene(const SyntheticScene& scene, const PipelineConfig& config);

PipelineReport run_pipeline(std::uint64_t first_seed, std::size_t count,
                            const PipelineConfig& config, int workers = 1);

}  // namespace rboxgeo

#endif  // RBOXGEO_PIPELINE_HPP
