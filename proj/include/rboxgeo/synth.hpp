// Seeded synthetic scenes: a rotated target on a reference raster, a click in
// the query view, and query/reference pyramids with a planted similarity
// signal. Reference locations inside the target have cosine >= 0.85 to the
// pooled query vector, outside locations <= 0.2 (before noise).
#ifndef RBOXGEO_SYNTH_HPP
#define RBOXGEO_SYNTH_HPP

#include "rboxgeo/clickmap.hpp"
#include "rboxgeo/dataset.hpp"
#include "rboxgeo/eval.hpp"
#include "rboxgeo/geometry.hpp"
#include "rboxgeo/mcp.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rboxgeo {

inline constexpr double kPlantInsideMin = 0.85;
inline constexpr double kPlantOutsideMax = 0.2;
inline constexpr double kPlantOutsideMin = -0.6;

struct SynthConfig {
  int image_h{256};
  int image_w{256};
  int query_h{128};
  int query_w{128};
  double min_side{24};
  double max_side{96};
  double theta_min_deg{-90};  // theta drawn from [min, max); min == max pins it
  double theta_max_deg{90};
  /// When set, that fraction of instances is rotated (|theta| drawn from
  /// [min_rotation_deg, 90)) and the rest have theta = 0.
  std::optional<double> rotated_fraction;
  double min_rotation_deg{5};
  int channels{8};
  double noise{0};
};

/// Throws std::invalid_argument for configurations that cannot place a box.
void validate(const SynthConfig& config);

struct SyntheticScene {
  std::uint64_t seed{0};
  ImagePlane reference_plane;
  ImagePlane query_plane;
  BinaryMask raster;  // target footprint on the reference image
  RBoxd gt_rbox;
  ClickPoint<double> click;
  FeaturePyramid query;
  FeaturePyramid reference;
};

SyntheticScene synth_scene(std::uint64_t seed, const SynthConfig& config);

/// Scene `index` of a batch: seed first_seed + index. With rotated_fraction
/// set, exactly floor(count * fraction) of the first `count` scenes are rotated.
SyntheticScene batch_scene(std::uint64_t first_seed, std::size_t index, const SynthConfig& config);

std::vector<SyntheticScene> synth_batch(std::uint64_t first_seed, std::size_t count,
                                        const SynthConfig& config, int workers = 1);

std::string scene_id(std::uint64_t seed);

/// Annotation view of a scene; file paths point at the pyramid containers
/// written by the CLI.
AnnotationRecord scene_record(const SyntheticScene& scene, Split split = Split::test);

}  // namespace rboxgeo

#endif  // RBOXGEO_SYNTH_HPP
