#include "rboxgeo/synth.hpp"

#include "rboxgeo/assignment.hpp"
#include "rboxgeo/parallel.hpp"
#include "rboxgeo/rng.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace rboxgeo {

namespace {

enum Stream : std::uint64_t {
  kBoxStream = 1,
  kClickStream = 2,
  kQueryStream = 100,      // + k
  kReferenceStream = 200,  // + k
};

enum class Rotation { sample, rotated, upright };

Eigen::VectorXd random_unit(CounterRng& rng, int d) {
  Eigen::VectorXd v(d);
  for (int n = 0; n < d; ++n) v[n] = rng.normal();
  const double norm = v.norm();
  if (norm < kNormEps) {
    v.setZero();
    v[0] = 1;
    return v;
  }
  return v / norm;
}

// Random unit vector orthogonal to the unit vector u (d >= 2).
Eigen::VectorXd random_orthogonal(CounterRng& rng, const Eigen::VectorXd& u) {
  for (;;) {
    Eigen::VectorXd v = random_unit(rng, static_cast<int>(u.size()));
    v -= v.dot(u) * u;
    const double norm = v.norm();
    if (norm > 1e-3) return v / norm;
  }
}

void add_noise(CounterRng& rng, Eigen::Ref<Eigen::VectorXd> f, double noise, double magnitude) {
  if (noise <= 0) return;
  const double sigma = noise * magnitude / std::sqrt(static_cast<double>(f.size()));
  for (Eigen::Index n = 0; n < f.size(); ++n) f[n] += sigma * rng.normal();
}

double sample_theta_deg(CounterRng& rng, const SynthConfig& c, Rotation rot) {
  if (rot == Rotation::sample && c.rotated_fraction) {
    rot = rng.uniform() < *c.rotated_fraction ? Rotation::rotated : Rotation::upright;
  }
  switch (rot) {
    case Rotation::upright: return 0.0;
    case Rotation::rotated: {
      const double mag = rng.uniform(c.min_rotation_deg, 90.0);
      return rng.uniform() < 0.5 ? -mag : mag;
    }
    case Rotation::sample: break;
  }
  if (c.theta_min_deg == c.theta_max_deg) return c.theta_min_deg;
  return rng.uniform(c.theta_min_deg, c.theta_max_deg);
}

FeaturePyramid make_query(std::uint64_t seed, const SynthConfig& c, const ClickPoint<double>& click) {
  const ScalarMap<double> proximity = make_click_map(ImagePlane{c.query_h, c.query_w}, click);
  FeaturePyramid p;
  for (int k = kFirstLevel; k <= kLastLevel; ++k) {
    CounterRng rng(seed, kQueryStream + static_cast<std::uint64_t>(k));
    const auto [h, w] = level_size(c.query_h, c.query_w, k);
    FeatureLevel level{k, h, w, Eigen::MatrixXd(c.channels, h * w)};
    const Eigen::VectorXd object = random_unit(rng, c.channels);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const Point2d at = feature_to_image(i, j, level.stride());
        const int pi = std::min(static_cast<int>(at.y()), c.query_h - 1);
        const int pj = std::min(static_cast<int>(at.x()), c.query_w - 1);
        const double weight = std::pow(proximity(pi, pj), 4);
        const double magnitude = rng.uniform(0.5, 2.0);
        Eigen::VectorXd f = magnitude * (weight * object + (1 - weight) * random_unit(rng, c.channels));
        add_noise(rng, f, c.noise, magnitude);
        level.at(i, j) = f;
      }
    }
    p.levels.push_back(std::move(level));
  }
  return p;
}

FeaturePyramid make_reference(std::uint64_t seed, const SynthConfig& c, const RBoxd& gt,
                              const FeaturePyramid& query) {
  FeaturePyramid p;
  for (int k = kFirstLevel; k <= kLastLevel; ++k) {
    CounterRng rng(seed, kReferenceStream + static_cast<std::uint64_t>(k));
    const auto [h, w] = level_size(c.image_h, c.image_w, k);
    FeatureLevel level{k, h, w, Eigen::MatrixXd(c.channels, h * w)};
    Eigen::VectorXd g = global_average_pool(query.levels[static_cast<std::size_t>(k - kFirstLevel)]);
    if (g.norm() < kNormEps) g = random_unit(rng, c.channels);
    const Eigen::VectorXd gu = g.normalized();
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const bool inside = point_in_rbox(feature_to_image(i, j, level.stride()), gt);
        const double cosine = inside ? rng.uniform(kPlantInsideMin, 1.0)
                                     : rng.uniform(kPlantOutsideMin, kPlantOutsideMax);
        const double magnitude = rng.uniform(0.5, 2.0);
        const Eigen::VectorXd v = random_orthogonal(rng, gu);
        Eigen::VectorXd f = magnitude * (cosine * gu + std::sqrt(1 - cosine * cosine) * v);
        add_noise(rng, f, c.noise, magnitude);
        level.at(i, j) = f;
      }
    }
    p.levels.push_back(std::move(level));
  }
  return p;
}

SyntheticScene make_scene(std::uint64_t seed, const SynthConfig& c, Rotation rot) {
  validate(c);
  SyntheticScene s;
  s.seed = seed;
  s.reference_plane = {c.image_h, c.image_w};
  s.query_plane = {c.query_h, c.query_w};

  CounterRng box_rng(seed, kBoxStream);
  const double w = box_rng.uniform(c.min_side, c.max_side);
  const double h = box_rng.uniform(c.min_side, c.max_side);
  const double theta = normalize_angle(degrees_to_radians(sample_theta_deg(box_rng, c, rot)));
  const HBoxd hull = rbox_to_hbox(RBoxd{0, 0, w, h, theta});
  const double ex = hull.xmax;
  const double ey = hull.ymax;
  if (2 * ex > c.image_w - 1 || 2 * ey > c.image_h - 1)
    throw std::invalid_argument("synth_scene: box does not fit inside the reference image");
  const double cx = box_rng.uniform(ex, c.image_w - 1 - ex);
  const double cy = box_rng.uniform(ey, c.image_h - 1 - ey);
  s.gt_rbox = {cx, cy, w, h, theta};
  s.raster = rasterize_rbox(s.gt_rbox, c.image_h, c.image_w);

  CounterRng click_rng(seed, kClickStream);
  s.click = {click_rng.uniform(0.25, 0.75) * c.query_w, click_rng.uniform(0.25, 0.75) * c.query_h};

  s.query = make_query(seed, c, s.click);
  s.reference = make_reference(seed, c, s.gt_rbox, s.query);
  return s;
}

bool planted_rotation(std::size_t index, double fraction) {
  // Integer arithmetic keeps the count exact: floor(n * f) rotated among the first n.
  const auto num = static_cast<std::uint64_t>(std::llround(fraction * 1e6));
  const auto below = [&](std::uint64_t n) { return n * num / 1000000ULL; };
  return below(index + 1) > below(index);
}

}  // namespace

void validate(const SynthConfig& c) {
  if (c.image_h < 1 || c.image_w < 1 || c.query_h < 1 || c.query_w < 1)
    throw std::invalid_argument("synth: image sizes must be positive");
  if (!(c.min_side > 0) || !(c.max_side >= c.min_side))
    throw std::invalid_argument("synth: need 0 < min_side <= max_side");
  if (c.min_side >= std::min(c.image_h, c.image_w))
    throw std::invalid_argument("synth: box larger than image");
  if (!(c.theta_min_deg <= c.theta_max_deg)) throw std::invalid_argument("synth: empty theta range");
  if (c.rotated_fraction && !(*c.rotated_fraction >= 0 && *c.rotated_fraction <= 1))
    throw std::invalid_argument("synth: rotated_fraction outside [0,1]");
  if (!(c.min_rotation_deg >= 0 && c.min_rotation_deg < 90))
    throw std::invalid_argument("synth: min_rotation_deg outside [0,90)");
  if (c.channels < 2) throw std::invalid_argument("synth: need at least two channels");
  if (!(c.noise >= 0) || !std::isfinite(c.noise)) throw std::invalid_argument("synth: noise must be >= 0");
}

SyntheticScene synth_scene(std::uint64_t seed, const SynthConfig& config) {
  return make_scene(seed, config, Rotation::sample);
}

SyntheticScene batch_scene(std::uint64_t first_seed, std::size_t index, const SynthConfig& config) {
  Rotation rot = Rotation::sample;
  if (config.rotated_fraction)
    rot = planted_rotation(index, *config.rotated_fraction) ? Rotation::rotated : Rotation::upright;
  return make_scene(first_seed + index, config, rot);
}

std::vector<SyntheticScene> synth_batch(std::uint64_t first_seed, std::size_t count,
                                        const SynthConfig& config, int workers) {
  validate(config);
  std::vector<SyntheticScene> out(count);
  parallel_for(count, workers, [&](std::size_t n) { out[n] = batch_scene(first_seed, n, config); });
  return out;
}

std::string scene_id(std::uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth-%08llu", static_cast<unsigned long long>(seed));
  return buf;
}

AnnotationRecord scene_record(const SyntheticScene& scene, Split split) {
  AnnotationRecord r;
  r.id = scene_id(scene.seed);
  r.query_image = "pyramids/" + r.id + "_query.pyr";
  r.reference_image = "pyramids/" + r.id + "_reference.pyr";
  r.click = scene.click;
  r.query_size = scene.query_plane;
  r.gt_rbox = scene.gt_rbox;
  r.split = split;
  r.view = View::drone;
  return r;
}

}  // namespace rboxgeo
