// Multi-scale cross-view perception: pooled query context, cosine scores,
// min-max attention and modulation of the reference pyramid.
#ifndef RBOXGEO_MCP_HPP
#define RBOXGEO_MCP_HPP

#include <Eigen/Core>

#include <iosfwd>
#include <utility>
#include <vector>

namespace rboxgeo {

inline constexpr double kNormEps = 1e-12;
inline constexpr double kAttentionEps = 1e-6;
inline constexpr int kFirstLevel = 3;
inline constexpr int kLastLevel = 7;
inline constexpr int kNumLevels = kLastLevel - kFirstLevel + 1;

/// One pyramid level. `values` is d x (h*w); column i*w + j holds the
/// d-vector at row i, column j.
struct FeatureLevel {
  int k{kFirstLevel};
  int h{1};
  int w{1};
  Eigen::MatrixXd values;

  int d() const { return static_cast<int>(values.rows()); }
  int stride() const { return 1 << k; }
  Eigen::Index column(int i, int j) const { return static_cast<Eigen::Index>(i) * w + j; }
  auto at(int i, int j) { return values.col(column(i, j)); }
  auto at(int i, int j) const { return values.col(column(i, j)); }
  bool operator==(const FeatureLevel& o) const {
    return k == o.k && h == o.h && w == o.w && values.rows() == o.values.rows() &&
           values.cols() == o.values.cols() && values == o.values;
  }
};

struct FeaturePyramid {
  std::vector<FeatureLevel> levels;
  bool operator==(const FeaturePyramid&) const = default;
};

/// Throws std::invalid_argument on a malformed level.
void validate_level(const FeatureLevel& f);
/// Exactly five levels, k = 3..7 in order.
void validate_pyramid(const FeaturePyramid& p);

/// Spatial size of level k for an H x W input: ceil(H / 2^k) x ceil(W / 2^k).
std::pair<int, int> level_size(int image_h, int image_w, int k);

Eigen::VectorXd global_average_pool(const FeatureLevel& f);

/// Cosine similarity of g against every location, h x w. Zero when either
/// vector has norm below kNormEps.
Eigen::MatrixXd cosine_score_map(const Eigen::VectorXd& g, const FeatureLevel& f);

Eigen::MatrixXd minmax_normalize(const Eigen::MatrixXd& scores, double eps = kAttentionEps);

/// Per-location L2 normalisation (zero vectors stay zero).
FeatureLevel l2_normalize_locations(const FeatureLevel& f);

FeatureLevel modulate(const Eigen::MatrixXd& attention, const FeatureLevel& f_norm);

/// Attention map of every level, in level order.
std::vector<Eigen::MatrixXd> mcp_attention(const FeaturePyramid& query,
                                           const FeaturePyramid& reference,
                                           double eps = kAttentionEps);

FeaturePyramid mcp_forward(const FeaturePyramid& query, const FeaturePyramid& reference,
                           double eps = kAttentionEps);

/// First maximum in row-major scan order.
std::pair<int, int> argmax_scan(const Eigen::MatrixXd& grid);

// Binary container: int32 level count, then per level int32 k, d, h, w, then
// for each level d*h*w float32 in (c, i, j) row-major order. Little-endian.
void write_pyramid(std::ostream& out, const FeaturePyramid& p);
FeaturePyramid read_pyramid(std::istream& in);

}  // namespace rboxgeo

#endif  // RBOXGEO_MCP_HPP
