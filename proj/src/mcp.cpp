#include "rboxgeo/mcp.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace rboxgeo {

void validate_level(const FeatureLevel& f) {
  if (f.k < kFirstLevel || f.k > kLastLevel)
    throw std::invalid_argument("feature level index out of range: " + std::to_string(f.k));
  if (f.h < 1 || f.w < 1 || f.values.rows() < 1)
    throw std::invalid_argument("feature level has empty extent");
  if (f.values.cols() != static_cast<Eigen::Index>(f.h) * f.w)
    throw std::invalid_argument("feature level storage does not match h*w");
  if (!f.values.allFinite()) throw std::invalid_argument("feature level holds non-finite values");
}

void validate_pyramid(const FeaturePyramid& p) {
  if (p.levels.size() != static_cast<std::size_t>(kNumLevels))
    throw std::invalid_argument("pyramid must have exactly five levels");
  for (std::size_t n = 0; n < p.levels.size(); ++n) {
    validate_level(p.levels[n]);
    if (p.levels[n].k != kFirstLevel + static_cast<int>(n))
      throw std::invalid_argument("pyramid levels must be k = 3..7 in order");
  }
}

std::pair<int, int> level_size(int image_h, int image_w, int k) {
  const int s = 1 << k;
  return {(image_h + s - 1) / s, (image_w + s - 1) / s};
}

Eigen::VectorXd global_average_pool(const FeatureLevel& f) {
  validate_level(f);
  return f.values.rowwise().mean();
}

Eigen::MatrixXd cosine_score_map(const Eigen::VectorXd& g, const FeatureLevel& f) {
  validate_level(f);
  if (g.size() != f.values.rows())
    throw std::invalid_argument("cosine_score_map: channel count mismatch");
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(f.h, f.w);
  const double gn = g.norm();
  if (gn < kNormEps) return scores;
  const Eigen::VectorXd gu = g / gn;
  for (int i = 0; i < f.h; ++i) {
    for (int j = 0; j < f.w; ++j) {
      const auto v = f.at(i, j);
      const double vn = v.norm();
      if (vn >= kNormEps) scores(i, j) = gu.dot(v) / vn;
    }
  }
  return scores;
}

Eigen::MatrixXd minmax_normalize(const Eigen::MatrixXd& scores, double eps) {
  if (scores.size() == 0) throw std::invalid_argument("minmax_normalize: empty grid");
  if (!scores.allFinite()) throw std::invalid_argument("minmax_normalize: non-finite score");
  const double lo = scores.minCoeff();
  const double hi = scores.maxCoeff();
  return (scores.array() - lo) / (hi - lo + eps);
}

FeatureLevel l2_normalize_locations(const FeatureLevel& f) {
  validate_level(f);
  FeatureLevel out = f;
  for (Eigen::Index c = 0; c < out.values.cols(); ++c) {
    const double n = out.values.col(c).norm();
    if (n >= kNormEps) out.values.col(c) /= n;
    else out.values.col(c).setZero();
  }
  return out;
}

FeatureLevel modulate(const Eigen::MatrixXd& attention, const FeatureLevel& f_norm) {
  validate_level(f_norm);
  if (attention.rows() != f_norm.h || attention.cols() != f_norm.w)
    throw std::invalid_argument("modulate: attention shape does not match feature level");
  FeatureLevel out = f_norm;
  for (int i = 0; i < out.h; ++i)
    for (int j = 0; j < out.w; ++j) out.at(i, j) *= attention(i, j);
  return out;
}

namespace {

void require_aligned(const FeaturePyramid& query, const FeaturePyramid& reference) {
  validate_pyramid(query);
  validate_pyramid(reference);
  for (std::size_t n = 0; n < query.levels.size(); ++n) {
    if (query.levels[n].d() != reference.levels[n].d())
      throw std::invalid_argument("mcp: query and reference channel counts differ at level " +
                                  std::to_string(query.levels[n].k));
  }
}

Eigen::MatrixXd level_attention(const FeatureLevel& q, const FeatureLevel& r, double eps) {
  return minmax_normalize(cosine_score_map(global_average_pool(q), r), eps);
}

}  // namespace

std::vector<Eigen::MatrixXd> mcp_attention(const FeaturePyramid& query,
                                           const FeaturePyramid& reference, double eps) {
  require_aligned(query, reference);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(query.levels.size());
  for (std::size_t n = 0; n < query.levels.size(); ++n)
    out.push_back(level_attention(query.levels[n], reference.levels[n], eps));
  return out;
}

FeaturePyramid mcp_forward(const FeaturePyramid& query, const FeaturePyramid& reference,
                           double eps) {
  require_aligned(query, reference);
  FeaturePyramid out;
  out.levels.reserve(reference.levels.size());
  for (std::size_t n = 0; n < query.levels.size(); ++n) {
    const auto& r = reference.levels[n];
    out.levels.push_back(
        modulate(level_attention(query.levels[n], r, eps), l2_normalize_locations(r)));
  }
  return out;
}

std::pair<int, int> argmax_scan(const Eigen::MatrixXd& grid) {
  if (grid.size() == 0) throw std::invalid_argument("argmax_scan: empty grid");
  std::pair<int, int> best{0, 0};
  double v = grid(0, 0);
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      if (grid(i, j) > v) {
        v = grid(i, j);
        best = {static_cast<int>(i), static_cast<int>(j)};
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Binary container
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 4);
  std::uint32_t bits;
  std::memcpy(&bits, &value, 4);
  const std::array<char, 4> bytes{static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                                  static_cast<char>((bits >> 16) & 0xff),
                                  static_cast<char>((bits >> 24) & 0xff)};
  out.write(bytes.data(), 4);
}

template <typename T>
T get_le(std::istream& in) {
  static_assert(sizeof(T) == 4);
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw std::runtime_error("pyramid container truncated");
  const std::uint32_t bits = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                             (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
  T value;
  std::memcpy(&value, &bits, 4);
  return value;
}

}  // namespace

void write_pyramid(std::ostream& out, const FeaturePyramid& p) {
  put_le<std::int32_t>(out, static_cast<std::int32_t>(p.levels.size()));
  for (const auto& l : p.levels) {
    put_le<std::int32_t>(out, l.k);
    put_le<std::int32_t>(out, l.d());
    put_le<std::int32_t>(out, l.h);
    put_le<std::int32_t>(out, l.w);
  }
  for (const auto& l : p.levels)
    for (int c = 0; c < l.d(); ++c)
      for (int i = 0; i < l.h; ++i)
        for (int j = 0; j < l.w; ++j) put_le<float>(out, static_cast<float>(l.values(c, l.column(i, j))));
  if (!out) throw std::runtime_error("failed writing pyramid container");
}

FeaturePyramid read_pyramid(std::istream& in) {
  const auto count = get_le<std::int32_t>(in);
  if (count < 0 || count > 64) throw std::runtime_error("pyramid container: bad level count");
  FeaturePyramid p;
  p.levels.resize(static_cast<std::size_t>(count));
  for (auto& l : p.levels) {
    l.k = get_le<std::int32_t>(in);
    const auto d = get_le<std::int32_t>(in);
    l.h = get_le<std::int32_t>(in);
    l.w = get_le<std::int32_t>(in);
    if (d < 1 || l.h < 1 || l.w < 1 || d > (1 << 16) || l.h > (1 << 16) || l.w > (1 << 16))
      throw std::runtime_error("pyramid container: bad level shape");
    l.values.resize(d, static_cast<Eigen::Index>(l.h) * l.w);
  }
  for (auto& l : p.levels)
    for (int c = 0; c < l.d(); ++c)
      for (int i = 0; i < l.h; ++i)
        for (int j = 0; j < l.w; ++j) l.values(c, l.column(i, j)) = get_le<float>(in);
  return p;
}

}  // namespace rboxgeo
