// Fixed-order reductions so sums do not depend on how work was scheduled.
#ifndef RBOXGEO_REDUCE_HPP
#define RBOXGEO_REDUCE_HPP

#include <cstddef>
#include <span>

namespace rboxgeo {

/// Pairwise (cascade) summation over a fixed split of the range.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  if (xs.size() <= 8) {
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double pairwise_mean(std::span<const double> xs) {
  return xs.empty() ? 0.0 : pairwise_sum(xs) / static_cast<double>(xs.size());
}

}  // namespace rboxgeo

#endif  // RBOXGEO_REDUCE_HPP
