#pragma once

// Independent brute-force reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "roar/numerics/rng.hpp"
#include "roar/world/point_cloud.hpp"

namespace roar::testing {

inline double brute_nn(const world::Point3& q, const std::vector<world::Point3>& to) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : to) {
    const double dx = q[0] - p[0], dy = q[1] - p[1], dz = q[2] - p[2];
    best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
  }
  return best;
}

inline double brute_chamfer(const world::PointCloud& a, const world::PointCloud& b) {
  double ab = 0, ba = 0;
  for (const auto& p : a.points) ab += brute_nn(p, b.points);
  for (const auto& p : b.points) ba += brute_nn(p, a.points);
  return ab / static_cast<double>(a.size()) + ba / static_cast<double>(b.size());
}

inline double brute_f_score(const world::PointCloud& a, const world::PointCloud& b, double threshold) {
  double pa = 0, rb = 0;
  for (const auto& p : a.points) pa += brute_nn(p, b.points) <= threshold ? 1 : 0;
  for (const auto& p : b.points) rb += brute_nn(p, a.points) <= threshold ? 1 : 0;
  const double precision = pa / static_cast<double>(a.size());
  const double recall = rb / static_cast<double>(b.size());
  return precision + recall == 0 ? 0.0 : 200.0 * (precision * recall) / (precision + recall);
}

}  // namespace roar::testing

#include "roar/evaluation/trace.hpp"

namespace roar::testing {

// Pairwise enumeration over the explicit list of (t, l) slots of each group.
inline double brute_pairs(const std::vector<std::uint16_t>& picks) {
  double agree = 0, pairs = 0;
  for (std::size_t a = 0; a < picks.size(); ++a)
    for (std::size_t b = a + 1; b < picks.size(); ++b) {
      pairs += 1;
      agree += picks[a] == picks[b] ? 1 : 0;
    }
  return agree / pairs;
}

inline double brute_cross_block(const evaluation::RoutingTrace& tr) {
  double total = 0;
  for (std::size_t t = 0; t < tr.timesteps; ++t)
    for (std::size_t i = 0; i < tr.tokens; ++i) {
      std::vector<std::uint16_t> picks;
      for (std::size_t l = 0; l < tr.blocks; ++l) picks.push_back(tr.at(t, l, i));
      total += brute_pairs(picks);
    }
  return total / static_cast<double>(tr.timesteps * tr.tokens);
}

inline double brute_cross_timestep(const evaluation::RoutingTrace& tr) {
  double total = 0;
  for (std::size_t l = 0; l < tr.blocks; ++l)
    for (std::size_t i = 0; i < tr.tokens; ++i) {
      std::vector<std::uint16_t> picks;
      for (std::size_t t = 0; t < tr.timesteps; ++t) picks.push_back(tr.at(t, l, i));
      total += brute_pairs(picks);
    }
  return total / static_cast<double>(tr.blocks * tr.tokens);
}

inline double brute_global(const evaluation::RoutingTrace& tr) {
  double total = 0;
  for (std::size_t i = 0; i < tr.tokens; ++i) {
    std::vector<std::uint16_t> picks;
    for (std::size_t t = 0; t < tr.timesteps; ++t)
      for (std::size_t l = 0; l < tr.blocks; ++l) picks.push_back(tr.at(t, l, i));
    total += brute_pairs(picks);
  }
  return total / static_cast<double>(tr.tokens);
}

inline evaluation::RoutingTrace random_trace(std::size_t T, std::size_t L, std::size_t N, std::size_t V, std::uint64_t seed) {
  evaluation::RoutingTrace tr(T, L, N, V);
  RandomStream s(seed, "trace");
  for (std::size_t j = 0; j < tr.index.size(); ++j) tr.index[j] = static_cast<std::uint16_t>(s.below(j, V));
  return tr;
}

}  // namespace roar::testing
