#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mimoshape/types.hpp"

namespace mimoshape {

inline RVector equal_power(Eigen::Index streams, double budget) {
  if (streams < 1) throw std::invalid_argument("equal_power: need at least one stream");
  if (!(budget > 0.0)) throw std::invalid_argument("equal_power: budget must be positive");
  return RVector::Constant(streams, std::sqrt(budget / static_cast<double>(streams)));
}

/// Classic waterfilling for Gaussian inputs.  Returns amplitudes with
/// power_i^2 = max(0, w - sigma^2 / gains_i^2) and sum(power^2) = budget.
/// Exact active-set solution.
inline RVector waterfilling(const RVector& gains, double budget, double noise_variance) {
  if (!(budget > 0.0)) throw std::invalid_argument("waterfilling: budget must be positive");
  if (!(noise_variance > 0.0)) throw std::invalid_argument("waterfilling: noise variance must be positive");
  if (gains.size() < 1 || !(gains.maxCoeff() > 0.0))
    throw std::invalid_argument("waterfilling: need at least one positive gain");
  const auto n = gains.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return gains[a] > gains[b]; });

  // Largest active set whose water level stays above every member's floor.
  double level = 0.0;
  double floor_sum = 0.0;
  Eigen::Index active = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double g = gains[order[static_cast<std::size_t>(k)]];
    if (!(g > 0.0)) break;
    const double floor_k = noise_variance / (g * g);
    const double candidate = (budget + floor_sum + floor_k) / static_cast<double>(k + 1);
    if (candidate <= floor_k) break;
    floor_sum += floor_k;
    level = candidate;
    active = k + 1;
  }
  RVector power = RVector::Zero(n);
  for (Eigen::Index k = 0; k < active; ++k) {
    const auto i = order[static_cast<std::size_t>(k)];
    power[i] = std::sqrt(std::max(0.0, level - noise_variance / (gains[i] * gains[i])));
  }
  // Remove rounding drift so the budget holds to machine precision.
  return power * std::sqrt(budget / power.squaredNorm());
}

/// sum_i log2(1 + gains_i^2 power_i^2 / sigma^2)
inline double gaussian_capacity(const RVector& gains, const RVector& power, double noise_variance) {
  if (gains.size() != power.size()) throw std::invalid_argument("gaussian_capacity: size mismatch");
  if (!(noise_variance > 0.0)) throw std::invalid_argument("gaussian_capacity: noise variance must be positive");
  double c = 0.0;
  for (Eigen::Index i = 0; i < gains.size(); ++i)
    c += std::log2(1.0 + gains[i] * gains[i] * power[i] * power[i] / noise_variance);
  return c;
}

}  // namespace mimoshape
