#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mimoshape/model.hpp"
#include "mimoshape/parallel.hpp"
#include "mimoshape/rng.hpp"

namespace mimoshape {

/// The static 2x2 channel [[2, 1], [1, 2]].
inline PhysicalChannel constant_channel() {
  CMatrix h(2, 2);
  h << 2.0, 1.0, 1.0, 2.0;
  return make_physical_channel(h);
}

/// i.i.d. CN(0, 1) entries, a pure function of (seed, index).
inline PhysicalChannel rayleigh_sample(Eigen::Index rx, Eigen::Index tx, std::uint64_t seed, std::uint64_t index) {
  if (rx < 1 || tx < 1) throw std::invalid_argument("rayleigh_sample: dimensions must be >= 1");
  const CounterRng rng(derive_key(seed, {0x7261796c65696768ULL, index}));
  CMatrix h(rx, tx);
  std::uint64_t c = 0;
  for (Eigen::Index j = 0; j < tx; ++j)
    for (Eigen::Index i = 0; i < rx; ++i) h(i, j) = rng.complex_normal(c++);
  return make_physical_channel(h);
}

struct EnsembleCurve {
  std::vector<double> mean;                       // per evaluation point
  std::vector<std::vector<double>> per_channel;   // [channel][point]
};

/// Evaluates `per_channel(index)` (one value per curve point) for every
/// channel index in [0, count) and averages point-wise.  The reduction runs
/// in channel-index order regardless of `threads`.
template <class PerChannel>
EnsembleCurve ensemble_average(std::size_t count, PerChannel&& per_channel, unsigned threads = 1) {
  if (count < 1) throw std::invalid_argument("ensemble_average: count must be >= 1");
  EnsembleCurve out;
  out.per_channel.resize(count);
  parallel_for(count, threads, [&](std::size_t c) { out.per_channel[c] = per_channel(c); });
  const std::size_t points = out.per_channel.front().size();
  out.mean.assign(points, 0.0);
  for (const auto& row : out.per_channel) {
    if (row.size() != points) throw std::invalid_argument("ensemble_average: ragged per-channel results");
    for (std::size_t k = 0; k < points; ++k) out.mean[k] += row[k];
  }
  for (double& m : out.mean) m /= static_cast<double>(count);
  return out;
}

}  // namespace mimoshape
