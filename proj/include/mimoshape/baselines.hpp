#pragma once

// Reference power-allocation strategies for comparison curves.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "mimoshape/optimizer.hpp"
#include "mimoshape/oracle.hpp"
#include "mimoshape/waterfilling.hpp"

namespace mimoshape {

/// Per-channel scalar MI as a function of the amplitude gain*power.
using ScalarMiFn = std::function<ScalarMi(double amplitude)>;

inline ScalarMiFn gaussian_scalar_mi(double noise_variance) {
  return [noise_variance](double a) {
    const double snr = a * a / noise_variance;
    return ScalarMi{std::log2(1.0 + snr), 2.0 * a / (noise_variance * (1.0 + snr) * kLn2)};
  };
}

inline ScalarMiFn discrete_scalar_mi(const AntennaShaping& shaping, double noise_variance,
                                     int nodes = kOracleNodes) {
  return [shaping, noise_variance, nodes](double a) {
    return mi_oracle_1d_with_slope(a, shaping, noise_variance, nodes);
  };
}

struct MercuryResult {
  RVector power;
  double kkt_residual = 0.0;  // relative spread of marginal MI per unit power
  int iterations = 0;
};

namespace detail {

/// Marginal MI per unit power dI/d(power^2) on each channel.  Channels with
/// zero power use the small-SNR limit g^2 / (sigma^2 ln 2), valid for any
/// zero-mean unit-power input.
inline RVector marginals(const RVector& gains, const RVector& power, const RVector& grad, double noise_variance) {
  RVector eta(gains.size());
  for (Eigen::Index i = 0; i < gains.size(); ++i)
    eta[i] = power[i] > 0.0 ? grad[i] / (2.0 * power[i]) : gains[i] * gains[i] / (noise_variance * kLn2);
  return eta;
}

inline double kkt_residual(const RVector& gains, const RVector& power, const RVector& grad, double budget,
                           double noise_variance) {
  const RVector eta = marginals(gains, power, grad, noise_variance);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
  int active = 0;
  for (Eigen::Index i = 0; i < gains.size(); ++i)
    if (power[i] * power[i] > 1e-12 * budget) {
      lo = std::min(lo, eta[i]);
      hi = std::max(hi, eta[i]);
      sum += eta[i];
      ++active;
    }
  if (active == 0) return std::numeric_limits<double>::infinity();
  const double mean = sum / active;
  double r = (hi - lo) / mean;
  for (Eigen::Index i = 0; i < gains.size(); ++i)
    if (power[i] * power[i] <= 1e-12 * budget && gains[i] > 0.0) r = std::max(r, (eta[i] - lo) / mean);
  return std::max(r, 0.0);
}

}  // namespace detail

/// Maximizes sum_i I_i(gains_i * power_i) subject to sum(power^2) = budget by
/// projected gradient ascent from the waterfilling allocation.
inline MercuryResult mercury_waterfilling(const RVector& gains, double budget, double noise_variance,
                                          const std::vector<ScalarMiFn>& channel_mi) {
  if (channel_mi.size() != static_cast<std::size_t>(gains.size()))
    throw std::invalid_argument("mercury_waterfilling: one MI function per channel required");
  const auto n = gains.size();
  auto evaluate = [&](const RVector& p, RVector& grad) {
    double f = 0.0;
    grad.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto s = channel_mi[static_cast<std::size_t>(i)](gains[i] * p[i]);
      f += s.bits;
      grad[i] = gains[i] * s.slope;
    }
    return f;
  };

  RVector p = waterfilling(gains, budget, noise_variance);
  RVector grad;
  double f = evaluate(p, grad);
  // Waterfilling may switch a channel off that the discrete-input optimum
  // uses; restart from a lifted point if that is the better start.
  if ((p.array() <= 0.0).any()) {
    RVector lifted = p.cwiseMax(1e-3 * std::sqrt(budget));
    for (Eigen::Index i = 0; i < n; ++i)
      if (!(gains[i] > 0.0)) lifted[i] = 0.0;
    lifted = project_power(lifted, budget);
    RVector g2;
    const double f2 = evaluate(lifted, g2);
    if (detail::kkt_residual(gains, p, grad, budget, noise_variance) > 1e-4 || f2 > f) {
      p = lifted;
      grad = g2;
      f = f2;
    }
  }

  MercuryResult res;
  double mu = 1.0;
  for (int it = 0; it < 20000 && mu >= 1e-8; ++it) {
    // Tangent direction on the sphere sum(p^2) = budget.
    const RVector dir = grad - (grad.dot(p) / p.squaredNorm()) * p;
    const double dn = dir.squaredNorm();
    if (!(dn > 0.0)) break;
    RVector cand = project_power(p + mu * dir, budget);
    RVector gc;
    const double fc = evaluate(cand, gc);
    if (fc >= f + 1e-4 * mu * dn && fc > f) {
      p = cand;
      grad = gc;
      f = fc;
      ++res.iterations;
      mu = std::min(mu * 2.0, 1e6);
    } else {
      mu *= 0.5;
    }
  }
  res.power = p;
  res.kkt_residual = detail::kkt_residual(gains, p, grad, budget, noise_variance);
  return res;
}

/// Mercury waterfilling for uniform QAM on every channel, using the
/// deterministic scalar oracle.
inline MercuryResult mercury_waterfilling(const RVector& gains, double budget, double noise_variance, int order) {
  const auto shaping = uniform_shaping(order);
  std::vector<ScalarMiFn> fns(static_cast<std::size_t>(gains.size()), discrete_scalar_mi(shaping, noise_variance));
  return mercury_waterfilling(gains, budget, noise_variance, fns);
}

/// Optimized precoder for uniformly distributed QAM: the joint loop with the
/// distribution step disabled.
inline OptReport uniform_input_precoder(const EquivalentChannel& eq, int order, double budget, const McConfig& mc,
                                        const OptConfig& cfg) {
  const auto init = initial_joint_state(eq, order, budget, cfg.warm_start_waterfilling);
  return joint_optimize(eq, init, mc, cfg, false);
}

}  // namespace mimoshape
