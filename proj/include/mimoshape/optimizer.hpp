#pragma once

// Alternating maximization of the mutual information over the power
// allocation, the unitary rotation and the per-antenna Maxwell-Boltzmann
// shaping.  Every accept/reject decision compares MI values computed with the
// same McConfig, so the comparisons carry no Monte-Carlo noise and the MI
// sequence seen by the optimizer is exactly non-decreasing.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mimoshape/mi_estimator.hpp"
#include "mimoshape/model.hpp"
#include "mimoshape/shaping.hpp"
#include "mimoshape/unitary.hpp"
#include "mimoshape/waterfilling.hpp"

namespace mimoshape {

struct OptConfig {
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  double initial_step = 1.0;
  double min_step = 1e-6;
  double delta_grid_step = 0.01;
  double outer_tol = 1e-3;  // bits
  int max_outer = 20;
  int max_inner = 50;   // gradient iterations per power/rotation call
  int max_sweeps = 20;  // coordinate-descent sweeps per distribution call
  bool warm_start_waterfilling = false;
};

inline void validate(const OptConfig& c) {
  auto fail = [](const std::string& f, const std::string& why) {
    throw std::invalid_argument("optimizer." + f + ": " + why);
  };
  if (!(c.armijo_c > 0.0 && c.armijo_c < 1.0)) fail("armijo_c", "must lie in (0, 1)");
  if (!(c.armijo_shrink > 0.0 && c.armijo_shrink < 1.0)) fail("armijo_shrink", "must lie in (0, 1)");
  if (!(c.initial_step > 0.0)) fail("initial_step", "must be positive");
  if (!(c.min_step > 0.0)) fail("min_step", "must be positive");
  if (!(c.delta_grid_step > 0.0)) fail("delta_grid_step", "must be positive");
  if (!(c.outer_tol > 0.0)) fail("outer_tol", "must be positive");
  if (c.max_outer < 1) fail("max_outer", "must be >= 1");
  if (c.max_inner < 1) fail("max_inner", "must be >= 1");
  if (c.max_sweeps < 1) fail("max_sweeps", "must be >= 1");
}

/// Clips negative entries and rescales onto sum(power^2) = budget.
inline RVector project_power(const RVector& candidate, double budget) {
  if (!(budget > 0.0)) throw std::invalid_argument("project_power: budget must be positive");
  const RVector clipped = candidate.cwiseMax(0.0);
  const double energy = clipped.squaredNorm();
  if (!(energy > 0.0) || !std::isfinite(energy))
    throw std::domain_error("project_power: no positive entry to project");
  return clipped * std::sqrt(budget / energy);
}

enum class Stage { initial, rotation, power, distribution };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::initial: return "initial";
    case Stage::rotation: return "rotation";
    case Stage::power: return "power";
    case Stage::distribution: return "distribution";
  }
  return "?";
}

struct StepRecord {
  Stage stage;
  int outer;
  double bits;  // same-seed MI after the accepted step
};

struct PrecoderStage {
  PrecoderState state;
  MiValue mi;
  int iterations = 0;
  std::vector<double> accepted;  // MI after each accepted step
};

struct DistributionStage {
  std::vector<AntennaShaping> shapings;
  MiValue mi;
  int sweeps = 0;
  std::vector<double> accepted;
};

/// Projected gradient ascent on the power diagonal with Armijo backtracking.
inline PrecoderStage optimize_power(const EquivalentChannel& eq, const PrecoderState& prec,
                                    const JointConstellation& joint, const McConfig& mc, const OptConfig& cfg) {
  validate(cfg);
  PrecoderStage out{prec, {}, 0, {}};
  auto g = estimate_with_gradients(eq, out.state, joint, mc);
  out.mi = g.mi;
  for (int it = 0; it < cfg.max_inner; ++it) {
    // Tangent step on the trace constraint: remove the mean of the gradient.
    const RVector dir = (g.power.array() - g.power.mean()).matrix();
    const double dn = dir.squaredNorm();
    if (!(dn > 0.0) || !std::isfinite(dn)) break;
    bool accepted = false;
    PrecoderState cand = out.state;
    MiValue cand_mi;
    for (double mu = cfg.initial_step; mu >= cfg.min_step; mu *= cfg.armijo_shrink) {
      try {
        cand.power = project_power(out.state.power + mu * dir, out.state.budget);
      } catch (const std::domain_error&) {
        continue;
      }
      cand_mi = estimate_mi(eq, cand, joint, mc);
      if (cand_mi.bits >= out.mi.bits + cfg.armijo_c * mu * dn) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    out.state = cand;
    out.mi = cand_mi;
    out.accepted.push_back(cand_mi.bits);
    ++out.iterations;
    g = estimate_with_gradients(eq, out.state, joint, mc);
  }
  return out;
}

/// Riemannian steepest ascent on the unitary group:
/// Phi <- exp(mu R) Phi with R = Gamma Phi^H - Phi Gamma^H.
inline PrecoderStage optimize_rotation(const EquivalentChannel& eq, const PrecoderState& prec,
                                       const JointConstellation& joint, const McConfig& mc, const OptConfig& cfg) {
  validate(cfg);
  PrecoderStage out{prec, {}, 0, {}};
  auto g = estimate_with_gradients(eq, out.state, joint, mc);
  out.mi = g.mi;
  for (int it = 0; it < cfg.max_inner; ++it) {
    const CMatrix r = g.rotation * out.state.rotation.adjoint() - out.state.rotation * g.rotation.adjoint();
    // d/dmu I(exp(mu R) Phi) at mu = 0 equals |R|_F^2.
    const double dn = r.squaredNorm();
    if (!(dn > 0.0) || !std::isfinite(dn)) break;
    bool accepted = false;
    PrecoderState cand = out.state;
    MiValue cand_mi;
    for (double mu = cfg.initial_step; mu >= cfg.min_step; mu *= cfg.armijo_shrink) {
      cand.rotation = expm_skew_hermitian(r, mu) * out.state.rotation;
      if (unitarity_error(cand.rotation) > 1e-12) cand.rotation = nearest_unitary(cand.rotation);
      cand_mi = estimate_mi(eq, cand, joint, mc);
      if (cand_mi.bits >= out.mi.bits + cfg.armijo_c * mu * dn) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    out.state = cand;
    out.mi = cand_mi;
    out.accepted.push_back(cand_mi.bits);
    ++out.iterations;
    g = estimate_with_gradients(eq, out.state, joint, mc);
  }
  return out;
}

/// Candidate scalings for one antenna: the grid lo + t*step strictly inside
/// the feasible interval, plus the uniform point.
inline std::vector<double> delta_grid(int order, double step) {
  const auto range = delta_range(order);
  std::vector<double> grid;
  if (range.hi - range.lo <= 2.0 * kDeltaGuard) return grid;
  for (int t = 0;; ++t) {
    const double d = range.lo + t * step;
    if (d >= range.hi - 2.0 * kDeltaGuard) break;
    if (d > range.lo + 2.0 * kDeltaGuard) grid.push_back(d);
  }
  const double u = uniform_delta(order);
  if (std::none_of(grid.begin(), grid.end(), [&](double d) { return d == u; })) grid.push_back(u);
  std::sort(grid.begin(), grid.end());
  return grid;
}

/// Coordinate ascent over the per-antenna scalings on a grid of step delta.
inline DistributionStage optimize_distribution(const EquivalentChannel& eq, const PrecoderState& prec,
                                               const std::vector<AntennaShaping>& shapings, const McConfig& mc,
                                               const OptConfig& cfg) {
  validate(cfg);
  DistributionStage out{shapings, {}, 0, {}};
  out.mi = estimate_mi(eq, prec, build_joint(out.shapings), mc);
  if (shapings.empty()) return out;
  const int order = shapings.front().order();
  const auto grid = delta_grid(order, cfg.delta_grid_step);
  if (grid.empty()) return out;  // single energy level: nothing to shape

  const auto alphabet = shapings.front().alphabet;
  std::vector<AntennaShaping> table;
  table.reserve(grid.size());
  for (double d : grid) table.push_back(d == uniform_delta(order) ? uniform_shaping(order) : shaping_from_delta(alphabet, d));
  const double du = uniform_delta(order);

  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    const double start = out.mi.bits;
    for (std::size_t j = 0; j < out.shapings.size(); ++j) {
      AntennaShaping best = out.shapings[j];
      MiValue best_mi = out.mi;
      auto trial = out.shapings;
      for (const auto& cand : table) {
        if (cand.delta == best.delta && cand.lambda == best.lambda) continue;
        trial[j] = cand;
        const auto mi = estimate_mi(eq, prec, build_joint(trial), mc);
        const bool better = mi.bits > best_mi.bits ||
                            (mi.bits == best_mi.bits && std::abs(cand.delta - du) < std::abs(best.delta - du));
        if (better) {
          best = cand;
          best_mi = mi;
        }
      }
      if (best.delta != out.shapings[j].delta || best.lambda != out.shapings[j].lambda) {
        out.shapings[j] = best;
        out.mi = best_mi;
        out.accepted.push_back(best_mi.bits);
      }
    }
    ++out.sweeps;
    if (out.mi.bits - start <= cfg.outer_tol) break;
  }
  return out;
}

struct JointState {
  PrecoderState precoder;
  std::vector<AntennaShaping> shapings;
};

/// Equal power (or waterfilling when warm-started), identity rotation,
/// uniform QAM on every stream.
inline JointState initial_joint_state(const EquivalentChannel& eq, int order, double budget,
                                      bool warm_start_waterfilling = false) {
  JointState s{PrecoderState::initial(eq.streams(), budget),
               std::vector<AntennaShaping>(static_cast<std::size_t>(eq.streams()), uniform_shaping(order))};
  if (warm_start_waterfilling) s.precoder.power = waterfilling(eq.gains, budget, eq.noise_variance);
  return s;
}

struct OptReport {
  std::vector<MiValue> mi_trace;  // initial value, then one per outer iteration
  std::vector<StepRecord> steps;  // every accepted step, in order
  PrecoderState precoder;
  std::vector<AntennaShaping> shapings;
  int outer_iterations = 0;
  int rotation_iterations = 0;
  int power_iterations = 0;
  int distribution_sweeps = 0;
};

/// Alternates rotation, power and distribution updates until the outer MI
/// gain drops to outer_tol or max_outer is reached.  With
/// shape_distribution = false the shaping stays at its initial value.
inline OptReport joint_optimize(const EquivalentChannel& eq, const JointState& initial, const McConfig& mc,
                                const OptConfig& cfg, bool shape_distribution = true) {
  validate(cfg);
  validate(initial.precoder);
  for (const auto& s : initial.shapings) validate(s);
  OptReport rep;
  rep.precoder = initial.precoder;
  rep.shapings = initial.shapings;
  rep.mi_trace.push_back(estimate_mi(eq, rep.precoder, build_joint(rep.shapings), mc));
  rep.steps.push_back({Stage::initial, 0, rep.mi_trace.back().bits});

  for (int k = 1; k <= cfg.max_outer; ++k) {
    const auto joint = build_joint(rep.shapings);
    const auto rot = optimize_rotation(eq, rep.precoder, joint, mc, cfg);
    for (double b : rot.accepted) rep.steps.push_back({Stage::rotation, k, b});
    rep.rotation_iterations += rot.iterations;

    const auto pow = optimize_power(eq, rot.state, joint, mc, cfg);
    for (double b : pow.accepted) rep.steps.push_back({Stage::power, k, b});
    rep.power_iterations += pow.iterations;
    rep.precoder = pow.state;
    MiValue current = pow.mi;

    if (shape_distribution) {
      const auto dist = optimize_distribution(eq, rep.precoder, rep.shapings, mc, cfg);
      for (double b : dist.accepted) rep.steps.push_back({Stage::distribution, k, b});
      rep.distribution_sweeps += dist.sweeps;
      rep.shapings = dist.shapings;
      current = dist.mi;
    }
    const double gain = current.bits - rep.mi_trace.back().bits;
    rep.mi_trace.push_back(current);
    rep.outer_iterations = k;
    if (gain <= cfg.outer_tol) break;
  }
  return rep;
}

}  // namespace mimoshape
