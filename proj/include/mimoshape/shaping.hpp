#pragma once

// Maxwell-Boltzmann shaping of a QAM alphabet.  A shaping is fully described
// by one real parameter; we expose both the exponent lambda and the scaling
// delta (delta^-2 is the mean symbol energy) and convert between them.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "mimoshape/model.hpp"

namespace mimoshape {

namespace detail {

inline std::vector<double> energies(const std::vector<Complex>& alphabet) {
  std::vector<double> e(alphabet.size());
  std::transform(alphabet.begin(), alphabet.end(), e.begin(), [](Complex x) { return std::norm(x); });
  return e;
}

struct EnergyMoments {
  double mean;
  double variance;
};

inline EnergyMoments energy_moments(double lambda, const std::vector<double>& e) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : e) top = std::max(top, lambda * v);
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  for (double v : e) {
    const double w = std::exp(lambda * v - top);
    z += w;
    m1 += w * v;
    m2 += w * v * v;
  }
  const double mean = m1 / z;
  return {mean, std::max(0.0, m2 / z - mean * mean)};
}

}  // namespace detail

inline std::vector<double> mb_probs(double lambda, const std::vector<Complex>& alphabet) {
  if (alphabet.empty()) throw std::invalid_argument("mb_probs: empty alphabet");
  if (!std::isfinite(lambda)) throw std::invalid_argument("mb_probs: lambda must be finite");
  const auto e = detail::energies(alphabet);
  for (double v : e)
    if (!std::isfinite(v)) throw std::invalid_argument("mb_probs: alphabet has non-finite points");
  double top = -std::numeric_limits<double>::infinity();
  for (double v : e) top = std::max(top, lambda * v);
  std::vector<double> p(e.size());
  double z = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) z += (p[i] = std::exp(lambda * e[i] - top));
  for (double& v : p) v /= z;
  return p;
}

/// Mean of |x|^2 under mb_probs(lambda).
inline double mean_energy(double lambda, const std::vector<Complex>& alphabet) {
  return detail::energy_moments(lambda, detail::energies(alphabet)).mean;
}

struct DeltaRange {
  double lo;
  double hi;
};

/// Scalings reachable by Maxwell-Boltzmann shaping of square M-QAM:
/// [1/(sqrt(2)(sqrt(M)-1)), 1/sqrt(2)].
inline DeltaRange delta_range(int order) {
  if (order != 4 && order != 16 && order != 64 && order != 256)
    throw std::invalid_argument("delta_range: unsupported QAM order " + std::to_string(order));
  const double side = std::sqrt(static_cast<double>(order));
  return {1.0 / (std::sqrt(2.0) * (side - 1.0)), 1.0 / std::sqrt(2.0)};
}

/// Scaling of the uniform distribution, sqrt(3 / (2 (M - 1))).
inline double uniform_delta(int order) { return std::sqrt(3.0 / (2.0 * (order - 1))); }

inline constexpr double kDeltaGuard = 1e-9;

/// Finds lambda such that the Maxwell-Boltzmann mean energy equals
/// delta^-2.  Safeguarded Newton on g(lambda) = E[|x|^2] - delta^-2 with
/// g' = Var[|x|^2] > 0, falling back to bisection.
inline double solve_lambda(double delta, const std::vector<Complex>& alphabet) {
  if (alphabet.empty()) throw std::invalid_argument("solve_lambda: empty alphabet");
  const auto e = detail::energies(alphabet);
  const auto [emin_it, emax_it] = std::minmax_element(e.begin(), e.end());
  const double lo_delta = 1.0 / std::sqrt(*emax_it);
  const double hi_delta = 1.0 / std::sqrt(*emin_it);
  if (!std::isfinite(delta) || delta <= lo_delta + kDeltaGuard || delta >= hi_delta - kDeltaGuard)
    throw std::out_of_range("solve_lambda: delta " + std::to_string(delta) + " outside feasible interval (" +
                            std::to_string(lo_delta) + ", " + std::to_string(hi_delta) + ")");
  const double target = 1.0 / (delta * delta);
  auto g = [&](double lam) {
    const auto m = detail::energy_moments(lam, e);
    return std::pair{m.mean - target, m.variance};
  };

  // Bracket the root; g is strictly increasing.
  double lo = 0.0, hi = 0.0;
  auto [g0, v0] = g(0.0);
  if (g0 == 0.0) return 0.0;
  if (g0 < 0.0) {
    hi = 1.0;
    while (g(hi).first < 0.0) { lo = hi; hi *= 2.0; }
  } else {
    lo = -1.0;
    while (g(lo).first > 0.0) { hi = lo; lo *= 2.0; }
  }

  double lam = 0.0, gv = g0, var = v0;
  for (int iter = 0; iter < 100; ++iter) {
    if (std::abs(gv) <= 1e-12) return lam;
    if (gv < 0.0) lo = lam; else hi = lam;
    double step = var > 0.0 ? -gv / var : 0.0;
    double next = lam + step;
    // Damp toward the bracket; a Newton step that still escapes becomes a bisection.
    for (int h = 0; h < 4 && !(next > lo && next < hi); ++h) {
      step *= 0.5;
      next = lam + step;
    }
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == lam) return lam;
    lam = next;
    std::tie(gv, var) = g(lam);
  }
  for (int iter = 0; iter < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * std::abs(lam); ++iter) {
    lam = 0.5 * (lo + hi);
    gv = g(lam).first;
    if (std::abs(gv) <= 1e-12) break;
    if (gv < 0.0) lo = lam; else hi = lam;
  }
  return lam;
}

inline AntennaShaping shaping_from_lambda(const std::vector<Complex>& alphabet, double lambda) {
  AntennaShaping s;
  s.alphabet = alphabet;
  s.lambda = lambda;
  s.probs = mb_probs(lambda, alphabet);
  double energy = 0.0;
  for (std::size_t i = 0; i < alphabet.size(); ++i) energy += s.probs[i] * std::norm(alphabet[i]);
  s.delta = 1.0 / std::sqrt(energy);
  return s;
}

/// Shaping whose scaling is exactly `delta`.  For alphabets with a single
/// energy level (4-QAM) only the uniform scaling is admissible.
inline AntennaShaping shaping_from_delta(const std::vector<Complex>& alphabet, double delta) {
  const auto e = detail::energies(alphabet);
  const auto [mn, mx] = std::minmax_element(e.begin(), e.end());
  AntennaShaping s;
  if (*mx - *mn <= 1e-12 * *mx) {
    if (std::abs(delta * delta * *mn - 1.0) > 1e-8)
      throw std::out_of_range("shaping_from_delta: constant-energy alphabet admits only delta = " +
                              std::to_string(1.0 / std::sqrt(*mn)));
    s.alphabet = alphabet;
    s.lambda = 0.0;
    s.probs.assign(alphabet.size(), 1.0 / static_cast<double>(alphabet.size()));
    s.delta = delta;
    return s;
  }
  s.alphabet = alphabet;
  s.lambda = solve_lambda(delta, alphabet);
  s.probs = mb_probs(s.lambda, alphabet);
  s.delta = delta;
  return s;
}

inline AntennaShaping uniform_shaping(int order) {
  const auto alphabet = qam_alphabet(order);
  AntennaShaping s;
  s.alphabet = alphabet;
  s.lambda = 0.0;
  s.probs.assign(alphabet.size(), 1.0 / static_cast<double>(order));
  s.delta = uniform_delta(order);
  return s;
}

/// Checks the AntennaShaping invariants; throws std::invalid_argument.
inline void validate(const AntennaShaping& s) {
  if (s.alphabet.empty() || s.probs.size() != s.alphabet.size())
    throw std::invalid_argument("shaping: alphabet/probability size mismatch");
  double sum = 0.0, energy = 0.0;
  for (std::size_t i = 0; i < s.probs.size(); ++i) {
    if (!(s.probs[i] >= 0.0)) throw std::invalid_argument("shaping: negative probability");
    sum += s.probs[i];
    energy += s.probs[i] * std::norm(s.alphabet[i]);
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("shaping: probabilities do not sum to one");
  if (!(s.delta > 0.0) || std::abs(s.delta * s.delta * energy - 1.0) > 1e-8)
    throw std::invalid_argument("shaping: scaling violates the unit power constraint");
}

inline double entropy_bits(const RVector& probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log2(p);
  return h;
}

inline double entropy_bits(const std::vector<double>& probs) {
  return entropy_bits(RVector(Eigen::Map<const RVector>(probs.data(), static_cast<Eigen::Index>(probs.size()))));
}

inline double input_entropy(const JointConstellation& joint) { return entropy_bits(joint.probs); }

}  // namespace mimoshape
