#pragma once

// Deterministic mutual information of a scalar discrete-input channel
// y = g * p * (delta x) + v, v ~ CN(0, sigma^2), by tensorized Gauss-Hermite
// quadrature over the complex noise plane.  Used to cross-check the
// Monte-Carlo estimator and wherever a noise-free scalar MI is needed.

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mimoshape/model.hpp"
#include "mimoshape/types.hpp"

namespace mimoshape {

/// Nodes and weights for integral f(x) exp(-x^2) dx (Golub-Welsch).
struct GaussHermite {
  RVector nodes;
  RVector weights;

  explicit GaussHermite(int n) {
    if (n < 1) throw std::invalid_argument("Gauss-Hermite rule needs at least one node");
    RMatrix jacobi = RMatrix::Zero(n, n);
    for (int k = 1; k < n; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(0.5 * k);
    Eigen::SelfAdjointEigenSolver<RMatrix> eig(jacobi);
    nodes = eig.eigenvalues();
    weights = std::sqrt(std::numbers::pi) * eig.eigenvectors().row(0).transpose().array().square();
  }

  static std::shared_ptr<const GaussHermite> cached(int n) {
    static std::mutex m;
    static std::map<int, std::shared_ptr<const GaussHermite>> cache;
    std::lock_guard lock(m);
    auto& slot = cache[n];
    if (!slot) slot = std::make_shared<const GaussHermite>(n);
    return slot;
  }
};

inline constexpr int kOracleNodes = 64;

struct ScalarMi {
  double bits;
  double slope;  // dI/d(amplitude), amplitude = gain * power
};

/// Scalar MI and its derivative with respect to the amplitude gain*power.
inline ScalarMi mi_oracle_1d_with_slope(double amplitude, const AntennaShaping& shaping, double noise_variance,
                                        int nodes = kOracleNodes) {
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance))
    throw std::invalid_argument("mi_oracle_1d: noise variance must be positive");
  if (shaping.probs.size() != shaping.alphabet.size() || shaping.alphabet.empty())
    throw std::invalid_argument("mi_oracle_1d: malformed shaping");
  std::vector<Complex> sym;
  std::vector<double> prob;
  for (std::size_t i = 0; i < shaping.alphabet.size(); ++i)
    if (shaping.probs[i] > 0.0) {
      sym.push_back(shaping.delta * shaping.alphabet[i]);
      prob.push_back(shaping.probs[i]);
    }
  const auto gh = GaussHermite::cached(nodes);
  const double sigma = std::sqrt(noise_variance);
  const std::size_t m = sym.size();
  std::vector<double> expo(m), w(m), logp(m);
  for (std::size_t p = 0; p < m; ++p) logp[p] = std::log(prob[p]);

  double value = 0.0, slope = 0.0;
  for (int a = 0; a < nodes; ++a) {
    for (int b = 0; b < nodes; ++b) {
      const Complex v = sigma * Complex(gh->nodes[a], gh->nodes[b]);
      const double wt = gh->weights[a] * gh->weights[b] / std::numbers::pi;
      double f = 0.0, df = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < m; ++p) {
          const Complex e = sym[i] - sym[p];
          const double a_ip = (std::norm(amplitude * e + v) - std::norm(v)) / noise_variance;
          expo[p] = logp[p] - a_ip;
          top = std::max(top, expo[p]);
        }
        double s = 0.0, ds = 0.0;
        for (std::size_t p = 0; p < m; ++p) {
          w[p] = std::exp(expo[p] - top);
          s += w[p];
          const Complex e = sym[i] - sym[p];
          ds += w[p] * 2.0 * std::real(std::conj(amplitude * e + v) * e) / noise_variance;
        }
        f -= prob[i] * (top + std::log(s));
        df += prob[i] * ds / s;
      }
      value += wt * f;
      slope += wt * df;
    }
  }
  return {value / kLn2, slope / kLn2};
}

inline double mi_oracle_1d(double gain, double power, const AntennaShaping& shaping, double noise_variance,
                           int nodes = kOracleNodes) {
  return mi_oracle_1d_with_slope(gain * power, shaping, noise_variance, nodes).bits;
}

}  // namespace mimoshape
