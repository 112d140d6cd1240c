#pragma once

// Channel, precoder and constellation data model for the parallelized
// MIMO link
//
//     y_bar = diag(gains) * diag(power) * rotation * (delta .* x) + v,
//
// obtained from y = H G (delta .* x) + v by taking the SVD of H and choosing
// the precoder's left singular basis equal to H's right singular basis.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SVD>

#include "mimoshape/types.hpp"

namespace mimoshape {

struct PhysicalChannel {
  CMatrix entries;  // N_r x N_t

  Eigen::Index rx() const { return entries.rows(); }
  Eigen::Index tx() const { return entries.cols(); }
};

inline PhysicalChannel make_physical_channel(CMatrix entries) {
  if (entries.rows() < 1 || entries.cols() < 1)
    throw std::invalid_argument("channel matrix must be at least 1x1");
  if (!entries.allFinite()) throw std::invalid_argument("channel matrix has non-finite entries");
  return PhysicalChannel{std::move(entries)};
}

struct EquivalentChannel {
  RVector gains;          // non-increasing, >= 0, length min(N_r, N_t)
  double noise_variance;  // sigma^2, total per complex dimension

  Eigen::Index streams() const { return gains.size(); }
};

inline EquivalentChannel make_equivalent_channel(RVector gains, double noise_variance) {
  if (gains.size() < 1) throw std::invalid_argument("equivalent channel needs at least one gain");
  if (!gains.allFinite() || (gains.array() < 0.0).any())
    throw std::invalid_argument("channel gains must be finite and nonnegative");
  for (Eigen::Index i = 1; i < gains.size(); ++i)
    if (gains[i] > gains[i - 1]) throw std::invalid_argument("channel gains must be non-increasing");
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance))
    throw std::invalid_argument("noise variance must be positive and finite");
  return EquivalentChannel{std::move(gains), noise_variance};
}

struct SvdReduction {
  RVector gains;  // singular values, non-increasing, length min(N_r, N_t)
  CMatrix left;   // U_H, N_r x N_min
  CMatrix right;  // V_H, N_t x N_min
};

/// Thin SVD of H; reconstruct with left * gains.asDiagonal() * right.adjoint().
inline SvdReduction svd_reduce(const PhysicalChannel& channel) {
  if (!channel.entries.allFinite()) throw std::invalid_argument("channel matrix has non-finite entries");
  Eigen::JacobiSVD<CMatrix> svd(channel.entries, Eigen::ComputeThinU | Eigen::ComputeThinV);
  // JacobiSVD already sorts singular values in decreasing order.
  return SvdReduction{svd.singularValues(), svd.matrixU(), svd.matrixV()};
}

/// Rescales gains so that sum(gains^2) == tx_antennas.
inline RVector normalize_gains(const RVector& gains, Eigen::Index tx_antennas) {
  if (tx_antennas < 1) throw std::invalid_argument("normalize: tx antenna count must be positive");
  const double energy = gains.squaredNorm();
  if (!(energy > 0.0) || !std::isfinite(energy))
    throw std::invalid_argument("normalize: gains must contain a positive entry");
  return gains * std::sqrt(static_cast<double>(tx_antennas) / energy);
}

inline RVector normalize_gains(const RVector& gains) { return normalize_gains(gains, gains.size()); }

struct PrecoderState {
  RVector power;     // diagonal of Sigma_G (amplitudes)
  CMatrix rotation;  // Phi, unitary
  double budget;     // P = sum(power^2)

  Eigen::Index streams() const { return power.size(); }

  /// Equal power with identity rotation.
  static PrecoderState initial(Eigen::Index streams, double budget) {
    if (streams < 1) throw std::invalid_argument("precoder needs at least one stream");
    if (!(budget > 0.0)) throw std::invalid_argument("power budget must be positive");
    return PrecoderState{RVector::Constant(streams, std::sqrt(budget / static_cast<double>(streams))),
                         CMatrix::Identity(streams, streams), budget};
  }
};

inline double unitarity_error(const CMatrix& m) {
  return (m * m.adjoint() - CMatrix::Identity(m.rows(), m.cols())).norm();
}

inline void validate(const PrecoderState& s, double tol = 1e-10) {
  if (s.power.size() < 1 || s.rotation.rows() != s.power.size() || s.rotation.cols() != s.power.size())
    throw std::invalid_argument("precoder dimensions are inconsistent");
  if (!(s.budget > 0.0)) throw std::invalid_argument("power budget must be positive");
  if ((s.power.array() < 0.0).any()) throw std::invalid_argument("power entries must be nonnegative");
  if (std::abs(s.power.squaredNorm() - s.budget) > tol * s.budget)
    throw std::invalid_argument("power allocation violates the budget");
  if (unitarity_error(s.rotation) > tol) throw std::invalid_argument("rotation is not unitary");
}

/// Square M-QAM alphabet with in-phase and quadrature parts in
/// {+-1, +-3, ..., +-(sqrt(M)-1)}; in-phase ascending outer, quadrature
/// ascending inner.
inline std::vector<Complex> qam_alphabet(int order) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(order))));
  if (order < 4 || side * side != order || (order & (order - 1)) != 0)
    throw std::invalid_argument("QAM order must be a square power of two, got " + std::to_string(order));
  std::vector<Complex> points;
  points.reserve(static_cast<std::size_t>(order));
  for (int a = 0; a < side; ++a)
    for (int b = 0; b < side; ++b)
      points.emplace_back(2.0 * a - (side - 1), 2.0 * b - (side - 1));
  return points;
}

/// Per-antenna symbol distribution p_i = A exp(lambda |x_i|^2) and scaling
/// delta with delta^2 * E|x|^2 = 1.  Build through shaping.hpp.
struct AntennaShaping {
  std::vector<Complex> alphabet;
  double lambda = 0.0;
  double delta = 1.0;
  std::vector<double> probs;

  int order() const { return static_cast<int>(alphabet.size()); }
};

struct JointConstellation {
  CMatrix vectors;  // K x N_t, row k is the scaled symbol vector delta .* x_k
  RVector probs;    // K joint probabilities
  int order = 0;    // per-antenna alphabet size M

  Eigen::Index size() const { return vectors.rows(); }
  Eigen::Index antennas() const { return vectors.cols(); }
};

/// Enumerates the product constellation.  Antenna 0 varies slowest; within
/// an antenna the alphabet order is preserved.
inline JointConstellation build_joint(const std::vector<AntennaShaping>& shapings) {
  if (shapings.empty()) throw std::invalid_argument("build_joint: no antennas");
  const int m = shapings.front().order();
  for (const auto& s : shapings) {
    if (s.order() != m || static_cast<int>(s.probs.size()) != m)
      throw std::invalid_argument("build_joint: all antennas must share one alphabet size");
  }
  const auto n = static_cast<Eigen::Index>(shapings.size());
  Eigen::Index total = 1;
  for (Eigen::Index j = 0; j < n; ++j) total *= m;

  JointConstellation joint;
  joint.order = m;
  joint.vectors.resize(total, n);
  joint.probs.resize(total);
  for (Eigen::Index k = 0; k < total; ++k) {
    Eigen::Index rest = k;
    double p = 1.0;
    for (Eigen::Index j = n - 1; j >= 0; --j) {
      const auto idx = static_cast<std::size_t>(rest % m);
      rest /= m;
      const auto& s = shapings[static_cast<std::size_t>(j)];
      joint.vectors(k, j) = s.delta * s.alphabet[idx];
      p *= s.probs[idx];
    }
    joint.probs[k] = p;
  }
  return joint;
}

/// diag(gains) * diag(power) * rotation * symbol + noise.
inline CVector synthesize_output(const EquivalentChannel& eq, const PrecoderState& prec,
                                 const CVector& scaled_symbol, const CVector& noise) {
  const auto n = eq.streams();
  if (prec.streams() != n || prec.rotation.rows() != n || scaled_symbol.size() != n || noise.size() != n)
    throw std::invalid_argument("synthesize_output: dimension mismatch");
  const CVector rotated = prec.rotation * scaled_symbol;
  return (eq.gains.array() * prec.power.array()).matrix().cast<Complex>().cwiseProduct(rotated) + noise;
}

/// Effective matrix diag(gains .* power) * rotation acting on the scaled symbols.
inline CMatrix effective_matrix(const EquivalentChannel& eq, const PrecoderState& prec) {
  if (prec.streams() != eq.streams()) throw std::invalid_argument("precoder/channel stream count mismatch");
  const RVector gp = eq.gains.cwiseProduct(prec.power);
  return gp.cast<Complex>().asDiagonal() * prec.rotation;
}

}  // namespace mimoshape
