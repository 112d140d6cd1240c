#pragma once

// Monte-Carlo estimate of the mutual information I(x; y_bar) of the
// parallelized discrete-input link and its analytic gradients.
//
// With c_i = A y_i (A the effective matrix, y_i the scaled symbol vectors)
// and a_ip = (|c_i - c_p + v|^2 - |v|^2) / sigma^2,
//
//     I = -sum_i p_i E_v[ log2 sum_p p_p exp(-a_ip) ].
//
// Each noise draw v_s contributes one term m_s; the estimate is their mean.
// Noise draws come from a counter-based generator keyed by (seed, s), so
// the same McConfig always reproduces the same samples ("common random
// numbers"), and the result does not depend on the number of threads.
//
// Evaluation: a_ip = D_ip + 2 (u_i - u_p) / sigma^2 with
// D_ip = |c_i - c_p|^2 / sigma^2 and u_p = Re(c_p^H v).  Writing
// b_p = exp(beta_p - max beta) with beta_p = log p_p + 2 u_p / sigma^2 turns
// the inner sum into (E b)_i, E_ip = exp(-D_ip).  For a fixed-width chunk of
// samples all inner sums are one matrix product.  Rows whose diagonal term
// would underflow are recomputed with a direct log-sum-exp.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#if defined(__SSE__) || defined(_M_X64)
#include <pmmintrin.h>
#include <xmmintrin.h>
#define MIMOSHAPE_HAVE_FTZ 1
#endif

#include "mimoshape/model.hpp"
#include "mimoshape/parallel.hpp"
#include "mimoshape/rng.hpp"
#include "mimoshape/types.hpp"

namespace mimoshape {

struct McConfig {
  std::size_t sample_count = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;  // 0 = hardware concurrency; never changes results
};

inline void validate(const McConfig& mc) {
  if (mc.sample_count < 1) throw std::invalid_argument("McConfig: sample_count must be >= 1");
}

struct MiValue {
  double bits = 0.0;
  double std_error = 0.0;
};

struct MiGradients {
  MiValue mi;
  RVector power;     // dI/d power_k (real partial derivatives, bits per amplitude unit)
  CMatrix rotation;  // dI/d conj(rotation), Wirtinger convention
};

namespace detail {

inline constexpr Eigen::Index kChunk = 32;
inline constexpr double kUnderflowGuard = 1e-250;

/// Pairwise sum with a topology fixed by the length alone.
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

/// Flushes subnormals to zero for the lifetime of the guard.  Terms that
/// small are below the rounding error of every sum they enter.
class FlushSubnormals {
 public:
#ifdef MIMOSHAPE_HAVE_FTZ
  FlushSubnormals() : saved_(_mm_getcsr()) {
    _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
    _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
  }
  ~FlushSubnormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#else
  FlushSubnormals() = default;
#endif
  FlushSubnormals(const FlushSubnormals&) = delete;
  FlushSubnormals& operator=(const FlushSubnormals&) = delete;
};

class MiKernel {
 public:
  MiKernel(const CMatrix& effective, const JointConstellation& joint, double noise_variance)
      : n_(joint.antennas()), a_(effective), inv_var_(1.0 / noise_variance) {
    if (!(noise_variance > 0.0) || !std::isfinite(noise_variance))
      throw std::invalid_argument("mutual information: noise variance must be positive");
    if (effective.rows() != n_ || effective.cols() != n_)
      throw std::invalid_argument("mutual information: constellation dimension does not match the precoder");
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < joint.size(); ++i)
      if (joint.probs[i] > 0.0) support.push_back(i);
    if (support.empty()) throw std::invalid_argument("mutual information: empty input distribution");
    k_ = static_cast<Eigen::Index>(support.size());
    y_.resize(k_, n_);
    p_.resize(k_);
    for (Eigen::Index i = 0; i < k_; ++i) {
      y_.row(i) = joint.vectors.row(support[static_cast<std::size_t>(i)]);
      p_[i] = joint.probs[support[static_cast<std::size_t>(i)]];
    }
    logp_ = p_.array().log();
    c_ = y_ * a_.transpose();
    d_.resize(k_, k_);
    for (Eigen::Index p = 0; p < k_; ++p)
      for (Eigen::Index i = 0; i < k_; ++i) d_(i, p) = (c_.row(i) - c_.row(p)).squaredNorm() * inv_var_;
    e_ = (-d_.array()).exp();
    e_ = (e_.array() < 1e-300).select(0.0, e_);
    cconj_ = c_.conjugate();
  }

  Eigen::Index streams() const { return n_; }
  Eigen::Index support_size() const { return k_; }

  /// Processes noise.col(0..count-1).  Writes one MI term (bits) per sample
  /// to mi_out; when psi_sum is non-null, adds sum_s dm_s/dA^* to it.
  void process(const CMatrix& noise, Eigen::Index count, double* mi_out, CMatrix* psi_sum,
               bool force_direct = false) const {
    const FlushSubnormals ftz;
    const bool grad = psi_sum != nullptr;
    const Eigen::Index ncols = grad ? 1 + 2 * n_ + n_ * n_ : 1;
    const Eigen::Index width = noise.cols();

    const RMatrix u = (cconj_ * noise).real();  // K x width
    RMatrix beta(k_, width);
    RVector beta_max(width);
    RMatrix rhs = RMatrix::Zero(k_, width * ncols);
    for (Eigen::Index s = 0; s < count; ++s) {
      beta.col(s) = logp_ + 2.0 * inv_var_ * u.col(s);
      beta_max[s] = beta.col(s).maxCoeff();
      rhs.col(s * ncols) = (beta.col(s).array() - beta_max[s]).exp().matrix();
      if (grad) fill_moment_columns(rhs, s * ncols);
    }
    RMatrix prod;
    if (!force_direct) prod.noalias() = e_ * rhs;

    CMatrix acc1(n_, n_), acc2(n_, n_), yw_buf(n_, 1), mw(n_, n_);
    CVector cv(n_);
    for (Eigen::Index s = 0; s < count; ++s) {
      const auto v = noise.col(s);
      const Eigen::Index base = s * ncols;
      double m_s = 0.0;
      if (grad) {
        acc1.setZero();
        acc2.setZero();
      }
      for (Eigen::Index i = 0; i < k_; ++i) {
        double lse;
        const bool direct = force_direct || rhs(i, base) < kUnderflowGuard || !(prod(i, base) > 0.0);
        if (direct) {
          lse = direct_row(i, beta.col(s), grad ? &yw_buf : nullptr, grad ? &mw : nullptr);
        } else {
          const double si = prod(i, base);
          lse = beta_max[s] + std::log(si);
          if (grad) moments_from_product(prod, i, base, si, yw_buf, mw);
        }
        m_s -= p_[i] * (lse - 2.0 * inv_var_ * u(i, s));
        if (grad) {
          // acc1 += p_i (c_i + v)(y_i - Yw)^H ;  acc2 += p_i (Mw - Yw y_i^H)
          for (Eigen::Index k = 0; k < n_; ++k) cv[k] = c_(i, k) + v[k];
          for (Eigen::Index l = 0; l < n_; ++l) {
            const Complex dy = std::conj(y_(i, l) - yw_buf(l, 0));
            const Complex yi = std::conj(y_(i, l));
            for (Eigen::Index k = 0; k < n_; ++k) {
              acc1(k, l) += p_[i] * cv[k] * dy;
              acc2(k, l) += p_[i] * (mw(k, l) - yw_buf(k, 0) * yi);
            }
          }
        }
      }
      mi_out[s] = m_s / kLn2;
      if (grad) {
        acc1.noalias() += a_ * acc2;
        *psi_sum += acc1 * (inv_var_ / kLn2);
      }
    }
  }

 private:
  void fill_moment_columns(RMatrix& rhs, Eigen::Index base) const {
    const auto b = rhs.col(base);
    Eigen::Index col = base + 1;
    for (Eigen::Index k = 0; k < n_; ++k) {
      rhs.col(col++) = b.cwiseProduct(y_.col(k).real());
      rhs.col(col++) = b.cwiseProduct(y_.col(k).imag());
    }
    for (Eigen::Index k = 0; k < n_; ++k) rhs.col(col++) = b.cwiseProduct(y_.col(k).cwiseAbs2());
    for (Eigen::Index k = 0; k < n_; ++k)
      for (Eigen::Index l = k + 1; l < n_; ++l) {
        const CVector z = y_.col(k).cwiseProduct(y_.col(l).conjugate());
        rhs.col(col++) = b.cwiseProduct(z.real());
        rhs.col(col++) = b.cwiseProduct(z.imag());
      }
  }

  void moments_from_product(const RMatrix& prod, Eigen::Index i, Eigen::Index base, double si,
                            CMatrix& yw, CMatrix& mw) const {
    const double inv = 1.0 / si;
    Eigen::Index col = base + 1;
    for (Eigen::Index k = 0; k < n_; ++k) {
      yw(k, 0) = Complex(prod(i, col), prod(i, col + 1)) * inv;
      col += 2;
    }
    for (Eigen::Index k = 0; k < n_; ++k) mw(k, k) = prod(i, col++) * inv;
    for (Eigen::Index k = 0; k < n_; ++k)
      for (Eigen::Index l = k + 1; l < n_; ++l) {
        mw(k, l) = Complex(prod(i, col), prod(i, col + 1)) * inv;
        mw(l, k) = std::conj(mw(k, l));
        col += 2;
      }
  }

  /// Direct log-sum-exp over p of beta_p - D_ip.
  double direct_row(Eigen::Index i, const Eigen::Ref<const RVector>& beta, CMatrix* yw, CMatrix* mw) const {
    const RVector t = beta - d_.col(i);
    const double m = t.maxCoeff();
    const RVector w = (t.array() - m).exp().matrix();
    const double s = w.sum();
    if (yw != nullptr) {
      const CVector wy = y_.transpose() * w.cast<Complex>();
      for (Eigen::Index k = 0; k < n_; ++k) (*yw)(k, 0) = wy[k] / s;
      *mw = (y_.transpose() * w.cast<Complex>().asDiagonal() * y_.conjugate()) / s;
    }
    return m + std::log(s);
  }

  Eigen::Index n_;
  Eigen::Index k_ = 0;
  CMatrix a_;
  double inv_var_;
  CMatrix y_;  // K x n
  CMatrix c_;  // K x n
  CMatrix cconj_;
  RVector p_, logp_;
  RMatrix d_;  // K x K, symmetric
  RMatrix e_;  // exp(-d_)
};

struct KernelOutput {
  std::vector<double> terms;  // per-sample MI contributions, bits
  CMatrix psi;                // mean over samples of dm_s/dA^*
};

/// Noise sample s, component k: sigma * CN(0,1) from counter s*n + k.
inline void fill_noise(CMatrix& noise, std::uint64_t key, std::size_t first, Eigen::Index count,
                       double sigma) {
  const CounterRng rng(key);
  const auto n = noise.rows();
  noise.setZero();
  for (Eigen::Index s = 0; s < count; ++s)
    for (Eigen::Index k = 0; k < n; ++k)
      noise(k, s) = sigma * rng.complex_normal((first + static_cast<std::size_t>(s)) * static_cast<std::size_t>(n) +
                                               static_cast<std::size_t>(k));
}

inline std::uint64_t noise_key(std::uint64_t seed) { return derive_key(seed, {0x6e6f697365ULL}); }

inline KernelOutput run_kernel(const MiKernel& kernel, double noise_variance, const McConfig& mc, bool grad,
                               bool force_direct = false) {
  validate(mc);
  const auto n = kernel.streams();
  const std::size_t total = mc.sample_count;
  const std::size_t chunks = (total + kChunk - 1) / kChunk;
  const double sigma = std::sqrt(noise_variance);
  const std::uint64_t key = noise_key(mc.seed);

  KernelOutput out;
  out.terms.assign(total, 0.0);
  std::vector<CMatrix> partial(grad ? chunks : 0, CMatrix::Zero(n, n));
  parallel_for(chunks, mc.threads, [&](std::size_t c) {
    const std::size_t first = c * static_cast<std::size_t>(kChunk);
    const auto count = static_cast<Eigen::Index>(std::min<std::size_t>(kChunk, total - first));
    CMatrix noise(n, kChunk);
    fill_noise(noise, key, first, count, sigma);
    kernel.process(noise, count, out.terms.data() + first, grad ? &partial[c] : nullptr, force_direct);
  });
  if (grad) {
    out.psi = CMatrix::Zero(n, n);
    for (const auto& p : partial) out.psi += p;
    out.psi /= static_cast<double>(total);
  }
  return out;
}

inline MiValue summarize(const std::vector<double>& terms) {
  const std::size_t s = terms.size();
  const double mean = pairwise_sum(terms.data(), s) / static_cast<double>(s);
  if (s < 2) return {mean, 0.0};
  std::vector<double> sq(s);
  for (std::size_t i = 0; i < s; ++i) sq[i] = (terms[i] - mean) * (terms[i] - mean);
  const double var = pairwise_sum(sq.data(), s) / static_cast<double>(s - 1);
  return {mean, std::sqrt(var / static_cast<double>(s))};
}

inline void check_dimensions(const EquivalentChannel& eq, const PrecoderState& prec, const JointConstellation& joint) {
  if (prec.streams() != eq.streams() || joint.antennas() != eq.streams())
    throw std::invalid_argument("mutual information: channel, precoder and constellation dimensions differ");
}

}  // namespace detail

/// MI for an arbitrary effective matrix A (y_bar = A (delta .* x) + v).
inline MiValue estimate_mi_effective(const CMatrix& effective, const JointConstellation& joint,
                                     double noise_variance, const McConfig& mc) {
  const detail::MiKernel kernel(effective, joint, noise_variance);
  return detail::summarize(detail::run_kernel(kernel, noise_variance, mc, false).terms);
}

/// MI with caller-supplied noise samples (columns of `noise`).
inline MiValue estimate_mi_with_noise(const CMatrix& effective, const JointConstellation& joint,
                                      double noise_variance, const CMatrix& noise) {
  const detail::MiKernel kernel(effective, joint, noise_variance);
  if (noise.rows() != kernel.streams() || noise.cols() < 1)
    throw std::invalid_argument("estimate_mi_with_noise: noise block has wrong shape");
  std::vector<double> terms(static_cast<std::size_t>(noise.cols()));
  for (Eigen::Index first = 0; first < noise.cols(); first += detail::kChunk) {
    const Eigen::Index count = std::min(detail::kChunk, noise.cols() - first);
    CMatrix block = CMatrix::Zero(kernel.streams(), detail::kChunk);
    block.leftCols(count) = noise.middleCols(first, count);
    kernel.process(block, count, terms.data() + first, nullptr);
  }
  return detail::summarize(terms);
}

inline MiValue estimate_mi(const EquivalentChannel& eq, const PrecoderState& prec, const JointConstellation& joint,
                           const McConfig& mc) {
  detail::check_dimensions(eq, prec, joint);
  return estimate_mi_effective(effective_matrix(eq, prec), joint, eq.noise_variance, mc);
}

namespace detail {

/// Chain rule from Psi = dm/dA^* to the precoder parameters, A = diag(gains .* power) Phi:
///   dI/dPhi^*   = diag(gains .* power) Psi
///   dI/dpower_k = 2 gains_k Re[(Psi Phi^H)_kk]
inline MiGradients chain_gradients(const EquivalentChannel& eq, const PrecoderState& prec, const MiValue& mi,
                                   const CMatrix& psi) {
  MiGradients g;
  g.mi = mi;
  const RVector gp = eq.gains.cwiseProduct(prec.power);
  g.rotation = gp.cast<Complex>().asDiagonal() * psi;
  const CMatrix pp = psi * prec.rotation.adjoint();
  g.power.resize(eq.streams());
  for (Eigen::Index k = 0; k < eq.streams(); ++k) g.power[k] = 2.0 * eq.gains[k] * pp(k, k).real();
  return g;
}

}  // namespace detail

/// Value plus both gradients from one pass over the samples.
inline MiGradients estimate_with_gradients(const EquivalentChannel& eq, const PrecoderState& prec,
                                           const JointConstellation& joint, const McConfig& mc) {
  detail::check_dimensions(eq, prec, joint);
  const detail::MiKernel kernel(effective_matrix(eq, prec), joint, eq.noise_variance);
  const auto out = detail::run_kernel(kernel, eq.noise_variance, mc, true);
  return detail::chain_gradients(eq, prec, detail::summarize(out.terms), out.psi);
}

/// As estimate_with_gradients, with caller-supplied noise samples.
inline MiGradients estimate_with_gradients_noise(const EquivalentChannel& eq, const PrecoderState& prec,
                                                 const JointConstellation& joint, const CMatrix& noise) {
  detail::check_dimensions(eq, prec, joint);
  const detail::MiKernel kernel(effective_matrix(eq, prec), joint, eq.noise_variance);
  if (noise.rows() != kernel.streams() || noise.cols() < 1)
    throw std::invalid_argument("estimate_with_gradients_noise: noise block has wrong shape");
  std::vector<double> terms(static_cast<std::size_t>(noise.cols()));
  CMatrix psi = CMatrix::Zero(kernel.streams(), kernel.streams());
  for (Eigen::Index first = 0; first < noise.cols(); first += detail::kChunk) {
    const Eigen::Index count = std::min(detail::kChunk, noise.cols() - first);
    CMatrix block = CMatrix::Zero(kernel.streams(), detail::kChunk);
    block.leftCols(count) = noise.middleCols(first, count);
    kernel.process(block, count, terms.data() + first, &psi);
  }
  psi /= static_cast<double>(noise.cols());
  return detail::chain_gradients(eq, prec, detail::summarize(terms), psi);
}

inline RVector grad_power(const EquivalentChannel& eq, const PrecoderState& prec, const JointConstellation& joint,
                          const McConfig& mc) {
  return estimate_with_gradients(eq, prec, joint, mc).power;
}

inline CMatrix grad_rotation(const EquivalentChannel& eq, const PrecoderState& prec,
                             const JointConstellation& joint, const McConfig& mc) {
  return estimate_with_gradients(eq, prec, joint, mc).rotation;
}

}  // namespace mimoshape
