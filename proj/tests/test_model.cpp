#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mimoshape/model.hpp"
#include "mimoshape/shaping.hpp"

using namespace mimoshape;

namespace {

CMatrix random_complex(Eigen::Index r, Eigen::Index c, std::mt19937_64& gen) {
  std::normal_distribution<double> n;
  CMatrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = Complex(n(gen), n(gen));
  return m;
}

CMatrix two_by_two(double a, double b, double c, double d) {
  CMatrix h(2, 2);
  h << a, b, c, d;
  return h;
}

}  // namespace

TEST(SvdReduce, SymmetricChannelMatchesClosedFormEigenvalues) {
  // Singular values of a real 2x2 H are square roots of the eigenvalues of
  // H^T H, which solve t^2 - tr t + det = 0.
  const CMatrix h = two_by_two(2, 1, 1, 2);
  const RMatrix hth = (h.adjoint() * h).real();
  const double tr = hth.trace(), det = hth.determinant();
  const double disc = std::sqrt(tr * tr / 4 - det);
  const auto red = svd_reduce(make_physical_channel(h));
  ASSERT_EQ(red.gains.size(), 2);
  EXPECT_NEAR(red.gains[0], std::sqrt(tr / 2 + disc), 1e-12);
  EXPECT_NEAR(red.gains[1], std::sqrt(tr / 2 - disc), 1e-12);
  EXPECT_NEAR(red.gains[0], 3.0, 1e-12);
  EXPECT_NEAR(red.gains[1], 1.0, 1e-12);
}

TEST(SvdReduce, Identity) {
  const auto red = svd_reduce(make_physical_channel(CMatrix::Identity(2, 2)));
  EXPECT_NEAR(red.gains[0], 1.0, 1e-15);
  EXPECT_NEAR(red.gains[1], 1.0, 1e-15);
}

TEST(SvdReduce, ReconstructsRandomMatricesIncludingRectangular) {
  std::mt19937_64 gen(11);
  for (auto [r, c] : {std::pair{2, 2}, std::pair{3, 2}, std::pair{2, 4}, std::pair{4, 4}, std::pair{1, 3}}) {
    for (int rep = 0; rep < 20; ++rep) {
      const CMatrix h = random_complex(r, c, gen);
      const auto red = svd_reduce(make_physical_channel(h));
      ASSERT_EQ(red.gains.size(), std::min(r, c));
      for (Eigen::Index i = 1; i < red.gains.size(); ++i) EXPECT_GE(red.gains[i - 1], red.gains[i]);
      EXPECT_GE(red.gains.minCoeff(), 0.0);
      const CMatrix back = red.left * red.gains.cast<Complex>().asDiagonal() * red.right.adjoint();
      EXPECT_LT((back - h).norm() / h.norm(), 1e-10);
    }
  }
}

TEST(SvdReduce, RejectsNonFinite) {
  CMatrix h = CMatrix::Identity(2, 2);
  h(0, 1) = Complex(std::nan(""), 0.0);
  EXPECT_THROW(make_physical_channel(h), std::invalid_argument);
  PhysicalChannel raw{h};
  EXPECT_THROW(svd_reduce(raw), std::invalid_argument);
}

TEST(Normalize, ConstantChannelGains) {
  const RVector g = normalize_gains(RVector{{3.0, 1.0}}, 2);
  EXPECT_NEAR(g[0], 1.3416, 5e-5);
  EXPECT_NEAR(g[1], 0.4472, 5e-5);
  EXPECT_NEAR(g.squaredNorm(), 2.0, 1e-14);
}

TEST(Normalize, TrivialCases) {
  const RVector ones = normalize_gains(RVector{{1.0, 1.0}}, 2);
  EXPECT_NEAR(ones[0], 1.0, 1e-15);
  EXPECT_NEAR(ones[1], 1.0, 1e-15);
  EXPECT_NEAR(normalize_gains(RVector{{5.0}}, 1)[0], 1.0, 1e-15);
  EXPECT_THROW(normalize_gains(RVector::Zero(2), 2), std::invalid_argument);
}

TEST(Normalize, Idempotent) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int rep = 0; rep < 50; ++rep) {
    const RVector g{{u(gen) + 0.1, u(gen), u(gen)}};
    const RVector once = normalize_gains(g, 3);
    const RVector twice = normalize_gains(once, 3);
    EXPECT_LT((once - twice).norm(), 1e-14);
  }
}

TEST(EquivalentChannel, Validation) {
  EXPECT_NO_THROW(make_equivalent_channel(RVector{{2.0, 1.0}}, 0.1));
  EXPECT_THROW(make_equivalent_channel(RVector{{1.0, 2.0}}, 0.1), std::invalid_argument);
  EXPECT_THROW(make_equivalent_channel(RVector{{1.0, -0.5}}, 0.1), std::invalid_argument);
  EXPECT_THROW(make_equivalent_channel(RVector{{1.0}}, 0.0), std::invalid_argument);
}

TEST(PrecoderState, InitialAndValidation) {
  const auto s = PrecoderState::initial(2, 2.0);
  EXPECT_NO_THROW(validate(s));
  EXPECT_NEAR(s.power[0], 1.0, 1e-15);
  auto bad = s;
  bad.power[0] = 1.1;
  EXPECT_THROW(validate(bad), std::invalid_argument);
  bad = s;
  bad.rotation(0, 1) = 0.01;
  EXPECT_THROW(validate(bad), std::invalid_argument);
}

TEST(QamAlphabet, NaturalOrder) {
  const auto a = qam_alphabet(16);
  ASSERT_EQ(a.size(), 16u);
  EXPECT_EQ(a[0], Complex(-3, -3));
  EXPECT_EQ(a[1], Complex(-3, -1));
  EXPECT_EQ(a[4], Complex(-1, -3));
  EXPECT_EQ(a[15], Complex(3, 3));
  EXPECT_THROW(qam_alphabet(8), std::invalid_argument);
  EXPECT_THROW(qam_alphabet(36), std::invalid_argument);
}

TEST(BuildJoint, SingleAntennaUniform) {
  const auto j = build_joint({uniform_shaping(4)});
  ASSERT_EQ(j.size(), 4);
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(j.probs[k], 0.25);
}

TEST(BuildJoint, TwoAntennaUniform) {
  const auto j = build_joint({uniform_shaping(4), uniform_shaping(4)});
  ASSERT_EQ(j.size(), 16);
  for (Eigen::Index k = 0; k < 16; ++k) EXPECT_DOUBLE_EQ(j.probs[k], 0.0625);
}

TEST(BuildJoint, ProductOrderAndProbabilities) {
  const auto a = qam_alphabet(16);
  const auto p = shaping_from_lambda(a, -0.07);
  const auto q = shaping_from_lambda(a, 0.02);
  const auto j = build_joint({p, q});
  ASSERT_EQ(j.size(), 256);
  for (int ia = 0; ia < 16; ++ia)
    for (int ib = 0; ib < 16; ++ib) {
      const int k = ia * 16 + ib;  // antenna 0 varies slowest
      EXPECT_DOUBLE_EQ(j.probs[k], p.probs[ia] * q.probs[ib]);
      EXPECT_EQ(j.vectors(k, 0), p.delta * a[ia]);
      EXPECT_EQ(j.vectors(k, 1), q.delta * a[ib]);
    }
}

TEST(BuildJoint, RandomShapingsNormalizedWithIdentityCovariance) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> lam(-0.3, 0.1);
  const auto a = qam_alphabet(16);
  for (int rep = 0; rep < 20; ++rep) {
    const auto j = build_joint({shaping_from_lambda(a, lam(gen)), shaping_from_lambda(a, lam(gen))});
    EXPECT_NEAR(j.probs.sum(), 1.0, 1e-10);
    CMatrix cov = CMatrix::Zero(2, 2);
    for (Eigen::Index k = 0; k < j.size(); ++k)
      cov += j.probs[k] * j.vectors.row(k).transpose() * j.vectors.row(k).conjugate();
    EXPECT_LT((cov - CMatrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Synthesize, IdentityChain) {
  const auto eq = make_equivalent_channel(RVector::Ones(2), 1.0);
  const auto prec = PrecoderState::initial(2, 2.0);
  const CVector x{{Complex(0.3, -0.1), Complex(-0.7, 0.2)}};
  EXPECT_LT((synthesize_output(eq, prec, x, CVector::Zero(2)) - x).norm(), 1e-15);
}

TEST(Synthesize, ZeroSymbolGivesNoise) {
  const auto eq = make_equivalent_channel(RVector{{1.3, 0.4}}, 1.0);
  const auto prec = PrecoderState::initial(2, 2.0);
  const CVector v{{Complex(0.5, 0.5), Complex(-1.0, 2.0)}};
  EXPECT_EQ(synthesize_output(eq, prec, CVector::Zero(2), v), v);
}

TEST(Synthesize, HandComputedProduct) {
  const auto eq = make_equivalent_channel(RVector{{1.3416, 0.4472}}, 1.0);
  const auto prec = PrecoderState::initial(2, 4.0);  // sqrt(P/2) = sqrt(2)
  const CVector x{{Complex(1.0, 2.0), Complex(-3.0, 0.5)}};
  const CVector y = synthesize_output(eq, prec, x, CVector::Zero(2));
  const double s = std::sqrt(2.0);
  EXPECT_NEAR(std::abs(y[0] - Complex(1.3416 * s, 2 * 1.3416 * s)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(y[1] - Complex(-3 * 0.4472 * s, 0.5 * 0.4472 * s)), 0.0, 1e-12);
  EXPECT_THROW(synthesize_output(eq, prec, CVector::Zero(3), CVector::Zero(2)), std::invalid_argument);
}
