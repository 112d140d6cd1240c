#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mimoshape/baselines.hpp"

using namespace mimoshape;

namespace {

const RVector kConstantGains{{1.3416407865, 0.4472135955}};

// Water level found by stepping w upward in 1e-6 increments.
RVector waterfilling_scan(const RVector& g, double budget, double s2) {
  auto used = [&](double w) {
    double t = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) t += std::max(0.0, w - s2 / (g[i] * g[i]));
    return t;
  };
  double w = 0.0;
  while (used(w + 1e-6) < budget) w += 1e-6;
  RVector p(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) p[i] = std::sqrt(std::max(0.0, w - s2 / (g[i] * g[i])));
  return p;
}

// Strong-channel power fraction maximizing the summed scalar oracle MI.
double mercury_scan(const RVector& g, double budget, double s2, int order, int steps) {
  const auto u = uniform_shaping(order);
  double best_t = 0.0, best = -1.0;
  for (int k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) / steps;
    const double v = mi_oracle_1d(g[0], std::sqrt(t * budget), u, s2) + mi_oracle_1d(g[1], std::sqrt((1 - t) * budget), u, s2);
    if (v > best) {
      best = v;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace

TEST(EqualPower, Examples) {
  EXPECT_EQ(equal_power(2, 2.0), RVector::Ones(2));
  EXPECT_DOUBLE_EQ(equal_power(1, 5.0)[0], std::sqrt(5.0));
  EXPECT_NEAR(equal_power(3, 7.0).squaredNorm(), 7.0, 1e-14);
  EXPECT_THROW(equal_power(2, 0.0), std::invalid_argument);
}

TEST(Waterfilling, EqualGainsGiveEqualPowers) {
  const RVector p = waterfilling(RVector::Constant(3, 0.8), 3.0, 0.5);
  EXPECT_NEAR(p[0], 1.0, 1e-14);
  EXPECT_NEAR(p[2], 1.0, 1e-14);
}

TEST(Waterfilling, LowSnrPutsEverythingOnStrongChannel) {
  const RVector p = waterfilling(kConstantGains, 2.0, 10.0);
  EXPECT_NEAR(p[0] * p[0], 2.0, 1e-12);
  EXPECT_EQ(p[1], 0.0);
}

TEST(Waterfilling, MatchesWaterLevelScan) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  for (int rep = 0; rep < 5; ++rep) {
    RVector g{{u(gen), u(gen), u(gen)}};
    std::sort(g.begin(), g.end(), std::greater<>());
    const double s2 = 0.3 * u(gen);
    const RVector p = waterfilling(g, 3.0, s2);
    const RVector ref = waterfilling_scan(g, 3.0, s2);
    EXPECT_NEAR(p.squaredNorm(), 3.0, 1e-12);
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(p[i] * p[i], ref[i] * ref[i], 1e-5);
  }
  EXPECT_THROW(waterfilling(RVector::Zero(2), 1.0, 1.0), std::invalid_argument);
}

TEST(GaussianCapacity, Examples) {
  EXPECT_EQ(gaussian_capacity(kConstantGains, RVector::Zero(2), 0.1), 0.0);
  EXPECT_DOUBLE_EQ(gaussian_capacity(RVector{{1.0}}, RVector{{std::sqrt(0.3)}}, 0.3), 1.0);
}

TEST(GaussianCapacity, WaterfillingIsOptimal) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double s2 : {0.01, 0.1, 1.0, 10.0}) {
    const RVector wf = waterfilling(kConstantGains, 2.0, s2);
    const double best = gaussian_capacity(kConstantGains, wf, s2);
    EXPECT_GE(best, gaussian_capacity(kConstantGains, equal_power(2, 2.0), s2));
    for (int rep = 0; rep < 100; ++rep) {
      const double t = u(gen);
      const RVector p{{std::sqrt(2.0 * t), std::sqrt(2.0 * (1.0 - t))}};
      EXPECT_GE(best, gaussian_capacity(kConstantGains, p, s2) - 1e-12);
    }
  }
}

TEST(Mercury, GaussianInputsReproduceWaterfilling) {
  for (double s2 : {0.02, 0.1, 0.5, 3.0}) {
    const std::vector<ScalarMiFn> fns(2, gaussian_scalar_mi(s2));
    const auto m = mercury_waterfilling(kConstantGains, 2.0, s2, fns);
    const RVector wf = waterfilling(kConstantGains, 2.0, s2);
    EXPECT_LT((m.power - wf).cwiseAbs().maxCoeff(), 1e-6) << "sigma^2=" << s2;
    EXPECT_NEAR(m.power.squaredNorm(), 2.0, 1e-10);
  }
}

TEST(Mercury, EqualGainsGiveEqualPowers) {
  const auto m = mercury_waterfilling(RVector{{0.9, 0.9}}, 2.0, 0.1, 16);
  EXPECT_NEAR(m.power[0], m.power[1], 1e-6);
}

TEST(Mercury, MatchesSplitScanAndSaturationShiftsPowerToWeakChannel) {
  for (double snr_db : {6.0, 14.0, 20.0}) {
    const double s2 = 1.0 / std::pow(10.0, snr_db / 10.0);
    const auto m = mercury_waterfilling(kConstantGains, 2.0, s2, 16);
    EXPECT_LE(m.kkt_residual, 1e-4) << snr_db;
    EXPECT_NEAR(m.power.squaredNorm(), 2.0, 1e-10);
    EXPECT_GE(m.power.minCoeff(), 0.0);
    const double frac = m.power[0] * m.power[0] / 2.0;
    EXPECT_NEAR(frac, mercury_scan(kConstantGains, 2.0, s2, 16, 1000), 2e-3) << snr_db;
    const RVector wf = waterfilling(kConstantGains, 2.0, s2);
    if (snr_db >= 14.0) EXPECT_LT(frac, wf[0] * wf[0] / 2.0) << snr_db;
  }
}

TEST(UniformInputPrecoder, DominatesItsStart) {
  const auto eq = make_equivalent_channel(kConstantGains, 0.3);
  const McConfig mc{300, 5, 1};
  OptConfig cfg;
  cfg.max_inner = 10;
  const auto rep = uniform_input_precoder(eq, 4, 2.0, mc, cfg);
  const auto start = initial_joint_state(eq, 4, 2.0);
  const auto m0 = estimate_mi(eq, start.precoder, build_joint(start.shapings), mc);
  const auto m1 = estimate_mi(eq, rep.precoder, build_joint(rep.shapings), mc);
  EXPECT_GE(m1.bits, m0.bits - m0.std_error);
  EXPECT_NO_THROW(validate(rep.precoder, 1e-10));
  EXPECT_EQ(rep.distribution_sweeps, 0);
}
