#include <cmath>

#include <gtest/gtest.h>

#include "mimoshape/channels.hpp"
#include "mimoshape/optimizer.hpp"

using namespace mimoshape;

TEST(ConstantChannel, Properties) {
  const auto h = constant_channel().entries;
  EXPECT_EQ(h, h.transpose());
  EXPECT_NEAR(std::abs(h.determinant() - Complex(3.0, 0.0)), 0.0, 1e-14);
  const RVector g = normalize_gains(svd_reduce(constant_channel()).gains, 2);
  EXPECT_NEAR(g[0], 1.3416, 5e-5);
  EXPECT_NEAR(g[1], 0.4472, 5e-5);
}

TEST(Rayleigh, UnitVariancePerEntry) {
  double s2 = 0.0, re2 = 0.0;
  Complex mean(0.0, 0.0);
  const int draws = 25000;
  for (int i = 0; i < draws; ++i) {
    const auto h = rayleigh_sample(2, 2, 123, static_cast<std::uint64_t>(i)).entries;
    for (auto z : h.reshaped()) {
      s2 += std::norm(z);
      re2 += z.real() * z.real();
      mean += z;
    }
  }
  const double n = 4.0 * draws;
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
  EXPECT_NEAR(re2 / n, 0.5, 0.01);
  EXPECT_LT(std::abs(mean / n), 0.01);
}

TEST(Rayleigh, DeterministicInSeedAndIndex) {
  EXPECT_EQ(rayleigh_sample(2, 3, 5, 7).entries, rayleigh_sample(2, 3, 5, 7).entries);
  EXPECT_NE(rayleigh_sample(2, 2, 5, 7).entries, rayleigh_sample(2, 2, 5, 8).entries);
  EXPECT_NE(rayleigh_sample(2, 2, 5, 7).entries, rayleigh_sample(2, 2, 6, 7).entries);
  EXPECT_THROW(rayleigh_sample(0, 2, 1, 1), std::invalid_argument);
}

TEST(Ensemble, SingleChannelAndConstant) {
  const auto one = ensemble_average(1, [](std::size_t) { return std::vector<double>{1.5, 2.5}; });
  EXPECT_EQ(one.mean, (std::vector<double>{1.5, 2.5}));
  const auto flat = ensemble_average(7, [](std::size_t) { return std::vector<double>{0.25}; }, 3);
  EXPECT_DOUBLE_EQ(flat.mean[0], 0.25);
  EXPECT_EQ(flat.per_channel.size(), 7u);
  EXPECT_THROW(ensemble_average(0, [](std::size_t) { return std::vector<double>{}; }), std::invalid_argument);
}

TEST(Ensemble, ThreadCountDoesNotChangeResult) {
  auto f = [](std::size_t c) { return std::vector<double>{std::sin(0.1 * static_cast<double>(c)), 1.0 / (1.0 + c)}; };
  const auto a = ensemble_average(33, f, 1);
  const auto b = ensemble_average(33, f, 4);
  EXPECT_EQ(a.mean, b.mean);
}

TEST(Ensemble, JointAverageDominatesEqualPower) {
  const std::vector<double> snrs{6.0, 12.0};
  auto eval = [&](bool optimize) {
    return ensemble_average(3, [&](std::size_t c) {
      std::vector<double> out;
      const RVector g = svd_reduce(rayleigh_sample(2, 2, 77, c)).gains;
      for (double snr : snrs) {
        const auto eq = make_equivalent_channel(g, 2.0 / (2.0 * std::pow(10.0, snr / 10.0)));
        const McConfig mc{200, c, 1};
        const auto init = initial_joint_state(eq, 4, 2.0);
        if (!optimize) {
          out.push_back(estimate_mi(eq, init.precoder, build_joint(init.shapings), mc).bits);
        } else {
          OptConfig cfg;
          cfg.max_inner = 10;
          const auto rep = joint_optimize(eq, init, mc, cfg);
          out.push_back(rep.mi_trace.back().bits);
        }
      }
      return out;
    });
  };
  const auto eq_curve = eval(false);
  const auto joint_curve = eval(true);
  for (std::size_t k = 0; k < snrs.size(); ++k) EXPECT_GE(joint_curve.mean[k], eq_curve.mean[k]);
}
