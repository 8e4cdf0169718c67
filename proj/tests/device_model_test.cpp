#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <random>

#include "tritcal/device_model.hpp"
#include "tritcal/error.hpp"

using namespace tritcal;

namespace {

constexpr double kPi = std::numbers::pi;

using cld = std::complex<long double>;

// Straight-line U = T D T in long double, written out entry by entry.
std::array<std::array<cld, 3>, 3> oracle_unitary(long double phi1, long double phi2) {
  const long double s = 1.0L / std::sqrt(3.0L);
  const long double two_pi = 2.0L * std::numbers::pi_v<long double>;
  auto t = [&](int j, int k) { return std::polar(s, two_pi * static_cast<long double>((j * k) % 3) / 3.0L); };
  const cld d[3] = {std::polar(1.0L, phi1), std::polar(1.0L, phi2), cld(1.0L, 0.0L)};
  std::array<std::array<cld, 3>, 3> u{};
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) {
      cld sum = 0;
      for (int m = 0; m < 3; ++m) sum += t(j, m) * d[m] * t(m, k);
      u[j][k] = sum;
    }
  }
  return u;
}

std::array<long double, 6> oracle_probabilities(long double phi1, long double phi2) {
  const auto u = oracle_unitary(phi1, phi2);
  std::array<long double, 6> p{};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) p[3 * i + j] = std::norm(u[j][i]);
  }
  return p;
}

double max_unitarity_defect(const Unitary3& u) {
  return (u.adjoint() * u - Unitary3::Identity()).cwiseAbs().maxCoeff();
}

// Newton solve of phases_from_voltages(v) = target from a starting voltage.
std::optional<VoltagePair> invert_phases(const ResponseCoefficients& c, PhasePair target, VoltagePair start) {
  VoltagePair v = start;
  for (int iter = 0; iter < 60; ++iter) {
    const auto f = phases_from_voltages(v, c);
    const Eigen::Vector2d r(f.dphi1 - target.dphi1, f.dphi2 - target.dphi2);
    if (r.norm() < 1e-14) return v;
    Eigen::Matrix2d jac;
    for (int j = 0; j < 2; ++j) {
      const double vj = j == 0 ? v.v1 : v.v2;
      const double dp = 2.0 * vj / c.resistances(j);
      const double p = vj * vj / c.resistances(j);
      for (int i = 0; i < 2; ++i) jac(i, j) = (c.alpha(i, j) + 2.0 * c.alpha_nl(i, j) * p) * dp;
    }
    const Eigen::Vector2d step = jac.fullPivLu().solve(r);
    v.v1 -= step(0);
    v.v2 -= step(1);
    if (!std::isfinite(v.v1) || !std::isfinite(v.v2) || v.v1 < 0.0 || v.v2 < 0.0) return std::nullopt;
  }
  return std::nullopt;
}

double record_distance(const ProbabilityRecord& a, const ProbabilityRecord& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < kProbabilityCount; ++k) d = std::max(d, std::abs(a.p[k] - b.p[k]));
  return d;
}

}  // namespace

TEST(DissipatedPower, ZeroVoltage) {
  const auto p = dissipated_power({0.0, 0.0}, DeviceConfig::reference().coefficients);
  EXPECT_EQ(p(0), 0.0);
  EXPECT_EQ(p(1), 0.0);
}

TEST(DissipatedPower, DirectSubstitution) {
  ResponseCoefficients c;
  c.resistances = {1.0, 1.0};
  const auto p = dissipated_power({1.0, 2.0}, c);
  EXPECT_EQ(p(0), 1.0);
  EXPECT_EQ(p(1), 4.0);
}

TEST(DissipatedPower, HighPrecisionOracle) {
  ResponseCoefficients c;
  c.resistances = {100.0, 120.0};
  const auto p = dissipated_power({3.5, 5.0}, c);
  EXPECT_NEAR(p(0), static_cast<double>(3.5L * 3.5L / 100.0L), 1e-15);
  EXPECT_NEAR(p(1), static_cast<double>(25.0L / 120.0L), 1e-15);
  EXPECT_NEAR(p(1), 0.2083333333333333, 1e-15);
}

TEST(DissipatedPower, RejectsBadInputs) {
  ResponseCoefficients c;
  EXPECT_THROW(dissipated_power({std::nan(""), 1.0}, c), Error);
  EXPECT_THROW(dissipated_power({1.0, INFINITY}, c), Error);
  c.resistances = {0.0, 1.0};
  try {
    dissipated_power({1.0, 1.0}, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::invalid_parameter);
  }
}

TEST(PhaseResponse, ZeroPowerZeroPhase) {
  const auto ph = phases_from_voltages({0.0, 0.0}, DeviceConfig::reference().coefficients);
  EXPECT_EQ(ph.dphi1, 0.0);
  EXPECT_EQ(ph.dphi2, 0.0);
}

TEST(PhaseResponse, LinearPlusQuadraticSubstitution) {
  ResponseCoefficients c;
  c.alpha = Eigen::Matrix2d::Identity();
  c.alpha_nl = 0.1 * Eigen::Matrix2d::Identity();
  c.resistances = {1.0, 1.0};
  const auto ph = phases_from_voltages({1.0, 0.0}, c);
  EXPECT_NEAR(ph.dphi1, 1.1, 1e-15);
  EXPECT_EQ(ph.dphi2, 0.0);
}

TEST(PhaseResponse, ReferenceCoefficientsTermByTerm) {
  const auto c = DeviceConfig::reference().coefficients;
  const long double p1 = 9.0L / static_cast<long double>(c.resistances(0));
  const long double p2 = 16.0L / static_cast<long double>(c.resistances(1));
  long double expected[2];
  for (int i = 0; i < 2; ++i) {
    expected[i] = static_cast<long double>(c.alpha(i, 0)) * p1 + static_cast<long double>(c.alpha(i, 1)) * p2 +
                  static_cast<long double>(c.alpha_nl(i, 0)) * p1 * p1 +
                  static_cast<long double>(c.alpha_nl(i, 1)) * p2 * p2;
  }
  const auto ph = phases_from_voltages({3.0, 4.0}, c);
  EXPECT_NEAR(ph.dphi1, static_cast<double>(expected[0]), 1e-12);
  EXPECT_NEAR(ph.dphi2, static_cast<double>(expected[1]), 1e-12);
}

TEST(PhaseResponse, CrosstalkActivation) {
  const auto c = DeviceConfig::reference().coefficients;
  ASSERT_NE(c.alpha(0, 1), 0.0);
  for (const double v2 : {0.1, 1.0, 3.0, 7.0}) {
    EXPECT_GT(phases_from_voltages({0.0, v2}, c).dphi1, 0.0) << v2;
  }
}

TEST(Tritter, BalancedModuli) {
  const auto t = tritter_unitary();
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(std::abs(t(j, k)), 1.0 / std::sqrt(3.0), 1e-15);
  }
}

TEST(Tritter, Unitary) { EXPECT_LT(max_unitarity_defect(tritter_unitary()), 1e-12); }

TEST(Tritter, SquareIsModePermutation) {
  const auto t = tritter_unitary();
  const Unitary3 t2 = t * t;
  // input 1 -> 1, 2 -> 3, 3 -> 2; column k holds the image of input k
  const int image[3] = {0, 2, 1};
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(std::abs(t2(j, k)), j == image[k] ? 1.0 : 0.0, 1e-15);
  }
}

TEST(DeviceUnitary, ZeroPhaseIsTritterSquared) {
  const auto t = tritter_unitary();
  EXPECT_LT((device_unitary({0.0, 0.0}) - t * t).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DeviceUnitary, MatchesLongDoubleOracle) {
  const auto u = device_unitary({kPi / 2, kPi / 3});
  const auto o = oracle_unitary(std::numbers::pi_v<long double> / 2, std::numbers::pi_v<long double> / 3);
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) {
      EXPECT_NEAR(u(j, k).real(), static_cast<double>(o[j][k].real()), 1e-14);
      EXPECT_NEAR(u(j, k).imag(), static_cast<double>(o[j][k].imag()), 1e-14);
    }
  }
}

TEST(DeviceUnitary, RandomPhasesStayUnitary) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> phase(0.0, 4.0 * kPi);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) worst = std::max(worst, max_unitarity_defect(device_unitary({phase(gen), phase(gen)})));
  EXPECT_LT(worst, 1e-12);
}

TEST(DeviceUnitary, AcceptsTritterOverride) {
  // a phase-dressed tritter is still unitary and changes the probabilities
  Unitary3 bent = tritter_unitary();
  bent.row(1) *= std::polar(1.0, 0.3);
  bent.col(2) *= std::polar(1.0, -0.7);
  EXPECT_LT(max_unitarity_defect(device_unitary({1.0, 2.0}, bent)), 1e-12);
  EXPECT_GT(record_distance(output_probabilities({1.0, 2.0}, bent), output_probabilities({1.0, 2.0})), 1e-3);
}

TEST(Probabilities, ZeroPhase) {
  const auto p = output_probabilities({0.0, 0.0});
  const double expected[6] = {1, 0, 0, 0, 0, 1};
  for (int k = 0; k < 6; ++k) EXPECT_NEAR(p.p[k], expected[k], 1e-15);
}

TEST(Probabilities, MatchesLongDoubleOracle) {
  const auto p = output_probabilities({kPi / 2, kPi / 3});
  const auto o = oracle_probabilities(std::numbers::pi_v<long double> / 2, std::numbers::pi_v<long double> / 3);
  for (int k = 0; k < 6; ++k) EXPECT_NEAR(p.p[k], static_cast<double>(o[k]), 1e-10);
}

TEST(Probabilities, RowNormalizationAndPeriodicity) {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> phase(0.0, 4.0 * kPi);
  std::uniform_int_distribution<int> turns(-3, 3);
  for (int i = 0; i < 1000; ++i) {
    const PhasePair ph{phase(gen), phase(gen)};
    const auto p = output_probabilities(ph);
    EXPECT_NEAR(p.row_sum(0), 1.0, 1e-12);
    EXPECT_NEAR(p.row_sum(1), 1.0, 1e-12);
    for (const double x : p.p) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0 + 1e-12);
    }
    const PhasePair shifted{ph.dphi1 + 2 * kPi * turns(gen), ph.dphi2 + 2 * kPi * turns(gen)};
    EXPECT_LT(record_distance(p, output_probabilities(shifted)), 1e-12);
  }
}

TEST(Probabilities, FullTurnMatchesZero) {
  EXPECT_LT(record_distance(output_probabilities({2 * kPi, 2 * kPi}), output_probabilities({0.0, 0.0})), 1e-12);
}

TEST(Device, NonInjectivityWitness) {
  // grid search over the upper voltage corner, then Newton-refine the partner
  // whose phases are (2pi - dphi2, 2pi - dphi1)
  const Device device;
  const auto& c = device.config().coefficients;
  const double vmax = device.config().v_max;
  std::optional<std::pair<VoltagePair, VoltagePair>> witness;
  for (double v1 = vmax; v1 > 4.0 && !witness; v1 -= 0.25) {
    for (double v2 = vmax; v2 > 4.0 && !witness; v2 -= 0.25) {
      const VoltagePair a{v1, v2};
      const auto ph = phases_from_voltages(a, c);
      const PhasePair mirror{2 * kPi - ph.dphi2, 2 * kPi - ph.dphi1};
      if (mirror.dphi1 <= 0.0 || mirror.dphi2 <= 0.0) continue;
      for (double s1 = 0.5; s1 <= vmax && !witness; s1 += 0.5) {
        for (double s2 = 0.5; s2 <= vmax && !witness; s2 += 0.5) {
          const auto b = invert_phases(c, mirror, {s1, s2});
          if (!b || b->v1 > vmax || b->v2 > vmax) continue;
          if (std::hypot(b->v1 - a.v1, b->v2 - a.v2) < 0.5) continue;
          witness = std::make_pair(a, *b);
        }
      }
    }
  }
  ASSERT_TRUE(witness.has_value());
  const auto [a, b] = *witness;
  EXPECT_LT(record_distance(device.probabilities(a), device.probabilities(b)), 1e-6);
  EXPECT_GT(std::hypot(a.v1 - b.v1, a.v2 - b.v2), 0.5);
}

TEST(Device, RangeChecks) {
  const Device device;
  EXPECT_NO_THROW(device.check_simulable({0.0, device.config().v_sim_max}));
  EXPECT_THROW(device.check_simulable({-0.1, 1.0}), Error);
  EXPECT_THROW(device.check_simulable({1.0, device.config().v_sim_max + 0.1}), Error);
}

TEST(DeviceConfig, ConfigRoundTrip) {
  auto cfg = DeviceConfig::reference();
  const auto back = DeviceConfig::from_config(KeyValueConfig::parse(cfg.to_config_text()));
  EXPECT_EQ(back.coefficients.alpha, cfg.coefficients.alpha);
  EXPECT_EQ(back.coefficients.alpha_nl, cfg.coefficients.alpha_nl);
  EXPECT_EQ(back.coefficients.resistances, cfg.coefficients.resistances);
  EXPECT_EQ(back.v_max, cfg.v_max);
  EXPECT_EQ(back.mean_total, cfg.mean_total);
}

TEST(DeviceConfig, RejectsNonUnitaryTritter) {
  std::string entries;
  for (int i = 0; i < 18; ++i) entries += (i == 0 ? "1 " : "0 ");
  EXPECT_THROW(DeviceConfig::from_config(KeyValueConfig::parse("tritter = " + entries)), Error);
}

TEST(DeviceConfig, RejectsNonPositiveResistance) {
  EXPECT_THROW(DeviceConfig::from_config(KeyValueConfig::parse("resistances = 100 -1")), Error);
}

TEST(Counts, ZeroProbabilityGivesZeroCount) {
  Rng rng = make_rng(5);
  ProbabilityRecord p;
  p.p = {1, 0, 0, 0, 0, 1};
  for (int i = 0; i < 100; ++i) {
    const auto c = sample_counts(p, 1000.0, rng);
    for (const int k : {1, 2, 3, 4}) EXPECT_EQ(c.counts[k], 0);
  }
}

TEST(Counts, NonPositiveMeanRejected) {
  Rng rng = make_rng(5);
  ProbabilityRecord p;
  p.p = {0.5, 0.5, 0, 0.5, 0.5, 0};
  EXPECT_THROW(sample_counts(p, 0.0, rng), Error);
  EXPECT_THROW(sample_counts(p, -3.0, rng), Error);
}

TEST(Counts, PoissonMeanAndVarianceMonteCarlo) {
  Rng rng = make_rng(17);
  ProbabilityRecord p;
  p.p = {0.5, 0.5, 0, 0.5, 0.5, 0};
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto x = static_cast<double>(sample_counts(p, 1000.0, rng).counts[0]);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  EXPECT_NEAR(mean, 500.0, 3.0 * std::sqrt(500.0 / n));
  EXPECT_NEAR(var, 500.0, 0.03 * 500.0);
}

TEST(Counts, FixedSeedBitIdentical) {
  const auto p = output_probabilities({1.0, 2.0});
  Rng a = make_rng(42), b = make_rng(42);
  EXPECT_EQ(sample_counts(p, 1000.0, a).counts, sample_counts(p, 1000.0, b).counts);
}

TEST(Estimate, Normalization) {
  CountRecord c;
  c.counts = {100, 0, 0, 0, 0, 100};
  auto p = estimate_probabilities(c);
  EXPECT_EQ(p.p, (std::array<double, 6>{1, 0, 0, 0, 0, 1}));
  c.counts = {50, 25, 25, 10, 30, 60};
  p = estimate_probabilities(c);
  EXPECT_EQ(p.p, (std::array<double, 6>{0.5, 0.25, 0.25, 0.1, 0.3, 0.6}));
}

TEST(Estimate, RowsSumExactlyToOne) {
  Rng rng = make_rng(3);
  std::uniform_real_distribution<double> phase(0.0, 2 * kPi);
  for (int i = 0; i < 2000; ++i) {
    const auto p = estimate_probabilities(sample_counts(output_probabilities({phase(rng), phase(rng)}), 997.0, rng));
    EXPECT_EQ(p.p[0] + p.p[1] + p.p[2], 1.0);
    EXPECT_EQ(p.p[3] + p.p[4] + p.p[5], 1.0);
  }
}

TEST(Estimate, ZeroRowIsDegenerate) {
  CountRecord c;
  c.counts = {1, 2, 3, 0, 0, 0};
  try {
    estimate_probabilities(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::degenerate_data);
  }
}

TEST(Estimate, LargeCountsConvergeToModel) {
  Rng rng = make_rng(8);
  const auto model = output_probabilities({1.3, 4.1});
  const auto est = estimate_probabilities(sample_counts(model, 1e6, rng));
  EXPECT_LT(record_distance(model, est), 1e-2);
}
