#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>

#include <Eigen/Dense>

#include "tritcal/config.hpp"

namespace tritcal {

using Rng = std::mt19937_64;

// Independent stream for (seed, stream) so data noise, splits, training and
// test draws never share generator state.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

struct VoltagePair {
  double v1 = 0.0;
  double v2 = 0.0;
};

struct PhasePair {
  double dphi1 = 0.0;
  double dphi2 = 0.0;
};

// Thermo-optic response: linear (rad/W) and quadratic (rad/W^2) coefficients
// of phase i with respect to the power on resistor j, plus the two
// resistances in ohms. Off-diagonal entries are thermal crosstalk.
struct ResponseCoefficients {
  Eigen::Matrix2d alpha = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d alpha_nl = Eigen::Matrix2d::Zero();
  Eigen::Vector2d resistances = Eigen::Vector2d::Ones();

  void validate() const;
};

inline constexpr std::size_t kInputsUsed = 2;
inline constexpr std::size_t kOutputModes = 3;
inline constexpr std::size_t kProbabilityCount = kInputsUsed * kOutputModes;

// [P(1->1), P(1->2), P(1->3), P(2->1), P(2->2), P(2->3)]
struct ProbabilityRecord {
  std::array<double, kProbabilityCount> p{};

  double at(std::size_t input, std::size_t output) const { return p[3 * input + output]; }
  double row_sum(std::size_t input) const { return p[3 * input] + p[3 * input + 1] + p[3 * input + 2]; }
  bool operator==(const ProbabilityRecord&) const = default;
};

struct CountRecord {
  std::array<std::int64_t, kProbabilityCount> counts{};
  double mean_total = 0.0;
};

using Unitary3 = Eigen::Matrix3cd;

struct DeviceConfig {
  ResponseCoefficients coefficients;
  double v_min = 0.0;
  double v_max = 7.0;
  // Upper voltage the model may be evaluated at; kicked settings may exceed
  // v_max but not this.
  double v_sim_max = 10.0;
  double mean_total = 1000.0;
  std::optional<Unitary3> tritter;

  static DeviceConfig reference();
  static DeviceConfig from_config(const KeyValueConfig& config);
  void validate() const;
  std::string to_config_text() const;
};

Eigen::Vector2d dissipated_power(VoltagePair v, const ResponseCoefficients& coeffs);
PhasePair phases_from_voltages(VoltagePair v, const ResponseCoefficients& coeffs);

// Balanced three-mode Fourier splitter, T_jk = w^(jk) / sqrt(3).
Unitary3 tritter_unitary();

// T * diag(e^{i dphi1}, e^{i dphi2}, 1) * T; the third arm is the reference.
Unitary3 device_unitary(PhasePair phases);
Unitary3 device_unitary(PhasePair phases, const Unitary3& tritter);

ProbabilityRecord output_probabilities(PhasePair phases);
ProbabilityRecord output_probabilities(PhasePair phases, const Unitary3& tritter);

CountRecord sample_counts(const ProbabilityRecord& probabilities, double mean_total, Rng& rng);

// Per-input normalized frequencies. Each row sums to exactly 1.0 when added
// left to right.
ProbabilityRecord estimate_probabilities(const CountRecord& counts);

// Forward model bound to one device configuration.
class Device {
 public:
  explicit Device(DeviceConfig config = DeviceConfig::reference());

  const DeviceConfig& config() const { return config_; }
  const Unitary3& tritter() const { return tritter_; }

  void check_simulable(VoltagePair v) const;
  PhasePair phases(VoltagePair v) const;
  ProbabilityRecord probabilities(VoltagePair v) const;
  // Poisson counts at the configured mean_total, normalized back to frequencies.
  ProbabilityRecord measure(VoltagePair v, Rng& rng) const;

 private:
  DeviceConfig config_;
  Unitary3 tritter_;
};

}  // namespace tritcal
