#include "tritcal/device_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "tritcal/error.hpp"

namespace tritcal {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x7431u};
  return Rng(seq);
}

void ResponseCoefficients::validate() const {
  if (!alpha.allFinite() || !alpha_nl.allFinite() || !resistances.allFinite()) {
    fail(ErrorCategory::invalid_parameter, "response coefficients must be finite");
  }
  if (resistances.minCoeff() <= 0.0) {
    fail(ErrorCategory::invalid_parameter, "resistances must be strictly positive");
  }
}

DeviceConfig DeviceConfig::reference() {
  DeviceConfig config;
  config.coefficients.resistances << 100.0, 100.0;
  config.coefficients.alpha << 10.0, 2.0, 2.0, 10.0;
  config.coefficients.alpha_nl << 0.75, 0.15, 0.15, 0.75;
  return config;
}

namespace {

Eigen::Matrix2d matrix2(const std::vector<double>& v) {
  Eigen::Matrix2d m;
  m << v[0], v[1], v[2], v[3];
  return m;
}

double unitarity_defect(const Unitary3& u) {
  return (u.adjoint() * u - Unitary3::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace

DeviceConfig DeviceConfig::from_config(const KeyValueConfig& kv) {
  DeviceConfig config = reference();
  if (auto r = kv.get_doubles("resistances", 2)) config.coefficients.resistances << (*r)[0], (*r)[1];
  if (auto a = kv.get_doubles("alpha", 4)) config.coefficients.alpha = matrix2(*a);
  if (auto a = kv.get_doubles("alpha_nl", 4)) config.coefficients.alpha_nl = matrix2(*a);
  if (auto range = kv.get_doubles("voltage_range", 2)) {
    config.v_min = (*range)[0];
    config.v_max = (*range)[1];
  }
  config.v_sim_max = kv.get_double("v_sim_max", config.v_sim_max);
  config.mean_total = kv.get_double("mean_total", config.mean_total);
  if (auto t = kv.get_doubles("tritter", 18)) {
    Unitary3 u;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        const auto k = static_cast<std::size_t>(2 * (3 * r + c));
        u(r, c) = {(*t)[k], (*t)[k + 1]};
      }
    }
    config.tritter = u;
  }
  config.validate();
  return config;
}

void DeviceConfig::validate() const {
  coefficients.validate();
  if (!std::isfinite(v_min) || !std::isfinite(v_max) || !std::isfinite(v_sim_max) || v_min < 0.0 ||
      v_min >= v_max || v_sim_max < v_max) {
    fail(ErrorCategory::invalid_parameter,
         "voltage range must satisfy 0 <= v_min < v_max <= v_sim_max");
  }
  if (!(mean_total > 0.0) || !std::isfinite(mean_total)) {
    fail(ErrorCategory::invalid_parameter, "mean_total must be positive");
  }
  if (tritter && unitarity_defect(*tritter) > 1e-9) {
    fail(ErrorCategory::invalid_parameter, "tritter override is not unitary");
  }
}

std::string DeviceConfig::to_config_text() const {
  const auto& c = coefficients;
  std::ostringstream out;
  out << "resistances = " << format_real(c.resistances(0)) << " " << format_real(c.resistances(1)) << "\n";
  out << "alpha = " << format_real(c.alpha(0, 0)) << " " << format_real(c.alpha(0, 1)) << " "
      << format_real(c.alpha(1, 0)) << " " << format_real(c.alpha(1, 1)) << "\n";
  out << "alpha_nl = " << format_real(c.alpha_nl(0, 0)) << " " << format_real(c.alpha_nl(0, 1)) << " "
      << format_real(c.alpha_nl(1, 0)) << " " << format_real(c.alpha_nl(1, 1)) << "\n";
  out << "voltage_range = " << format_real(v_min) << " " << format_real(v_max) << "\n";
  out << "v_sim_max = " << format_real(v_sim_max) << "\n";
  out << "mean_total = " << format_real(mean_total) << "\n";
  if (tritter) {
    out << "tritter =";
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) {
        out << " " << format_real((*tritter)(r, col).real()) << " "
            << format_real((*tritter)(r, col).imag());
      }
    }
    out << "\n";
  }
  return out.str();
}

Eigen::Vector2d dissipated_power(VoltagePair v, const ResponseCoefficients& coeffs) {
  if (!std::isfinite(v.v1) || !std::isfinite(v.v2) || v.v1 < 0.0 || v.v2 < 0.0) {
    fail(ErrorCategory::invalid_parameter, "voltages must be finite and non-negative");
  }
  coeffs.validate();
  return {v.v1 * v.v1 / coeffs.resistances(0), v.v2 * v.v2 / coeffs.resistances(1)};
}

PhasePair phases_from_voltages(VoltagePair v, const ResponseCoefficients& coeffs) {
  const Eigen::Vector2d power = dissipated_power(v, coeffs);
  const Eigen::Vector2d phase = coeffs.alpha * power + coeffs.alpha_nl * power.cwiseAbs2();
  return {phase(0), phase(1)};
}

Unitary3 tritter_unitary() {
  const double norm = 1.0 / std::sqrt(3.0);
  Unitary3 t;
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) {
      // Reduce the exponent mod 3 so entries are exact roots of unity.
      t(j, k) = std::polar(norm, 2.0 * std::numbers::pi * ((j * k) % 3) / 3.0);
    }
  }
  return t;
}

Unitary3 device_unitary(PhasePair phases, const Unitary3& tritter) {
  if (!std::isfinite(phases.dphi1) || !std::isfinite(phases.dphi2)) {
    fail(ErrorCategory::invalid_parameter, "phases must be finite");
  }
  Eigen::Vector3cd diagonal(std::polar(1.0, phases.dphi1), std::polar(1.0, phases.dphi2), 1.0);
  return tritter * diagonal.asDiagonal() * tritter;
}

Unitary3 device_unitary(PhasePair phases) {
  static const Unitary3 ideal = tritter_unitary();
  return device_unitary(phases, ideal);
}

ProbabilityRecord output_probabilities(PhasePair phases, const Unitary3& tritter) {
  const Unitary3 u = device_unitary(phases, tritter);
  ProbabilityRecord record;
  for (int input = 0; input < static_cast<int>(kInputsUsed); ++input) {
    for (int output = 0; output < static_cast<int>(kOutputModes); ++output) {
      record.p[static_cast<std::size_t>(3 * input + output)] = std::clamp(std::norm(u(output, input)), 0.0, 1.0);
    }
  }
  return record;
}

ProbabilityRecord output_probabilities(PhasePair phases) {
  static const Unitary3 ideal = tritter_unitary();
  return output_probabilities(phases, ideal);
}

CountRecord sample_counts(const ProbabilityRecord& probabilities, double mean_total, Rng& rng) {
  if (!(mean_total > 0.0) || !std::isfinite(mean_total)) {
    fail(ErrorCategory::invalid_parameter, "mean_total must be positive");
  }
  CountRecord record;
  record.mean_total = mean_total;
  for (std::size_t k = 0; k < kProbabilityCount; ++k) {
    const double mean = mean_total * probabilities.p[k];
    if (!(mean > 0.0)) {
      record.counts[k] = 0;
      continue;
    }
    std::poisson_distribution<std::int64_t> poisson(mean);
    record.counts[k] = poisson(rng);
  }
  return record;
}

ProbabilityRecord estimate_probabilities(const CountRecord& counts) {
  ProbabilityRecord record;
  for (std::size_t input = 0; input < kInputsUsed; ++input) {
    const auto* c = &counts.counts[3 * input];
    if (c[0] < 0 || c[1] < 0 || c[2] < 0) {
      fail(ErrorCategory::degenerate_data, "negative photon counts");
    }
    const std::int64_t total = c[0] + c[1] + c[2];
    if (total <= 0) {
      fail(ErrorCategory::degenerate_data,
           "zero total counts for input " + std::to_string(input + 1));
    }
    double* p = &record.p[3 * input];
    std::size_t last = 0;
    for (std::size_t j = 0; j < kOutputModes; ++j) {
      p[j] = static_cast<double>(c[j]) / static_cast<double>(total);
      if (c[j] > 0) last = j;
    }
    // The last nonzero entry closes the row, so the left-to-right sum is 1.0.
    double preceding = 0.0;
    for (std::size_t j = 0; j < last; ++j) preceding += p[j];
    p[last] = 1.0 - preceding;
  }
  return record;
}

Device::Device(DeviceConfig config)
    : config_(std::move(config)), tritter_(config_.tritter.value_or(tritter_unitary())) {
  config_.validate();
}

void Device::check_simulable(VoltagePair v) const {
  const auto inside = [&](double x) { return x >= config_.v_min && x <= config_.v_sim_max; };
  if (!inside(v.v1) || !inside(v.v2)) {
    std::ostringstream msg;
    msg << "voltage pair (" << v.v1 << ", " << v.v2 << ") outside simulable range ["
        << config_.v_min << ", " << config_.v_sim_max << "]";
    fail(ErrorCategory::invalid_parameter, msg.str());
  }
}

PhasePair Device::phases(VoltagePair v) const {
  check_simulable(v);
  return phases_from_voltages(v, config_.coefficients);
}

ProbabilityRecord Device::probabilities(VoltagePair v) const {
  return output_probabilities(phases(v), tritter_);
}

ProbabilityRecord Device::measure(VoltagePair v, Rng& rng) const {
  return estimate_probabilities(sample_counts(probabilities(v), config_.mean_total, rng));
}

}  // namespace tritcal
