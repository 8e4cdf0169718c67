#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tritcal/device_model.hpp"

namespace tritcal {

struct VoltageGrid {
  std::vector<double> v1_values;
  std::vector<double> v2_values;

  std::size_t size() const { return v1_values.size() * v2_values.size(); }
  // Row-major over (v1 index, v2 index).
  VoltagePair at(std::size_t index) const;
  std::vector<VoltagePair> pairs() const;
  double step() const;
};

VoltageGrid build_grid(double v_min, double v_max, std::size_t n);

struct KickConfig {
  double dv1 = 0.0;
  double dv2 = 0.0;

  // `steps` grid steps of an n-point grid spanning [v_min, v_max].
  static KickConfig from_steps(double v_min, double v_max, std::size_t n, double steps);
  void validate() const;
  bool operator==(const KickConfig&) const = default;
};

inline constexpr std::size_t kFeatureCount = 2 * kProbabilityCount;
inline constexpr std::size_t kTargetCount = 4;

// features = [P(i->j) at (v1, v2), P~(i->j) at the kicked setting]
// targets  = [v1, v2, v1 + dv1, v2 + dv2]
struct TrainingExample {
  std::array<double, kFeatureCount> features{};
  std::array<double, kTargetCount> targets{};

  bool operator==(const TrainingExample&) const = default;
};

TrainingExample make_example(VoltagePair base, const KickConfig& kick, const ProbabilityRecord& at_base,
                             const ProbabilityRecord& at_kicked);

enum class Provenance { simulated, experimental };
std::string_view to_string(Provenance provenance);
Provenance parse_provenance(std::string_view text);

// Per-dimension affine map of targets onto [0, 1].
struct TargetScaling {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t width() const { return lo.size(); }
  double normalize(std::size_t dim, double value) const { return (value - lo[dim]) / (hi[dim] - lo[dim]); }
  double denormalize(std::size_t dim, double value) const { return lo[dim] + value * (hi[dim] - lo[dim]); }
  // Range across all target dimensions, in volts: the NRMSE normalization span.
  double span_lo() const;
  double span_hi() const;
  TargetScaling leading(std::size_t dims) const;
  bool operator==(const TargetScaling&) const = default;
};

struct Dataset {
  std::vector<TrainingExample> examples;
  Provenance provenance = Provenance::simulated;
  KickConfig kick;
  // Set once targets have been normalized; examples then hold scaled targets.
  std::optional<TargetScaling> scaling;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

// One example per grid pair (and per replica): base frequencies from Poisson
// counts at (v1, v2), kicked frequencies from counts at (v1 + dv1, v2 + dv2).
Dataset generate_simulated(const VoltageGrid& grid, const KickConfig& kick, const Device& device, Rng& rng,
                           std::size_t replicas = 1);

std::pair<Dataset, Dataset> split(const Dataset& dataset, double validation_fraction, Rng& rng);

// Fits the scaling on `train` and returns the normalized copy.
std::pair<Dataset, TargetScaling> normalize_targets(const Dataset& train);
Dataset apply_scaling(const Dataset& dataset, const TargetScaling& scaling);
Dataset denormalize(const Dataset& dataset);

// Dense column-per-example view consumed by the network.
enum class FeatureSet {
  kicked,     // 12 features -> 4 targets
  base_only,  // 6 features -> 2 targets (kick ablation)
};

struct RegressionData {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;  // normalized
  TargetScaling scaling;

  Eigen::Index count() const { return inputs.cols(); }
};

RegressionData to_regression(const Dataset& normalized, FeatureSet features = FeatureSet::kicked);

// Dataset CSV: `v1,v2,v1k,v2k,p11,p12,p13,p21,p22,p23,q11,q12,q13,q21,q22,q23`.
inline constexpr std::string_view kDatasetHeader =
    "v1,v2,v1k,v2k,p11,p12,p13,p21,p22,p23,q11,q12,q13,q21,q22,q23";
// Measurement CSV: one row per voltage setting.
inline constexpr std::string_view kMeasurementHeader = "v1,v2,p11,p12,p13,p21,p22,p23";

void write_csv(const Dataset& dataset, const std::filesystem::path& path);
std::string to_csv(const Dataset& dataset);
Dataset read_csv(const std::filesystem::path& path);
Dataset parse_csv(std::string_view text, const std::string& source = "<string>");

struct MeasurementRow {
  VoltagePair voltages;
  ProbabilityRecord probabilities;
};
void write_measurements(std::span<const MeasurementRow> rows, const std::filesystem::path& path);

struct IngestionResult {
  Dataset dataset;
  std::size_t dropped = 0;  // grid points whose kicked partner falls off the grid
};

// Accepts either a measurement CSV on a rectangular voltage grid (examples are
// formed by pairing each point with its kicked grid partner) or a dataset CSV
// whose kick must match `kick`.
IngestionResult ingest_experimental(const std::filesystem::path& path, const KickConfig& kick);
IngestionResult ingest_experimental_text(std::string_view text, const KickConfig& kick,
                                         const std::string& source = "<string>");

// Kick of `steps` grid steps along each axis of a measurement CSV (smallest
// spacing per axis). Dataset CSVs carry their own kick and are rejected here.
KickConfig measurement_kick(std::string_view text, double steps, const std::string& source = "<string>");

// FNV-1a over the example bit patterns, provenance and kick.
std::uint64_t content_hash(const Dataset& dataset);

}  // namespace tritcal
