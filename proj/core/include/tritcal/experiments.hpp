#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tritcal/config.hpp"
#include "tritcal/dataset.hpp"
#include "tritcal/device_model.hpp"
#include "tritcal/metrics.hpp"
#include "tritcal/mlp.hpp"

namespace tritcal {

// Every knob of the end-to-end pipeline. Read from one key-value config file;
// keys not present keep the defaults below.
struct PipelineConfig {
  DeviceConfig device = DeviceConfig::reference();
  TrainConfig train;
  LayerSpec layers;

  std::size_t grid_size = 53;
  // Kick offset in steps of the reference grid (grid_size points over the
  // device range); held fixed in volts when the sweep shrinks the grid.
  double kick_steps = 8.0;
  std::size_t kick_grid = 53;  // kick_steps counts steps of this grid over the device range
  double validation_fraction = 0.15;
  std::size_t replicas = 1;
  std::uint64_t data_seed = 7;
  std::uint64_t split_seed = 11;

  std::size_t test_repetitions = 500;
  std::size_t test_size = 100;
  std::uint64_t test_seed = 13;
  bool off_grid_test = false;

  std::vector<std::size_t> sweep_grid_sizes{10, 15, 20, 30, 40, 53};
  std::size_t trainings_per_size = 50;
  std::size_t jobs = 1;

  // Voltage window on which the probability map is injective (checked by
  // grid search when the ablation runs).
  std::optional<std::pair<double, double>> ablation_subrange = std::make_pair(3.0, 5.0);

  static PipelineConfig from_config(const KeyValueConfig& config);
  static std::vector<std::string> known_keys();
  KickConfig kick() const;
  VoltageGrid grid() const;
  // Fully resolved configuration as `key = value` text.
  std::string echo() const;
};

struct PreparedData {
  Dataset train;       // normalized
  Dataset validation;  // normalized with the training scaling
  TargetScaling scaling;
};

PreparedData prepare(const Dataset& raw, double validation_fraction, std::uint64_t split_seed);

// Reference pipeline: simulate the grid, split, train, then run the repeated
// test protocol on freshly noised examples from the same grid.
struct CalibrationRun {
  Dataset dataset;
  PreparedData data;
  TrainResult training;
  EvaluationReport test;

  std::string report_text() const;
};

CalibrationRun run_calibration(const PipelineConfig& config);

struct SweepRow {
  std::size_t grid_size = 0;
  std::size_t examples = 0;
  SampleStatistics nrmse;
  SampleStatistics cosine;
  std::vector<RunOutcome> runs;
};

struct SweepResult {
  std::vector<SweepRow> rows;

  std::string to_csv() const;
  std::string runs_csv() const;
  std::string report_text() const;
};

SweepResult run_grid_sweep(const PipelineConfig& config);

struct AblationResult {
  double v_lo = 0.0;
  double v_hi = 0.0;
  double rmse_with = 0.0;     // kicked 12 -> 4 network, (v1, v2) RMSE in volts
  double rmse_without = 0.0;  // base-only 6 -> 2 network
  double improvement = 0.0;   // 1 - with / without
  double nrmse_with = 0.0;
  double injectivity_margin = 0.0;
};

AblationResult run_kick_ablation(const PipelineConfig& config, double v_lo, double v_hi);

struct AblationStudy {
  AblationResult full_range;
  std::optional<AblationResult> subrange;

  std::string to_csv() const;
  std::string report_text() const;
};

AblationStudy run_ablation_study(const PipelineConfig& config);

// Smallest distance between probability records of settings at least
// `min_separation` volts apart, over an n x n grid on [v_lo, v_hi]^2.
double injectivity_margin(const Device& device, double v_lo, double v_hi, std::size_t n, double min_separation);

// Training on `dataset` with per-epoch validation NRMSE and cosine.
TrainResult run_epoch_curves(const Dataset& dataset, const PipelineConfig& config);

struct SurfacePoint {
  double true_v1 = 0.0;
  double true_v2 = 0.0;
  double predicted_v1 = 0.0;
  double predicted_v2 = 0.0;
  double residual = 0.0;  // Euclidean (v1, v2) error in volts
  double nrmse = 0.0;     // per-example NRMSE over the four targets
};

std::vector<SurfacePoint> run_prediction_surface(const BatchPredictor& predictor, const TestPool& pool,
                                                 std::size_t n_new, double span_lo, double span_hi, Rng& rng);
std::string surface_points_csv(const std::vector<SurfacePoint>& points);

// Noise-free P(i->j) over a resolution x resolution grid of the device range.
std::string render_probability_surfaces(const Device& device, std::size_t resolution);

// Runs body(0..count-1) on up to `jobs` threads; rethrows the first failure.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body);

// Writes config.echo, results.csv and report.txt (plus any extra files).
void write_results_directory(const std::filesystem::path& dir, const std::string& config_echo,
                             const std::string& results_csv, const std::string& report_text,
                             const std::vector<std::pair<std::string, std::string>>& extra = {});

}  // namespace tritcal
