#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tritcal/dataset.hpp"
#include "tritcal/device_model.hpp"

namespace tritcal {

// (1 / sqrt(K)) * ||y - yhat|| / (y_max - y_min)
double nrmse(std::span<const double> y, std::span<const double> yhat, double y_min, double y_max);

// y . yhat / (||y|| ||yhat||)
double cosine_similarity(std::span<const double> y, std::span<const double> yhat);

struct SampleStatistics {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1)
  std::size_t count = 0;
  bool degenerate = false;  // single observation; sd reported as 0
};

SampleStatistics sample_statistics(std::span<const double> values);

struct EvaluationReport {
  double nrmse = 0.0;
  double cosine = 0.0;
  double nrmse_spread = 0.0;
  double cosine_spread = 0.0;
  std::size_t n_repetitions = 0;
  std::size_t n_examples_per_rep = 0;
  bool degenerate_spread = false;
  double span_lo = 0.0;
  double span_hi = 0.0;
  std::vector<double> repetition_nrmse;
  std::vector<double> repetition_cosine;

  std::string to_text() const;
  std::string to_csv() const;
};

// Source of test examples. Simulated pools re-measure the chosen settings with
// fresh Poisson noise on every draw; fixed pools hand back stored examples.
class TestPool {
 public:
  static TestPool simulated(std::vector<VoltagePair> settings, Device device, KickConfig kick);
  // Settings drawn uniformly from [v_lo, v_hi]^2 instead of grid points.
  static TestPool off_grid(double v_lo, double v_hi, Device device, KickConfig kick);
  static TestPool fixed(std::vector<TrainingExample> examples);

  // Number of distinct examples available; unbounded pools report SIZE_MAX.
  std::size_t size() const;
  // `count` distinct settings per draw.
  std::vector<TrainingExample> draw(std::size_t count, Rng& rng) const;

 private:
  enum class Kind { simulated, off_grid, fixed };
  Kind kind_ = Kind::fixed;
  std::vector<VoltagePair> settings_;
  std::vector<TrainingExample> examples_;
  std::optional<Device> device_;
  KickConfig kick_;
  double v_lo_ = 0.0;
  double v_hi_ = 0.0;
};

// Maps examples to predicted targets in volts, column per example (4 rows).
using BatchPredictor = std::function<Eigen::MatrixXd(std::span<const TrainingExample>)>;

// Per repetition: draw `rep_size` examples, concatenate all targets and
// predictions, compute the cosine similarity and the mean per-example NRMSE;
// report mean and sample SD across repetitions.
EvaluationReport repeated_test_evaluation(const BatchPredictor& predictor, const TestPool& pool,
                                          std::size_t rep_count, std::size_t rep_size, double span_lo,
                                          double span_hi, Rng& rng);

struct RunOutcome {
  double validation_nrmse = 0.0;
  double test_cosine = 0.0;
};

struct TrainingsSummary {
  SampleStatistics nrmse;
  SampleStatistics cosine;
  std::size_t runs = 0;

  std::string to_text() const;
};

TrainingsSummary aggregate_trainings(std::span<const RunOutcome> runs);

}  // namespace tritcal
