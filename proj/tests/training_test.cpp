#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tritcal/experiments.hpp"

using namespace tritcal;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

class ReferenceTraining : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    config_ = new PipelineConfig(PipelineConfig::from_config(KeyValueConfig{}));
    Rng rng = make_rng(config_->data_seed);
    dataset_ = new Dataset(generate_simulated(config_->grid(), config_->kick(), Device(config_->device), rng));
    prepared_ = new PreparedData(prepare(*dataset_, config_->validation_fraction, config_->split_seed));
  }
  static void TearDownTestSuite() {
    delete prepared_;
    delete dataset_;
    delete config_;
  }
  static inline PipelineConfig* config_ = nullptr;
  static inline Dataset* dataset_ = nullptr;
  static inline PreparedData* prepared_ = nullptr;
};

}  // namespace

TEST_F(ReferenceTraining, LossDecreasesForTenSeeds) {
  const auto train_data = to_regression(prepared_->train);
  const auto val_data = to_regression(prepared_->validation);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    TrainConfig c = config_->train;
    c.max_epochs = 10;
    c.patience = 10;
    c.early_stopping = false;
    c.seed = seed;
    const auto r = train(train_data, val_data, config_->layers, c);
    ASSERT_EQ(r.report.epochs.size(), 10u);
    EXPECT_LT(r.report.epochs[9].train_loss, r.report.epochs[0].train_loss) << "seed " << seed;
  }
}

TEST_F(ReferenceTraining, TrainedNetworkDiagnostics) {
  const auto train_data = to_regression(prepared_->train);
  const auto val_data = to_regression(prepared_->validation);
  const auto r = train(train_data, val_data, config_->layers, config_->train);
  const auto& scaling = prepared_->scaling;
  const auto kick = dataset_->kick;

  // self-consistency residual tracks the actual voltage error on fresh test data
  const Device device(config_->device);
  const auto pool = TestPool::simulated(config_->grid().pairs(), device, kick);
  Rng rng = make_rng(99);
  std::vector<double> residuals, errors;
  for (const auto& ex : pool.draw(1000, rng)) {
    const auto p = predict(r.params, ex.features, scaling, kick);
    residuals.push_back(p.consistency_residual);
    errors.push_back(std::abs(p.v1 - ex.targets[0]));
    errors.push_back(std::abs(p.v2 - ex.targets[1]));
  }
  EXPECT_LT(median(residuals), 5.0 * median(errors));

  // training examples come back within the run's own training-error band
  const double fitted = loss(r.params, train_data.inputs, train_data.targets);
  EXPECT_LT(fitted, 2.0 * r.report.epochs[r.report.best_epoch - 1].train_loss);
  EXPECT_LE(r.report.best().validation_nrmse, 0.03);
}
