#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tritcal/dataset.hpp"
#include "tritcal/device_model.hpp"
#include "tritcal/metrics.hpp"

namespace tritcal {

// Layer widths, input first. Hidden layers are ReLU, the output is linear.
struct LayerSpec {
  std::vector<std::size_t> sizes{12, 200, 200, 200, 4};

  void validate() const;
  std::size_t input_width() const { return sizes.front(); }
  std::size_t output_width() const { return sizes.back(); }
  bool operator==(const LayerSpec&) const = default;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

struct NetworkParameters {
  std::vector<DenseLayer> layers;

  LayerSpec spec() const;
  static NetworkParameters zeros(const LayerSpec& spec);
  bool all_finite() const;
  std::size_t parameter_count() const;
};

// Shaped like NetworkParameters.
using Gradients = NetworkParameters;

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  NetworkParameters first_moment;
  NetworkParameters second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(const NetworkParameters& params);
};

struct TrainConfig {
  std::size_t max_epochs = 250;
  std::size_t batch_size = 32;
  // Stop once validation loss has not improved for this many epochs.
  std::size_t patience = 25;
  bool early_stopping = true;
  AdamConfig adam;
  // Drives initialization and shuffling only.
  std::uint64_t seed = 1;

  void validate() const;
  static TrainConfig from_config(const KeyValueConfig& config);
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_nrmse = 0.0;
  double validation_cosine = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based
  // Excluded from to_text() so report files stay byte-identical across runs.
  double wall_seconds = 0.0;

  const EpochRecord& best() const { return epochs.at(best_epoch - 1); }
  std::string to_text() const;
  std::string to_csv() const;
};

struct TrainResult {
  NetworkParameters params;  // from the best validation epoch
  AdamState adam;            // optimizer state at that epoch
  TrainReport report;
};

// Weights ~ Normal(0, 2 / fan_in), zero biases.
NetworkParameters init_he(const LayerSpec& spec, Rng& rng);

Eigen::VectorXd forward(const NetworkParameters& params, const Eigen::Ref<const Eigen::VectorXd>& features);
// Column per example.
Eigen::MatrixXd forward_batch(const NetworkParameters& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs);

// Mean over examples of the per-example RMSE across output dimensions.
double loss(const NetworkParameters& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
            const Eigen::Ref<const Eigen::MatrixXd>& targets);
double loss_from_outputs(const Eigen::Ref<const Eigen::MatrixXd>& outputs,
                         const Eigen::Ref<const Eigen::MatrixXd>& targets);

// Exact gradient of `loss`; the ReLU and sqrt subgradients at 0 are 0.
Gradients backward(const NetworkParameters& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                   const Eigen::Ref<const Eigen::MatrixXd>& targets);

void adam_step(NetworkParameters& params, const Gradients& grads, AdamState& state, const AdamConfig& config);

TrainResult train(const RegressionData& train_data, const RegressionData& validation_data, const LayerSpec& spec,
                  const TrainConfig& config);

// Normalized network outputs mapped back to volts, column per example.
Eigen::MatrixXd predict_volts(const NetworkParameters& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                              const TargetScaling& scaling);

struct Prediction {
  double v1 = 0.0;
  double v2 = 0.0;
  // max(|out3 - out1 - dv1|, |out4 - out2 - dv2|)
  double consistency_residual = 0.0;
  std::array<double, kTargetCount> outputs{};
};

Prediction predict(const NetworkParameters& params, std::span<const double> features, const TargetScaling& scaling,
                   const KickConfig& kick);

// Network evaluation on the 12 features of each example, outputs in volts.
BatchPredictor network_predictor(NetworkParameters params, TargetScaling scaling);

// Validation-set figures of merit in volts: mean per-example NRMSE over the
// scaling span, and cosine similarity of the concatenated target vectors.
struct ValidationMetrics {
  double loss = 0.0;
  double nrmse = 0.0;
  double cosine = 0.0;
};
ValidationMetrics validation_metrics(const Eigen::Ref<const Eigen::MatrixXd>& outputs,
                                     const Eigen::Ref<const Eigen::MatrixXd>& targets, const TargetScaling& scaling);

}  // namespace tritcal
