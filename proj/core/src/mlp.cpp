#include "tritcal/mlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tritcal/error.hpp"
#include "tritcal/metrics.hpp"

namespace tritcal {

void LayerSpec::validate() const {
  if (sizes.size() < 2) fail(ErrorCategory::invalid_parameter, "a network needs at least two layers");
  for (const auto width : sizes) {
    if (width == 0) fail(ErrorCategory::invalid_parameter, "layer widths must be positive");
  }
}

LayerSpec NetworkParameters::spec() const {
  LayerSpec spec;
  spec.sizes.clear();
  if (layers.empty()) return spec;
  spec.sizes.push_back(static_cast<std::size_t>(layers.front().weights.cols()));
  for (const auto& layer : layers) spec.sizes.push_back(static_cast<std::size_t>(layer.weights.rows()));
  return spec;
}

NetworkParameters NetworkParameters::zeros(const LayerSpec& spec) {
  spec.validate();
  NetworkParameters params;
  for (std::size_t l = 0; l + 1 < spec.sizes.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(spec.sizes[l]);
    const auto out = static_cast<Eigen::Index>(spec.sizes[l + 1]);
    params.layers.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
  return params;
}

bool NetworkParameters::all_finite() const {
  return std::all_of(layers.begin(), layers.end(),
                     [](const DenseLayer& l) { return l.weights.allFinite() && l.bias.allFinite(); });
}

std::size_t NetworkParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

AdamState AdamState::zeros_like(const NetworkParameters& params) {
  const auto spec = params.spec();
  return {NetworkParameters::zeros(spec), NetworkParameters::zeros(spec), 0};
}

void TrainConfig::validate() const {
  if (max_epochs == 0 || batch_size == 0 || patience == 0) {
    fail(ErrorCategory::invalid_parameter, "epochs, batch size and patience must be positive");
  }
  if (patience > max_epochs) fail(ErrorCategory::invalid_parameter, "patience must not exceed max_epochs");
  if (!(adam.learning_rate > 0.0) || !(adam.epsilon > 0.0) || !(adam.beta1 > 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 > 0.0 && adam.beta2 < 1.0)) {
    fail(ErrorCategory::invalid_parameter, "invalid Adam hyperparameters");
  }
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& kv) {
  TrainConfig config;
  const auto positive = [&](std::string_view key, std::size_t fallback) {
    const auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
    if (v <= 0) fail(ErrorCategory::invalid_parameter, std::string(key) + " must be positive");
    return static_cast<std::size_t>(v);
  };
  config.max_epochs = positive("max_epochs", config.max_epochs);
  config.batch_size = positive("batch_size", config.batch_size);
  config.patience = positive("patience", config.patience);
  config.early_stopping = kv.get_bool("early_stopping", config.early_stopping);
  config.adam.learning_rate = kv.get_double("learning_rate", config.adam.learning_rate);
  config.adam.beta1 = kv.get_double("adam_beta1", config.adam.beta1);
  config.adam.beta2 = kv.get_double("adam_beta2", config.adam.beta2);
  config.adam.epsilon = kv.get_double("adam_epsilon", config.adam.epsilon);
  config.seed = kv.get_seed("train_seed", config.seed);
  config.patience = std::min(config.patience, config.max_epochs);
  config.validate();
  return config;
}

std::string TrainReport::to_text() const {
  std::ostringstream out;
  out << "epochs_run = " << epochs.size() << "\n"
      << "best_epoch = " << best_epoch << "\n";
  if (!epochs.empty()) {
    const auto& b = best();
    out << "best_validation_loss = " << format_real(b.validation_loss) << "\n"
        << "best_validation_nrmse = " << format_real(b.validation_nrmse) << "\n"
        << "best_validation_cosine = " << format_real(b.validation_cosine) << "\n"
        << "final_train_loss = " << format_real(epochs.back().train_loss) << "\n";
  }
  return out.str();
}

std::string TrainReport::to_csv() const {
  std::string out = "epoch,train_loss,validation_loss,validation_nrmse,validation_cosine\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + format_real(e.train_loss) + "," + format_real(e.validation_loss) + "," +
           format_real(e.validation_nrmse) + "," + format_real(e.validation_cosine) + "\n";
  }
  return out;
}

NetworkParameters init_he(const LayerSpec& spec, Rng& rng) {
  NetworkParameters params = NetworkParameters::zeros(spec);
  for (auto& layer : params.layers) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(layer.weights.cols())));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = normal(rng);
    }
  }
  return params;
}

namespace {

void check_input(const NetworkParameters& params, Eigen::Index rows) {
  if (params.layers.empty()) fail(ErrorCategory::shape_mismatch, "network has no layers");
  if (params.layers.front().weights.cols() != rows) {
    fail(ErrorCategory::shape_mismatch, "feature length " + std::to_string(rows) + " does not match input width " +
                                            std::to_string(params.layers.front().weights.cols()));
  }
}

// Activations of every layer for one batch; reused across batches.
struct Workspace {
  std::vector<Eigen::MatrixXd> pre;   // affine outputs per layer
  std::vector<Eigen::MatrixXd> post;  // ReLU outputs of hidden layers
  std::vector<Eigen::MatrixXd> delta;
};

const Eigen::MatrixXd& run_forward(const NetworkParameters& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                   Workspace& ws) {
  const std::size_t n_layers = params.layers.size();
  ws.pre.resize(n_layers);
  ws.post.resize(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = params.layers[l];
    if (l == 0) {
      ws.pre[l].noalias() = layer.weights * inputs;
    } else {
      ws.pre[l].noalias() = layer.weights * ws.post[l - 1];
    }
    ws.pre[l].colwise() += layer.bias;
    if (l + 1 < n_layers) ws.post[l] = ws.pre[l].cwiseMax(0.0);
  }
  return ws.pre.back();
}

// Loss gradient with respect to the outputs; returns the loss.
double output_gradient(const Eigen::MatrixXd& outputs, const Eigen::Ref<const Eigen::MatrixXd>& targets,
                       Eigen::MatrixXd& gradient) {
  const auto n = outputs.cols();
  const auto dims = static_cast<double>(outputs.rows());
  gradient = outputs - targets;
  double total = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double rmse = std::sqrt(gradient.col(k).squaredNorm() / dims);
    total += rmse;
    if (rmse > 0.0) {
      gradient.col(k) /= dims * rmse * static_cast<double>(n);
    } else {
      gradient.col(k).setZero();
    }
  }
  return total / static_cast<double>(n);
}

double run_backward(const NetworkParameters& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                    const Eigen::Ref<const Eigen::MatrixXd>& targets, Workspace& ws, Gradients& grads) {
  const std::size_t n_layers = params.layers.size();
  const Eigen::MatrixXd& outputs = run_forward(params, inputs, ws);
  ws.delta.resize(n_layers);
  const double value = output_gradient(outputs, targets, ws.delta.back());
  for (std::size_t l = n_layers; l-- > 0;) {
    auto& g = grads.layers[l];
    if (l == 0) {
      g.weights.noalias() = ws.delta[l] * inputs.transpose();
    } else {
      g.weights.noalias() = ws.delta[l] * ws.post[l - 1].transpose();
    }
    g.bias = ws.delta[l].rowwise().sum();
    if (l > 0) {
      ws.delta[l - 1].noalias() = params.layers[l].weights.transpose() * ws.delta[l];
      ws.delta[l - 1] = (ws.pre[l - 1].array() > 0.0).select(ws.delta[l - 1], 0.0);
    }
  }
  return value;
}

}  // namespace

Eigen::MatrixXd forward_batch(const NetworkParameters& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
  check_input(params, inputs.rows());
  Workspace ws;
  return run_forward(params, inputs, ws);
}

Eigen::VectorXd forward(const NetworkParameters& params, const Eigen::Ref<const Eigen::VectorXd>& features) {
  return forward_batch(params, features);
}

double loss_from_outputs(const Eigen::Ref<const Eigen::MatrixXd>& outputs,
                         const Eigen::Ref<const Eigen::MatrixXd>& targets) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols()) {
    fail(ErrorCategory::shape_mismatch, "outputs and targets differ in shape");
  }
  if (outputs.cols() == 0) fail(ErrorCategory::degenerate_data, "loss of an empty batch");
  const auto dims = static_cast<double>(outputs.rows());
  double total = 0.0;
  for (Eigen::Index k = 0; k < outputs.cols(); ++k) {
    total += std::sqrt((outputs.col(k) - targets.col(k)).squaredNorm() / dims);
  }
  return total / static_cast<double>(outputs.cols());
}

double loss(const NetworkParameters& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
            const Eigen::Ref<const Eigen::MatrixXd>& targets) {
  return loss_from_outputs(forward_batch(params, inputs), targets);
}

Gradients backward(const NetworkParameters& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                   const Eigen::Ref<const Eigen::MatrixXd>& targets) {
  check_input(params, inputs.rows());
  if (inputs.cols() == 0) fail(ErrorCategory::degenerate_data, "gradient of an empty batch");
  if (targets.cols() != inputs.cols() || targets.rows() != params.layers.back().weights.rows()) {
    fail(ErrorCategory::shape_mismatch, "targets do not match the batch or the output width");
  }
  Gradients grads = NetworkParameters::zeros(params.spec());
  Workspace ws;
  run_backward(params, inputs, targets, ws, grads);
  return grads;
}

void adam_step(NetworkParameters& params, const Gradients& grads, AdamState& state, const AdamConfig& config) {
  if (grads.layers.size() != params.layers.size() || state.first_moment.layers.size() != params.layers.size()) {
    fail(ErrorCategory::shape_mismatch, "gradient or optimizer state does not match the network");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  const auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseAbs2();
    theta.array() -= config.learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + config.epsilon);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    const auto& g = grads.layers[l];
    if (g.weights.rows() != p.weights.rows() || g.weights.cols() != p.weights.cols()) {
      fail(ErrorCategory::shape_mismatch, "gradient shape mismatch at layer " + std::to_string(l));
    }
    update(p.weights, g.weights, state.first_moment.layers[l].weights, state.second_moment.layers[l].weights);
    update(p.bias, g.bias, state.first_moment.layers[l].bias, state.second_moment.layers[l].bias);
  }
}

ValidationMetrics validation_metrics(const Eigen::Ref<const Eigen::MatrixXd>& outputs,
                                     const Eigen::Ref<const Eigen::MatrixXd>& targets, const TargetScaling& scaling) {
  if (static_cast<std::size_t>(outputs.rows()) != scaling.width()) {
    fail(ErrorCategory::shape_mismatch, "scaling width does not match the outputs");
  }
  ValidationMetrics metrics;
  metrics.loss = loss_from_outputs(outputs, targets);
  const auto dims = static_cast<std::size_t>(outputs.rows());
  const auto n = static_cast<std::size_t>(outputs.cols());
  std::vector<double> truth(dims * n), guess(dims * n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t m = 0; m < dims; ++m) {
      const auto r = static_cast<Eigen::Index>(m), c = static_cast<Eigen::Index>(k);
      truth[k * dims + m] = scaling.denormalize(m, targets(r, c));
      guess[k * dims + m] = scaling.denormalize(m, outputs(r, c));
    }
  }
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    total += nrmse(std::span(truth).subspan(k * dims, dims), std::span(guess).subspan(k * dims, dims),
                   scaling.span_lo(), scaling.span_hi());
  }
  metrics.nrmse = total / static_cast<double>(n);
  const bool zero_guess = std::all_of(guess.begin(), guess.end(), [](double g) { return g == 0.0; });
  metrics.cosine = zero_guess ? 0.0 : cosine_similarity(truth, guess);
  return metrics;
}

TrainResult train(const RegressionData& train_data, const RegressionData& validation_data, const LayerSpec& spec,
                  const TrainConfig& config) {
  spec.validate();
  config.validate();
  if (train_data.count() == 0 || validation_data.count() == 0) {
    fail(ErrorCategory::degenerate_data, "training and validation sets must be nonempty");
  }
  if (static_cast<std::size_t>(train_data.inputs.rows()) != spec.input_width() ||
      static_cast<std::size_t>(train_data.targets.rows()) != spec.output_width() ||
      validation_data.inputs.rows() != train_data.inputs.rows() ||
      validation_data.targets.rows() != train_data.targets.rows()) {
    fail(ErrorCategory::shape_mismatch, "data widths do not match the layer spec");
  }
  if (!(train_data.scaling == validation_data.scaling)) {
    fail(ErrorCategory::invalid_parameter, "training and validation data use different target scalings");
  }

  const auto started = std::chrono::steady_clock::now();
  Rng rng = make_rng(config.seed);
  TrainResult result;
  NetworkParameters params = init_he(spec, rng);
  AdamState adam = AdamState::zeros_like(params);
  Gradients grads = NetworkParameters::zeros(spec);
  Workspace ws;

  const auto n = static_cast<std::size_t>(train_data.count());
  const std::size_t batch = std::min(config.batch_size, n);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::MatrixXd batch_inputs(train_data.inputs.rows(), static_cast<Eigen::Index>(batch));
  Eigen::MatrixXd batch_targets(train_data.targets.rows(), static_cast<Eigen::Index>(batch));

  double best_loss = INFINITY;
  result.params = params;
  result.adam = adam;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const auto size = static_cast<Eigen::Index>(std::min(batch, n - start));
      batch_inputs.resize(Eigen::NoChange, size);
      batch_targets.resize(Eigen::NoChange, size);
      for (Eigen::Index k = 0; k < size; ++k) {
        const auto column = order[start + static_cast<std::size_t>(k)];
        batch_inputs.col(k) = train_data.inputs.col(column);
        batch_targets.col(k) = train_data.targets.col(column);
      }
      loss_sum += run_backward(params, batch_inputs, batch_targets, ws, grads) * static_cast<double>(size);
      adam_step(params, grads, adam, config.adam);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(n);
    const Eigen::MatrixXd outputs = run_forward(params, validation_data.inputs, ws);
    if (!std::isfinite(record.train_loss) || !outputs.allFinite()) {
      fail(ErrorCategory::training_diverged, "non-finite loss at epoch " + std::to_string(epoch));
    }
    const auto metrics = validation_metrics(outputs, validation_data.targets, validation_data.scaling);
    record.validation_loss = metrics.loss;
    record.validation_nrmse = metrics.nrmse;
    record.validation_cosine = metrics.cosine;
    result.report.epochs.push_back(record);

    if (record.validation_loss < best_loss) {
      best_loss = record.validation_loss;
      result.report.best_epoch = epoch;
      result.params = params;
      result.adam = adam;
    }
    if (config.early_stopping && epoch - result.report.best_epoch >= config.patience) break;
  }
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

Eigen::MatrixXd predict_volts(const NetworkParameters& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                              const TargetScaling& scaling) {
  Eigen::MatrixXd out = forward_batch(params, inputs);
  if (static_cast<std::size_t>(out.rows()) != scaling.width()) {
    fail(ErrorCategory::shape_mismatch, "scaling width does not match the network output");
  }
  for (Eigen::Index m = 0; m < out.rows(); ++m) {
    for (Eigen::Index k = 0; k < out.cols(); ++k) {
      out(m, k) = scaling.denormalize(static_cast<std::size_t>(m), out(m, k));
    }
  }
  return out;
}

Prediction predict(const NetworkParameters& params, std::span<const double> features, const TargetScaling& scaling,
                   const KickConfig& kick) {
  const Eigen::Map<const Eigen::VectorXd> input(features.data(), static_cast<Eigen::Index>(features.size()));
  const Eigen::MatrixXd volts = predict_volts(params, input, scaling);
  if (volts.rows() != static_cast<Eigen::Index>(kTargetCount)) {
    fail(ErrorCategory::shape_mismatch, "prediction needs a 4-output network");
  }
  Prediction p;
  for (std::size_t m = 0; m < kTargetCount; ++m) p.outputs[m] = volts(static_cast<Eigen::Index>(m), 0);
  p.v1 = p.outputs[0];
  p.v2 = p.outputs[1];
  p.consistency_residual =
      std::max(std::abs(p.outputs[2] - p.outputs[0] - kick.dv1), std::abs(p.outputs[3] - p.outputs[1] - kick.dv2));
  return p;
}

BatchPredictor network_predictor(NetworkParameters params, TargetScaling scaling) {
  return [params = std::move(params), scaling = std::move(scaling)](std::span<const TrainingExample> examples) {
    Eigen::MatrixXd inputs(static_cast<Eigen::Index>(kFeatureCount), static_cast<Eigen::Index>(examples.size()));
    for (std::size_t k = 0; k < examples.size(); ++k) {
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        inputs(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k)) = examples[k].features[f];
      }
    }
    return predict_volts(params, inputs, scaling);
  };
}

}  // namespace tritcal
