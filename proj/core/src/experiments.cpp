#include "tritcal/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "tritcal/error.hpp"

namespace tritcal {

namespace {

std::size_t positive_size(const KeyValueConfig& kv, std::string_view key, std::size_t fallback) {
  const auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
  if (v <= 0) fail(ErrorCategory::invalid_parameter, std::string(key) + " must be positive");
  return static_cast<std::size_t>(v);
}

std::string join_sizes(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t k = 0; k < values.size(); ++k) out += (k ? " " : "") + std::to_string(values[k]);
  return out;
}

}  // namespace

std::vector<std::string> PipelineConfig::known_keys() {
  return {"resistances", "alpha", "alpha_nl", "voltage_range", "v_sim_max", "mean_total", "tritter",
          "max_epochs", "batch_size", "patience", "early_stopping", "learning_rate", "adam_beta1",
          "adam_beta2", "adam_epsilon", "train_seed", "layers", "grid_size", "kick_steps", "kick_grid",
          "validation_fraction", "replicas", "data_seed", "split_seed", "test_repetitions", "test_size",
          "test_seed", "test_sampling", "sweep_grid_sizes", "trainings_per_size", "jobs", "ablation_subrange"};
}

PipelineConfig PipelineConfig::from_config(const KeyValueConfig& kv) {
  const auto known = known_keys();
  for (const auto& key : kv.keys()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      fail(ErrorCategory::parse, "unknown config key `" + key + "`");
    }
  }
  PipelineConfig config;
  config.device = DeviceConfig::from_config(kv);
  config.train = TrainConfig::from_config(kv);
  if (auto layers = kv.get_ints("layers")) {
    config.layers.sizes.clear();
    for (const auto w : *layers) {
      if (w <= 0) fail(ErrorCategory::invalid_parameter, "layer widths must be positive");
      config.layers.sizes.push_back(static_cast<std::size_t>(w));
    }
  }
  config.layers.validate();
  if (config.layers.input_width() != kFeatureCount || config.layers.output_width() != kTargetCount) {
    fail(ErrorCategory::invalid_parameter, "layers must start at 12 inputs and end at 4 outputs");
  }
  config.grid_size = positive_size(kv, "grid_size", config.grid_size);
  config.kick_steps = kv.get_double("kick_steps", config.kick_steps);
  config.kick_grid = positive_size(kv, "kick_grid", config.kick_grid);
  config.validation_fraction = kv.get_double("validation_fraction", config.validation_fraction);
  config.replicas = positive_size(kv, "replicas", config.replicas);
  config.data_seed = kv.get_seed("data_seed", config.data_seed);
  config.split_seed = kv.get_seed("split_seed", config.split_seed);
  config.test_repetitions = positive_size(kv, "test_repetitions", config.test_repetitions);
  config.test_size = positive_size(kv, "test_size", config.test_size);
  config.test_seed = kv.get_seed("test_seed", config.test_seed);
  const auto sampling = kv.get_string("test_sampling", "grid");
  if (sampling != "grid" && sampling != "off_grid") {
    fail(ErrorCategory::parse, "test_sampling must be `grid` or `off_grid`");
  }
  config.off_grid_test = sampling == "off_grid";
  if (auto sizes = kv.get_ints("sweep_grid_sizes")) {
    config.sweep_grid_sizes.clear();
    for (const auto s : *sizes) {
      if (s < 2) fail(ErrorCategory::invalid_parameter, "sweep grid sizes must be >= 2");
      config.sweep_grid_sizes.push_back(static_cast<std::size_t>(s));
    }
    if (!std::is_sorted(config.sweep_grid_sizes.begin(), config.sweep_grid_sizes.end())) {
      fail(ErrorCategory::invalid_parameter, "sweep grid sizes must be ascending");
    }
  }
  config.trainings_per_size = positive_size(kv, "trainings_per_size", config.trainings_per_size);
  config.jobs = positive_size(kv, "jobs", config.jobs);
  if (auto sub = kv.find("ablation_subrange")) {
    if (trim(*sub) == "none") {
      config.ablation_subrange.reset();
    } else {
      const auto range = kv.get_doubles("ablation_subrange", 2);
      config.ablation_subrange = std::make_pair((*range)[0], (*range)[1]);
    }
  }
  config.kick();
  return config;
}

KickConfig PipelineConfig::kick() const {
  return KickConfig::from_steps(device.v_min, device.v_max, kick_grid, kick_steps);
}

VoltageGrid PipelineConfig::grid() const { return build_grid(device.v_min, device.v_max, grid_size); }

std::string PipelineConfig::echo() const {
  std::ostringstream out;
  out << device.to_config_text();
  out << "max_epochs = " << train.max_epochs << "\n"
      << "batch_size = " << train.batch_size << "\n"
      << "patience = " << train.patience << "\n"
      << "early_stopping = " << (train.early_stopping ? "true" : "false") << "\n"
      << "learning_rate = " << format_real(train.adam.learning_rate) << "\n"
      << "adam_beta1 = " << format_real(train.adam.beta1) << "\n"
      << "adam_beta2 = " << format_real(train.adam.beta2) << "\n"
      << "adam_epsilon = " << format_real(train.adam.epsilon) << "\n"
      << "train_seed = " << train.seed << "\n"
      << "layers = " << join_sizes(layers.sizes) << "\n"
      << "grid_size = " << grid_size << "\n"
      << "kick_steps = " << format_real(kick_steps) << "\n"
      << "kick_grid = " << kick_grid << "\n"
      << "validation_fraction = " << format_real(validation_fraction) << "\n"
      << "replicas = " << replicas << "\n"
      << "data_seed = " << data_seed << "\n"
      << "split_seed = " << split_seed << "\n"
      << "test_repetitions = " << test_repetitions << "\n"
      << "test_size = " << test_size << "\n"
      << "test_seed = " << test_seed << "\n"
      << "test_sampling = " << (off_grid_test ? "off_grid" : "grid") << "\n"
      << "sweep_grid_sizes = " << join_sizes(sweep_grid_sizes) << "\n"
      << "trainings_per_size = " << trainings_per_size << "\n"
      << "jobs = " << jobs << "\n";
  if (ablation_subrange) {
    out << "ablation_subrange = " << format_real(ablation_subrange->first) << " "
        << format_real(ablation_subrange->second) << "\n";
  } else {
    out << "ablation_subrange = none\n";
  }
  return out.str();
}

PreparedData prepare(const Dataset& raw, double validation_fraction, std::uint64_t split_seed) {
  Rng rng = make_rng(split_seed);
  auto [train_raw, validation_raw] = split(raw, validation_fraction, rng);
  auto [train, scaling] = normalize_targets(train_raw);
  return {std::move(train), apply_scaling(validation_raw, scaling), scaling};
}

namespace {

TestPool make_test_pool(const PipelineConfig& config, const Device& device) {
  if (config.off_grid_test) {
    return TestPool::off_grid(device.config().v_min, device.config().v_max, device, config.kick());
  }
  return TestPool::simulated(config.grid().pairs(), device, config.kick());
}

std::string indent_report(const std::string& prefix, const std::string& text) {
  std::string out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out += prefix + line + "\n";
  return out;
}

}  // namespace

std::string CalibrationRun::report_text() const {
  std::ostringstream out;
  out << "dataset_examples = " << dataset.size() << "\n"
      << "train_examples = " << data.train.size() << "\n"
      << "validation_examples = " << data.validation.size() << "\n"
      << "dataset_hash = " << std::hex << content_hash(dataset) << std::dec << "\n";
  out << indent_report("train.", training.report.to_text());
  out << indent_report("test.", test.to_text());
  return out.str();
}

CalibrationRun run_calibration(const PipelineConfig& config) {
  const Device device(config.device);
  CalibrationRun run;
  Rng data_rng = make_rng(config.data_seed);
  run.dataset = generate_simulated(config.grid(), config.kick(), device, data_rng, config.replicas);
  run.data = prepare(run.dataset, config.validation_fraction, config.split_seed);
  run.training = train(to_regression(run.data.train), to_regression(run.data.validation), config.layers, config.train);
  Rng test_rng = make_rng(config.test_seed);
  run.test = repeated_test_evaluation(network_predictor(run.training.params, run.data.scaling),
                                      make_test_pool(config, device), config.test_repetitions, config.test_size,
                                      run.data.scaling.span_lo(), run.data.scaling.span_hi(), test_rng);
  return run;
}

// --- grid sweep --------------------------------------------------------------

std::string SweepResult::to_csv() const {
  std::string out = "grid_size,examples,runs,nrmse_mean,nrmse_sd,cosine_mean,cosine_sd,spread_degenerate\n";
  for (const auto& row : rows) {
    out += std::to_string(row.grid_size) + "," + std::to_string(row.examples) + "," +
           std::to_string(row.runs.size()) + "," + format_real(row.nrmse.mean) + "," + format_real(row.nrmse.sd) +
           "," + format_real(row.cosine.mean) + "," + format_real(row.cosine.sd) + "," +
           (row.cosine.degenerate ? "true" : "false") + "\n";
  }
  return out;
}

std::string SweepResult::runs_csv() const {
  std::string out = "grid_size,run,validation_nrmse,test_cosine\n";
  for (const auto& row : rows) {
    for (std::size_t r = 0; r < row.runs.size(); ++r) {
      out += std::to_string(row.grid_size) + "," + std::to_string(r + 1) + "," +
             format_real(row.runs[r].validation_nrmse) + "," + format_real(row.runs[r].test_cosine) + "\n";
    }
  }
  return out;
}

std::string SweepResult::report_text() const {
  std::ostringstream out;
  out << "sizes = " << rows.size() << "\n";
  for (const auto& row : rows) {
    const auto p = "size_" + std::to_string(row.grid_size) + ".";
    out << p << "nrmse_mean = " << format_real(row.nrmse.mean) << "\n"
        << p << "nrmse_sd = " << format_real(row.nrmse.sd) << "\n"
        << p << "cosine_mean = " << format_real(row.cosine.mean) << "\n"
        << p << "cosine_sd = " << format_real(row.cosine.sd) << "\n"
        << p << "spread_degenerate = " << (row.cosine.degenerate ? "true" : "false") << "\n";
  }
  out << "spread_kind = sample_sd\n";
  return out.str();
}

SweepResult run_grid_sweep(const PipelineConfig& config) {
  if (config.sweep_grid_sizes.empty()) fail(ErrorCategory::invalid_parameter, "empty sweep");
  const Device device(config.device);
  const KickConfig kick = config.kick();

  // One noisy test set from the largest grid, shared by every size and run.
  const std::size_t largest = std::max(config.sweep_grid_sizes.back(), config.grid_size);
  Rng test_rng = make_rng(config.test_seed);
  const auto test_pool = TestPool::simulated(build_grid(device.config().v_min, device.config().v_max, largest).pairs(),
                                             device, kick);
  const auto test_examples = test_pool.draw(config.test_size, test_rng);
  const auto fixed_pool = TestPool::fixed(test_examples);

  SweepResult result;
  for (const auto size : config.sweep_grid_sizes) {
    SweepRow row;
    row.grid_size = size;
    Rng data_rng = make_rng(config.data_seed, size);
    const auto dataset =
        generate_simulated(build_grid(device.config().v_min, device.config().v_max, size), kick, device, data_rng,
                           config.replicas);
    row.examples = dataset.size();
    const auto data = prepare(dataset, config.validation_fraction, config.split_seed);
    const auto train_data = to_regression(data.train);
    const auto validation_data = to_regression(data.validation);

    row.runs.resize(config.trainings_per_size);
    parallel_for(config.trainings_per_size, config.jobs, [&](std::size_t r) {
      TrainConfig train_config = config.train;
      train_config.seed = config.train.seed + r;
      const auto trained = train(train_data, validation_data, config.layers, train_config);
      Rng eval_rng = make_rng(config.test_seed, 1 + r);
      const auto test = repeated_test_evaluation(network_predictor(trained.params, data.scaling), fixed_pool, 1,
                                                 config.test_size, data.scaling.span_lo(), data.scaling.span_hi(),
                                                 eval_rng);
      row.runs[r] = {trained.report.best().validation_nrmse, test.cosine};
    });
    std::vector<double> n, c;
    for (const auto& run : row.runs) {
      n.push_back(run.validation_nrmse);
      c.push_back(run.test_cosine);
    }
    row.nrmse = sample_statistics(n);
    row.cosine = sample_statistics(c);
    result.rows.push_back(std::move(row));
  }
  return result;
}

// --- kick ablation -----------------------------------------------------------

double injectivity_margin(const Device& device, double v_lo, double v_hi, std::size_t n, double min_separation) {
  const auto grid = build_grid(v_lo, v_hi, n);
  const auto pairs = grid.pairs();
  std::vector<ProbabilityRecord> records;
  records.reserve(pairs.size());
  for (const auto& v : pairs) records.push_back(device.probabilities(v));
  double margin = INFINITY;
  const double sep2 = min_separation * min_separation;
  for (std::size_t a = 0; a < pairs.size(); ++a) {
    for (std::size_t b = a + 1; b < pairs.size(); ++b) {
      const double d1 = pairs[a].v1 - pairs[b].v1, d2 = pairs[a].v2 - pairs[b].v2;
      if (d1 * d1 + d2 * d2 < sep2) continue;
      double dist2 = 0.0;
      for (std::size_t k = 0; k < kProbabilityCount; ++k) {
        const double d = records[a].p[k] - records[b].p[k];
        dist2 += d * d;
      }
      margin = std::min(margin, dist2);
    }
  }
  return std::sqrt(margin);
}

AblationResult run_kick_ablation(const PipelineConfig& config, double v_lo, double v_hi) {
  const Device device(config.device);
  const KickConfig kick = config.kick();
  Rng data_rng = make_rng(config.data_seed);
  const auto dataset = generate_simulated(build_grid(v_lo, v_hi, config.grid_size), kick, device, data_rng,
                                          config.replicas);
  const auto data = prepare(dataset, config.validation_fraction, config.split_seed);

  const auto rmse_v = [](const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& truth) {
    return std::sqrt((predicted.topRows(2) - truth.topRows(2)).squaredNorm() / static_cast<double>(2 * truth.cols()));
  };
  const auto volts = [](const RegressionData& d) {
    Eigen::MatrixXd out = d.targets;
    for (Eigen::Index m = 0; m < out.rows(); ++m) {
      for (Eigen::Index k = 0; k < out.cols(); ++k) out(m, k) = d.scaling.denormalize(static_cast<std::size_t>(m), out(m, k));
    }
    return out;
  };

  AblationResult result;
  result.v_lo = v_lo;
  result.v_hi = v_hi;

  // Same split, same training seed: a paired comparison.
  const auto kicked_train = to_regression(data.train, FeatureSet::kicked);
  const auto kicked_validation = to_regression(data.validation, FeatureSet::kicked);
  const auto with = train(kicked_train, kicked_validation, config.layers, config.train);
  result.rmse_with = rmse_v(predict_volts(with.params, kicked_validation.inputs, kicked_validation.scaling),
                            volts(kicked_validation));
  result.nrmse_with = with.report.best().validation_nrmse;

  LayerSpec base_spec = config.layers;
  base_spec.sizes.front() = kProbabilityCount;
  base_spec.sizes.back() = 2;
  const auto base_train = to_regression(data.train, FeatureSet::base_only);
  const auto base_validation = to_regression(data.validation, FeatureSet::base_only);
  const auto without = train(base_train, base_validation, base_spec, config.train);
  result.rmse_without = rmse_v(predict_volts(without.params, base_validation.inputs, base_validation.scaling),
                               volts(base_validation));
  result.improvement = 1.0 - result.rmse_with / result.rmse_without;
  result.injectivity_margin = injectivity_margin(device, v_lo, v_hi, 60, 0.25 * (v_hi - v_lo) / 2.0);
  return result;
}

AblationStudy run_ablation_study(const PipelineConfig& config) {
  AblationStudy study;
  study.full_range = run_kick_ablation(config, config.device.v_min, config.device.v_max);
  if (config.ablation_subrange) {
    study.subrange = run_kick_ablation(config, config.ablation_subrange->first, config.ablation_subrange->second);
  }
  return study;
}

std::string AblationStudy::to_csv() const {
  std::string out = "range,v_lo,v_hi,rmse_with,rmse_without,improvement,nrmse_with,injectivity_margin\n";
  const auto row = [&out](const std::string& name, const AblationResult& r) {
    out += name + "," + format_real(r.v_lo) + "," + format_real(r.v_hi) + "," + format_real(r.rmse_with) + "," +
           format_real(r.rmse_without) + "," + format_real(r.improvement) + "," + format_real(r.nrmse_with) + "," +
           format_real(r.injectivity_margin) + "\n";
  };
  row("full", full_range);
  if (subrange) row("subrange", *subrange);
  return out;
}

std::string AblationStudy::report_text() const {
  std::ostringstream out;
  const auto block = [&out](const std::string& name, const AblationResult& r) {
    out << name << ".range = " << format_real(r.v_lo) << " " << format_real(r.v_hi) << "\n"
        << name << ".rmse_with = " << format_real(r.rmse_with) << "\n"
        << name << ".rmse_without = " << format_real(r.rmse_without) << "\n"
        << name << ".improvement = " << format_real(r.improvement) << "\n"
        << name << ".injectivity_margin = " << format_real(r.injectivity_margin) << "\n";
  };
  block("full", full_range);
  if (subrange) block("subrange", *subrange);
  return out.str();
}

// --- epoch curves, surfaces --------------------------------------------------

TrainResult run_epoch_curves(const Dataset& dataset, const PipelineConfig& config) {
  const auto data = prepare(dataset, config.validation_fraction, config.split_seed);
  return train(to_regression(data.train), to_regression(data.validation), config.layers, config.train);
}

std::vector<SurfacePoint> run_prediction_surface(const BatchPredictor& predictor, const TestPool& pool,
                                                 std::size_t n_new, double span_lo, double span_hi, Rng& rng) {
  const auto examples = pool.draw(n_new, rng);
  const Eigen::MatrixXd predicted = predictor(examples);
  if (predicted.rows() != static_cast<Eigen::Index>(kTargetCount) ||
      predicted.cols() != static_cast<Eigen::Index>(n_new)) {
    fail(ErrorCategory::shape_mismatch, "predictor must return 4 x n volts");
  }
  std::vector<SurfacePoint> points;
  points.reserve(n_new);
  for (std::size_t k = 0; k < n_new; ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    SurfacePoint p;
    p.true_v1 = examples[k].targets[0];
    p.true_v2 = examples[k].targets[1];
    p.predicted_v1 = predicted(0, c);
    p.predicted_v2 = predicted(1, c);
    p.residual = std::hypot(p.predicted_v1 - p.true_v1, p.predicted_v2 - p.true_v2);
    std::array<double, kTargetCount> guess{};
    for (std::size_t m = 0; m < kTargetCount; ++m) guess[m] = predicted(static_cast<Eigen::Index>(m), c);
    p.nrmse = nrmse(examples[k].targets, guess, span_lo, span_hi);
    points.push_back(p);
  }
  return points;
}

std::string surface_points_csv(const std::vector<SurfacePoint>& points) {
  std::string out = "true_v1,true_v2,predicted_v1,predicted_v2,residual,nrmse\n";
  for (const auto& p : points) {
    out += format_real(p.true_v1) + "," + format_real(p.true_v2) + "," + format_real(p.predicted_v1) + "," +
           format_real(p.predicted_v2) + "," + format_real(p.residual) + "," + format_real(p.nrmse) + "\n";
  }
  return out;
}

std::string render_probability_surfaces(const Device& device, std::size_t resolution) {
  const auto grid = build_grid(device.config().v_min, device.config().v_max, resolution);
  std::string out = "v1,v2,p11,p12,p13,p21,p22,p23\n";
  for (const auto& v : grid.pairs()) {
    const auto record = device.probabilities(v);
    out += format_real(v.v1) + "," + format_real(v.v2);
    for (const double p : record.p) out += "," + format_real(p);
    out += "\n";
  }
  return out;
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::mutex mutex;
  std::size_t next = 0;
  std::exception_ptr failure;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      while (true) {
        std::size_t index;
        {
          std::lock_guard lock(mutex);
          if (next >= count || failure) return;
          index = next++;
        }
        try {
          body(index);
        } catch (...) {
          std::lock_guard lock(mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& worker : workers) worker.join();
  if (failure) std::rethrow_exception(failure);
}

void write_results_directory(const std::filesystem::path& dir, const std::string& config_echo,
                             const std::string& results_csv, const std::string& report_text,
                             const std::vector<std::pair<std::string, std::string>>& extra) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCategory::io, "cannot create " + dir.string() + ": " + ec.message());
  const auto write = [&dir](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) fail(ErrorCategory::io, "cannot write " + (dir / name).string());
    out << text;
  };
  write("config.echo", config_echo);
  write("results.csv", results_csv);
  write("report.txt", report_text);
  for (const auto& [name, text] : extra) write(name, text);
}

}  // namespace tritcal
