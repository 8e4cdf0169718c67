#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tritcal/checkpoint.hpp"
#include "tritcal/config.hpp"
#include "tritcal/dataset.hpp"
#include "tritcal/device_model.hpp"
#include "tritcal/experiments.hpp"
#include "tritcal/metrics.hpp"
#include "tritcal/mlp.hpp"

namespace tritcal::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::io: return kIo;
    case ErrorCategory::parse: return kSchema;
    case ErrorCategory::invalid_parameter: return kInvalidParameter;
    case ErrorCategory::degenerate_data:
    case ErrorCategory::degenerate_statistics:
    case ErrorCategory::undefined_metric: return kDegenerate;
    case ErrorCategory::ingestion: return kIngestion;
    case ErrorCategory::checksum:
    case ErrorCategory::version_mismatch: return kCorruptCheckpoint;
    case ErrorCategory::training_diverged: return kDiverged;
    case ErrorCategory::shape_mismatch: return kShapeMismatch;
  }
  return kInternal;
}

namespace {

constexpr const char* kConfigDirEnv = "TRITCAL_CONFIG_DIR";
constexpr const char* kDefaultConfigName = "tritcal.cfg";

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("-c,--config", common.config_path,
                  std::string("Pipeline config (key = value); default $") + kConfigDirEnv + "/" + kDefaultConfigName);
  sub->add_option("--set", common.overrides, "Override one config key as key=value (repeatable)");
}

// Config file, then --set overrides, then dedicated flags: later wins.
KeyValueConfig base_config(const Common& common) {
  KeyValueConfig kv;
  if (!common.config_path.empty()) {
    kv = KeyValueConfig::load(common.config_path);
  } else if (const char* dir = std::getenv(kConfigDirEnv); dir && *dir) {
    const fs::path candidate = fs::path(dir) / kDefaultConfigName;
    if (fs::exists(candidate)) kv = KeyValueConfig::load(candidate);
  }
  for (const auto& entry : common.overrides) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) fail(ErrorCategory::parse, "--set expects key=value, got `" + entry + "`");
    kv.set(std::string(trim(entry.substr(0, eq))), std::string(trim(entry.substr(eq + 1))));
  }
  return kv;
}

template <typename T>
void put(KeyValueConfig& kv, const std::string& key, const std::optional<T>& value) {
  if (!value) return;
  if constexpr (std::is_floating_point_v<T>) {
    kv.set(key, format_real(*value));
  } else {
    kv.set(key, std::to_string(*value));
  }
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_file(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Dataset CSV as-is, or a measurement CSV paired at `kick_steps` grid steps.
Dataset load_training_file(const fs::path& path, std::optional<double> kick_steps, std::ostream& err) {
  const auto text = read_file(path);
  if (text.find(kMeasurementHeader) == std::string::npos) return parse_csv(text, path.string());
  if (!kick_steps) fail(ErrorCategory::invalid_parameter, "measurement files need --kick-steps");
  const auto kick = measurement_kick(text, *kick_steps, path.string());
  auto result = ingest_experimental_text(text, kick, path.string());
  err << "ingested " << result.dataset.size() << " examples, dropped " << result.dropped
      << " grid points without a kicked partner\n";
  return std::move(result.dataset);
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  for (const auto field : split_fields(text, ',')) {
    const auto v = parse_real(field);
    if (!v) fail(ErrorCategory::parse, flag + ": malformed number `" + std::string(field) + "`");
    out.push_back(*v);
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"tritcal: neural-network calibration of a two-phase three-mode interferometer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tritcal 0.1.0");

  // simulate
  Common sim_common;
  double sim_v1 = 0.0, sim_v2 = 0.0;
  std::optional<double> sim_counts;
  std::uint64_t sim_seed = 1;
  auto* simulate = app.add_subcommand("simulate", "Evaluate the device model at one voltage setting");
  add_common(simulate, sim_common);
  simulate->add_option("--v1", sim_v1, "Voltage on resistor 1 (V)")->required();
  simulate->add_option("--v2", sim_v2, "Voltage on resistor 2 (V)")->required();
  simulate->add_option("--counts", sim_counts, "Also draw Poisson counts with this mean total per input");
  simulate->add_option("--seed", sim_seed, "Seed for the count draw");

  // gen-dataset
  Common gen_common;
  std::optional<std::int64_t> gen_grid, gen_replicas;
  std::optional<double> gen_kick, gen_counts;
  std::optional<std::uint64_t> gen_seed;
  std::string gen_output;
  auto* gen = app.add_subcommand("gen-dataset", "Simulate a kick-augmented dataset on a voltage grid");
  add_common(gen, gen_common);
  gen->add_option("--grid", gen_grid, "Grid points per voltage axis (default 53)");
  gen->add_option("--kick-steps", gen_kick, "Kick offset in steps of the kick_grid-point grid (default 8 of 53)");
  gen->add_option("--counts", gen_counts, "Mean photon counts per input and setting (default 1000)");
  gen->add_option("--seed", gen_seed, "Noise seed (data_seed)");
  gen->add_option("--replicas", gen_replicas, "Noisy replicas per grid point (default 1)");
  gen->add_option("-o,--output", gen_output, "Dataset CSV to write")->required();

  // train
  Common train_common;
  std::string train_input, train_output, train_report, train_curve;
  std::optional<std::int64_t> train_epochs, train_patience, train_batch;
  std::optional<double> train_lr, train_fraction, train_kick;
  std::optional<std::uint64_t> train_seed, train_split_seed;
  bool train_no_early_stop = false;
  auto* train_cmd = app.add_subcommand("train", "Train the calibration network on a dataset");
  add_common(train_cmd, train_common);
  train_cmd->add_option("-i,--input", train_input, "Dataset CSV or measurement CSV")->required();
  train_cmd->add_option("-o,--output", train_output, "Checkpoint to write")->required();
  train_cmd->add_option("--epochs", train_epochs, "Maximum epochs (default 250)");
  train_cmd->add_option("--patience", train_patience, "Early-stopping patience in epochs (default 25)");
  train_cmd->add_option("--batch", train_batch, "Mini-batch size (default 32)");
  train_cmd->add_option("--lr", train_lr, "Adam learning rate (default 1e-3)");
  train_cmd->add_option("--seed", train_seed, "Initialization and shuffling seed (train_seed)");
  train_cmd->add_option("--split-seed", train_split_seed, "Train/validation split seed");
  train_cmd->add_option("--val-fraction", train_fraction, "Validation fraction (default 0.15)");
  train_cmd->add_option("--kick-steps", train_kick, "Kick in grid steps, for measurement CSV input");
  train_cmd->add_flag("--no-early-stop", train_no_early_stop, "Always run --epochs epochs");
  train_cmd->add_option("--report", train_report, "Report file (default <output>.report.txt)");
  train_cmd->add_option("--curve", train_curve, "Per-epoch CSV (default <output>.epochs.csv)");

  // predict
  std::string predict_model, predict_probs;
  auto* predict_cmd = app.add_subcommand("predict", "Map 12 measured probabilities to voltages");
  predict_cmd->add_option("-m,--model", predict_model, "Checkpoint")->required();
  predict_cmd->add_option("--probs", predict_probs, "12 comma-separated probabilities, base then kicked")->required();

  // evaluate
  Common eval_common;
  std::string eval_model, eval_pool, eval_output;
  std::optional<std::int64_t> eval_reps, eval_size;
  std::optional<std::uint64_t> eval_seed;
  bool eval_off_grid = false;
  auto* evaluate = app.add_subcommand("evaluate", "Repeated cosine-similarity test protocol on fresh noisy data");
  add_common(evaluate, eval_common);
  evaluate->add_option("-m,--model", eval_model, "Checkpoint")->required();
  evaluate->add_option("--reps", eval_reps, "Repetitions (default 500)");
  evaluate->add_option("--rep-size", eval_size, "Examples per repetition (default 100)");
  evaluate->add_option("--seed", eval_seed, "Test sampling and noise seed (test_seed)");
  evaluate->add_option("--pool", eval_pool, "Fixed test pool CSV instead of freshly simulated grid points");
  evaluate->add_flag("--off-grid", eval_off_grid, "Sample test voltages uniformly instead of on the grid");
  evaluate->add_option("-o,--output", eval_output, "Results directory (report also printed)");

  // harnesses
  Common sweep_common;
  std::string sweep_output, sweep_sizes;
  std::optional<std::int64_t> sweep_trainings, sweep_jobs, sweep_epochs;
  auto* sweep = app.add_subcommand("sweep-grid", "NRMSE and cosine versus training grid size");
  add_common(sweep, sweep_common);
  sweep->add_option("-o,--output", sweep_output, "Results directory")->required();
  sweep->add_option("--sizes", sweep_sizes, "Comma-separated grid sizes (default 10,15,20,30,40,53)");
  sweep->add_option("--trainings", sweep_trainings, "Independent trainings per size (default 50)");
  sweep->add_option("--jobs", sweep_jobs, "Concurrent trainings (default 1)");
  sweep->add_option("--epochs", sweep_epochs, "Maximum epochs per training");

  Common ablate_common;
  std::string ablate_output, ablate_subrange;
  std::optional<std::int64_t> ablate_epochs;
  auto* ablate = app.add_subcommand("ablate-kicks", "Paired kicked / base-only network comparison");
  add_common(ablate, ablate_common);
  ablate->add_option("-o,--output", ablate_output, "Results directory")->required();
  ablate->add_option("--subrange", ablate_subrange, "Injective voltage window lo,hi, or `none`");
  ablate->add_option("--epochs", ablate_epochs, "Maximum epochs per training");

  Common curves_common;
  std::string curves_output, curves_input;
  std::optional<double> curves_kick;
  std::optional<std::int64_t> curves_epochs;
  auto* curves = app.add_subcommand("epoch-curves", "Per-epoch validation NRMSE and cosine");
  add_common(curves, curves_common);
  curves->add_option("-o,--output", curves_output, "Results directory")->required();
  curves->add_option("-i,--input", curves_input, "Dataset or measurement CSV (default: simulate)");
  curves->add_option("--kick-steps", curves_kick, "Kick in grid steps, for measurement CSV input");
  curves->add_option("--epochs", curves_epochs, "Maximum epochs");

  Common surface_common;
  std::string surface_output, surface_model;
  std::optional<std::int64_t> surface_resolution, surface_new;
  std::optional<std::uint64_t> surface_seed;
  auto* surface = app.add_subcommand(
      "surface", "Noise-free probability surfaces, plus predicted-versus-true voltages with --model");
  add_common(surface, surface_common);
  surface->add_option("-o,--output", surface_output, "Results directory")->required();
  surface->add_option("--resolution", surface_resolution, "Points per axis (default 101)");
  surface->add_option("-m,--model", surface_model, "Checkpoint for the prediction scatter");
  surface->add_option("--n-new", surface_new, "Freshly measured examples to predict (default 100)");
  surface->add_option("--seed", surface_seed, "Noise seed for the new examples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*simulate) {
      const auto kv = base_config(sim_common);
      const Device device(PipelineConfig::from_config(kv).device);
      const VoltagePair v{sim_v1, sim_v2};
      const auto phases = device.phases(v);
      const auto record = device.probabilities(v);
      out << "v1 = " << format_real(v.v1) << "\nv2 = " << format_real(v.v2) << "\n"
          << "dphi1 = " << format_real(phases.dphi1) << "\ndphi2 = " << format_real(phases.dphi2) << "\n";
      static constexpr const char* names[] = {"p11", "p12", "p13", "p21", "p22", "p23"};
      for (std::size_t k = 0; k < kProbabilityCount; ++k) out << names[k] << " = " << format_real(record.p[k]) << "\n";
      if (sim_counts) {
        Rng rng = make_rng(sim_seed);
        const auto counts = sample_counts(record, *sim_counts, rng);
        const auto estimate = estimate_probabilities(counts);
        out << "counts =";
        for (const auto c : counts.counts) out << " " << c;
        out << "\nestimated =";
        for (const auto p : estimate.p) out << " " << format_real(p);
        out << "\n";
      }
      return kOk;
    }

    if (*gen) {
      auto kv = base_config(gen_common);
      put(kv, "grid_size", gen_grid);
      put(kv, "kick_steps", gen_kick);
      put(kv, "mean_total", gen_counts);
      put(kv, "data_seed", gen_seed);
      put(kv, "replicas", gen_replicas);
      const auto config = PipelineConfig::from_config(kv);
      const Device device(config.device);
      Rng rng = make_rng(config.data_seed);
      const auto dataset = generate_simulated(config.grid(), config.kick(), device, rng, config.replicas);
      ensure_parent(gen_output);
      write_csv(dataset, gen_output);
      out << "examples = " << dataset.size() << "\n";
      return kOk;
    }

    if (*train_cmd) {
      auto kv = base_config(train_common);
      put(kv, "max_epochs", train_epochs);
      put(kv, "patience", train_patience);
      put(kv, "batch_size", train_batch);
      put(kv, "learning_rate", train_lr);
      put(kv, "train_seed", train_seed);
      put(kv, "split_seed", train_split_seed);
      put(kv, "validation_fraction", train_fraction);
      if (train_no_early_stop) kv.set("early_stopping", "false");
      const auto config = PipelineConfig::from_config(kv);
      const auto dataset = load_training_file(train_input, train_kick, err);
      const auto started = std::chrono::steady_clock::now();
      const auto data = prepare(dataset, config.validation_fraction, config.split_seed);
      const auto result = tritcal::train(to_regression(data.train), to_regression(data.validation), config.layers,
                                         config.train);
      ensure_parent(train_output);
      save_checkpoint({result.params, result.adam, data.scaling, dataset.kick, dataset.provenance,
                       content_hash(dataset)},
                      train_output);
      const std::string report = "examples = " + std::to_string(dataset.size()) + "\n" +
                                 "train_examples = " + std::to_string(data.train.size()) + "\n" +
                                 "validation_examples = " + std::to_string(data.validation.size()) + "\n" +
                                 result.report.to_text();
      write_file(train_report.empty() ? train_output + ".report.txt" : train_report, report);
      write_file(train_curve.empty() ? train_output + ".epochs.csv" : train_curve, result.report.to_csv());
      out << report;
      err << "training took " << seconds_since(started) << " s\n";
      return kOk;
    }

    if (*predict_cmd) {
      const auto checkpoint = load_checkpoint(predict_model);
      const auto probs = parse_list(predict_probs, "--probs");
      if (probs.size() != kFeatureCount) {
        fail(ErrorCategory::shape_mismatch, "--probs needs 12 values, got " + std::to_string(probs.size()));
      }
      for (const double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCategory::invalid_parameter, "probabilities must lie in [0, 1]");
      }
      const auto p = predict(checkpoint.params, probs, checkpoint.scaling, checkpoint.kick);
      out << "v1 = " << format_real(p.v1) << "\nv2 = " << format_real(p.v2) << "\n"
          << "consistency_residual = " << format_real(p.consistency_residual) << "\n";
      return kOk;
    }

    if (*evaluate) {
      auto kv = base_config(eval_common);
      put(kv, "test_repetitions", eval_reps);
      put(kv, "test_size", eval_size);
      put(kv, "test_seed", eval_seed);
      if (eval_off_grid) kv.set("test_sampling", "off_grid");
      const auto config = PipelineConfig::from_config(kv);
      const auto checkpoint = load_checkpoint(eval_model);
      const Device device(config.device);
      std::optional<TestPool> pool;
      if (!eval_pool.empty()) {
        pool = TestPool::fixed(read_csv(eval_pool).examples);
      } else if (config.off_grid_test) {
        pool = TestPool::off_grid(config.device.v_min, config.device.v_max, device, checkpoint.kick);
      } else {
        pool = TestPool::simulated(config.grid().pairs(), device, checkpoint.kick);
      }
      Rng rng = make_rng(config.test_seed);
      const auto report = repeated_test_evaluation(network_predictor(checkpoint.params, checkpoint.scaling), *pool,
                                                   config.test_repetitions, config.test_size,
                                                   checkpoint.scaling.span_lo(), checkpoint.scaling.span_hi(), rng);
      if (!eval_output.empty()) write_results_directory(eval_output, config.echo(), report.to_csv(), report.to_text());
      out << report.to_text();
      return kOk;
    }

    if (*sweep) {
      auto kv = base_config(sweep_common);
      if (!sweep_sizes.empty()) {
        std::string sizes;
        for (const double s : parse_list(sweep_sizes, "--sizes")) sizes += std::to_string(std::llround(s)) + " ";
        kv.set("sweep_grid_sizes", sizes);
      }
      put(kv, "trainings_per_size", sweep_trainings);
      put(kv, "jobs", sweep_jobs);
      put(kv, "max_epochs", sweep_epochs);
      if (sweep_epochs && !kv.contains("patience")) kv.set("patience", std::to_string(std::min<std::int64_t>(25, *sweep_epochs)));
      const auto config = PipelineConfig::from_config(kv);
      const auto started = std::chrono::steady_clock::now();
      const auto result = run_grid_sweep(config);
      write_results_directory(sweep_output, config.echo(), result.to_csv(), result.report_text(),
                              {{"runs.csv", result.runs_csv()}});
      out << result.report_text();
      err << "sweep took " << seconds_since(started) << " s\n";
      return kOk;
    }

    if (*ablate) {
      auto kv = base_config(ablate_common);
      if (!ablate_subrange.empty()) kv.set("ablation_subrange", ablate_subrange);
      put(kv, "max_epochs", ablate_epochs);
      if (ablate_epochs && !kv.contains("patience")) kv.set("patience", std::to_string(std::min<std::int64_t>(25, *ablate_epochs)));
      const auto config = PipelineConfig::from_config(kv);
      const auto study = run_ablation_study(config);
      write_results_directory(ablate_output, config.echo(), study.to_csv(), study.report_text());
      out << study.report_text();
      return kOk;
    }

    if (*curves) {
      auto kv = base_config(curves_common);
      put(kv, "max_epochs", curves_epochs);
      if (curves_epochs && !kv.contains("patience")) kv.set("patience", std::to_string(std::min<std::int64_t>(25, *curves_epochs)));
      const auto config = PipelineConfig::from_config(kv);
      Dataset dataset;
      if (!curves_input.empty()) {
        dataset = load_training_file(curves_input, curves_kick, err);
      } else {
        Rng rng = make_rng(config.data_seed);
        dataset = generate_simulated(config.grid(), config.kick(), Device(config.device), rng, config.replicas);
      }
      const auto result = run_epoch_curves(dataset, config);
      std::string report = "provenance = " + std::string(to_string(dataset.provenance)) + "\n" +
                           "examples = " + std::to_string(dataset.size()) + "\n" + result.report.to_text();
      write_results_directory(curves_output, config.echo(), result.report.to_csv(), report);
      out << report;
      return kOk;
    }

    if (*surface) {
      auto kv = base_config(surface_common);
      const auto config = PipelineConfig::from_config(kv);
      const Device device(config.device);
      const auto resolution = static_cast<std::size_t>(surface_resolution.value_or(101));
      const auto probabilities = render_probability_surfaces(device, resolution);
      std::vector<std::pair<std::string, std::string>> extra;
      std::string report = "resolution = " + std::to_string(resolution) + "\n";
      if (!surface_model.empty()) {
        const auto checkpoint = load_checkpoint(surface_model);
        Rng rng = make_rng(surface_seed.value_or(config.test_seed));
        const auto n_new = static_cast<std::size_t>(surface_new.value_or(100));
        const auto points = run_prediction_surface(network_predictor(checkpoint.params, checkpoint.scaling),
                                                   TestPool::simulated(config.grid().pairs(), device, checkpoint.kick),
                                                   n_new, checkpoint.scaling.span_lo(), checkpoint.scaling.span_hi(),
                                                   rng);
        extra.emplace_back("predictions.csv", surface_points_csv(points));
        double sum = 0.0;
        for (const auto& p : points) sum += p.nrmse;
        report += "predicted_examples = " + std::to_string(points.size()) + "\n" +
                  "mean_nrmse = " + format_real(sum / static_cast<double>(points.size())) + "\n";
      }
      write_results_directory(surface_output, config.echo(), probabilities, report, extra);
      out << report;
      return kOk;
    }
  } catch (const Error& e) {
    err << "error[" << to_string(e.category()) << "]: " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

}  // namespace tritcal::cli
