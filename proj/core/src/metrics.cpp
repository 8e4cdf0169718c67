#include "tritcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "tritcal/error.hpp"

namespace tritcal {

double nrmse(std::span<const double> y, std::span<const double> yhat, double y_min, double y_max) {
  if (y.size() != yhat.size() || y.empty()) {
    fail(ErrorCategory::shape_mismatch, "nrmse needs two nonempty vectors of equal length");
  }
  if (!(y_max > y_min)) fail(ErrorCategory::undefined_metric, "nrmse needs y_max > y_min");
  double squared = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double d = y[k] - yhat[k];
    squared += d * d;
  }
  return std::sqrt(squared) / std::sqrt(static_cast<double>(y.size())) / (y_max - y_min);
}

double cosine_similarity(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size() || y.empty()) {
    fail(ErrorCategory::shape_mismatch, "cosine similarity needs two nonempty vectors of equal length");
  }
  double dot = 0.0, ny = 0.0, nh = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    dot += y[k] * yhat[k];
    ny += y[k] * y[k];
    nh += yhat[k] * yhat[k];
  }
  if (!(ny > 0.0) || !(nh > 0.0)) fail(ErrorCategory::undefined_metric, "cosine similarity of a zero vector");
  const double c = dot / std::sqrt(ny * nh);
  return std::clamp(c, -1.0, 1.0);
}

SampleStatistics sample_statistics(std::span<const double> values) {
  if (values.empty()) fail(ErrorCategory::degenerate_statistics, "no observations");
  SampleStatistics stats;
  stats.count = values.size();
  // accumulate relative to the first value so identical inputs give an exact mean and zero spread
  const double pivot = values.front();
  double shift = 0.0;
  for (const double v : values) shift += v - pivot;
  shift /= static_cast<double>(values.size());
  stats.mean = pivot + shift;
  if (values.size() == 1) {
    stats.degenerate = true;
    return stats;
  }
  double squared = 0.0;
  for (const double v : values) squared += (v - pivot - shift) * (v - pivot - shift);
  stats.sd = std::sqrt(squared / static_cast<double>(values.size() - 1));
  return stats;
}

std::string EvaluationReport::to_text() const {
  std::ostringstream out;
  out << "nrmse = " << format_real(nrmse) << "\n"
      << "nrmse_spread = " << format_real(nrmse_spread) << "\n"
      << "cosine = " << format_real(cosine) << "\n"
      << "cosine_spread = " << format_real(cosine_spread) << "\n"
      << "spread_kind = sample_sd\n"
      << "spread_degenerate = " << (degenerate_spread ? "true" : "false") << "\n"
      << "n_repetitions = " << n_repetitions << "\n"
      << "n_examples_per_rep = " << n_examples_per_rep << "\n"
      << "nrmse_span = " << format_real(span_lo) << " " << format_real(span_hi) << "\n";
  return out.str();
}

std::string EvaluationReport::to_csv() const {
  std::string out = "repetition,nrmse,cosine\n";
  for (std::size_t r = 0; r < repetition_cosine.size(); ++r) {
    out += std::to_string(r + 1) + "," + format_real(repetition_nrmse[r]) + "," +
           format_real(repetition_cosine[r]) + "\n";
  }
  return out;
}

TestPool TestPool::simulated(std::vector<VoltagePair> settings, Device device, KickConfig kick) {
  kick.validate();
  TestPool pool;
  pool.kind_ = Kind::simulated;
  pool.settings_ = std::move(settings);
  pool.device_ = std::move(device);
  pool.kick_ = kick;
  return pool;
}

TestPool TestPool::off_grid(double v_lo, double v_hi, Device device, KickConfig kick) {
  kick.validate();
  if (!(v_lo < v_hi)) fail(ErrorCategory::invalid_parameter, "off-grid pool needs v_lo < v_hi");
  TestPool pool;
  pool.kind_ = Kind::off_grid;
  pool.device_ = std::move(device);
  pool.kick_ = kick;
  pool.v_lo_ = v_lo;
  pool.v_hi_ = v_hi;
  return pool;
}

TestPool TestPool::fixed(std::vector<TrainingExample> examples) {
  TestPool pool;
  pool.kind_ = Kind::fixed;
  pool.examples_ = std::move(examples);
  return pool;
}

std::size_t TestPool::size() const {
  switch (kind_) {
    case Kind::simulated: return settings_.size();
    case Kind::off_grid: return std::numeric_limits<std::size_t>::max();
    case Kind::fixed: return examples_.size();
  }
  return 0;
}

std::vector<TrainingExample> TestPool::draw(std::size_t count, Rng& rng) const {
  if (count > size()) fail(ErrorCategory::degenerate_data, "test pool smaller than the repetition size");
  std::vector<TrainingExample> out;
  out.reserve(count);
  if (kind_ == Kind::off_grid) {
    std::uniform_real_distribution<double> uniform(v_lo_, v_hi_);
    for (std::size_t k = 0; k < count; ++k) {
      const VoltagePair base{uniform(rng), uniform(rng)};
      const auto p_base = device_->measure(base, rng);
      const auto p_kick = device_->measure({base.v1 + kick_.dv1, base.v2 + kick_.dv2}, rng);
      out.push_back(make_example(base, kick_, p_base, p_kick));
    }
    return out;
  }
  // Partial Fisher-Yates: `count` distinct indices.
  std::vector<std::size_t> index(size());
  std::iota(index.begin(), index.end(), 0);
  for (std::size_t k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, index.size() - 1);
    std::swap(index[k], index[pick(rng)]);
    if (kind_ == Kind::fixed) {
      out.push_back(examples_[index[k]]);
    } else {
      const VoltagePair base = settings_[index[k]];
      const auto p_base = device_->measure(base, rng);
      const auto p_kick = device_->measure({base.v1 + kick_.dv1, base.v2 + kick_.dv2}, rng);
      out.push_back(make_example(base, kick_, p_base, p_kick));
    }
  }
  return out;
}

EvaluationReport repeated_test_evaluation(const BatchPredictor& predictor, const TestPool& pool,
                                          std::size_t rep_count, std::size_t rep_size, double span_lo,
                                          double span_hi, Rng& rng) {
  if (rep_count == 0 || rep_size == 0) fail(ErrorCategory::invalid_parameter, "need >= 1 repetition of >= 1 example");
  if (pool.size() < rep_size) fail(ErrorCategory::degenerate_data, "test pool smaller than the repetition size");
  if (!(span_hi > span_lo)) fail(ErrorCategory::undefined_metric, "degenerate NRMSE span");

  EvaluationReport report;
  report.n_repetitions = rep_count;
  report.n_examples_per_rep = rep_size;
  report.span_lo = span_lo;
  report.span_hi = span_hi;
  std::vector<double> truth(kTargetCount * rep_size), guess(kTargetCount * rep_size);
  for (std::size_t r = 0; r < rep_count; ++r) {
    const auto examples = pool.draw(rep_size, rng);
    const Eigen::MatrixXd predicted = predictor(examples);
    if (predicted.rows() != static_cast<Eigen::Index>(kTargetCount) ||
        predicted.cols() != static_cast<Eigen::Index>(rep_size)) {
      fail(ErrorCategory::shape_mismatch, "predictor must return 4 x rep_size volts");
    }
    double nrmse_sum = 0.0;
    for (std::size_t k = 0; k < rep_size; ++k) {
      for (std::size_t m = 0; m < kTargetCount; ++m) {
        truth[k * kTargetCount + m] = examples[k].targets[m];
        guess[k * kTargetCount + m] = predicted(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
      }
      nrmse_sum += nrmse(std::span(truth).subspan(k * kTargetCount, kTargetCount),
                         std::span(guess).subspan(k * kTargetCount, kTargetCount), span_lo, span_hi);
    }
    report.repetition_nrmse.push_back(nrmse_sum / static_cast<double>(rep_size));
    report.repetition_cosine.push_back(cosine_similarity(truth, guess));
  }
  const auto n_stats = sample_statistics(report.repetition_nrmse);
  const auto c_stats = sample_statistics(report.repetition_cosine);
  report.nrmse = n_stats.mean;
  report.nrmse_spread = n_stats.sd;
  report.cosine = c_stats.mean;
  report.cosine_spread = c_stats.sd;
  report.degenerate_spread = c_stats.degenerate;
  return report;
}

std::string TrainingsSummary::to_text() const {
  std::ostringstream out;
  out << "runs = " << runs << "\n"
      << "validation_nrmse_mean = " << format_real(nrmse.mean) << "\n"
      << "validation_nrmse_sd = " << format_real(nrmse.sd) << "\n"
      << "test_cosine_mean = " << format_real(cosine.mean) << "\n"
      << "test_cosine_sd = " << format_real(cosine.sd) << "\n"
      << "spread_kind = sample_sd\n";
  return out.str();
}

TrainingsSummary aggregate_trainings(std::span<const RunOutcome> runs) {
  if (runs.size() < 2) fail(ErrorCategory::degenerate_statistics, "need at least two training runs");
  std::vector<double> n, c;
  for (const auto& run : runs) {
    n.push_back(run.validation_nrmse);
    c.push_back(run.test_cosine);
  }
  return {sample_statistics(n), sample_statistics(c), runs.size()};
}

}  // namespace tritcal
