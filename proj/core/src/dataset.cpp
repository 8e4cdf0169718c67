#include "tritcal/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "tritcal/error.hpp"

namespace tritcal {

VoltagePair VoltageGrid::at(std::size_t index) const {
  const auto n2 = v2_values.size();
  return {v1_values[index / n2], v2_values[index % n2]};
}

std::vector<VoltagePair> VoltageGrid::pairs() const {
  std::vector<VoltagePair> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i));
  return out;
}

double VoltageGrid::step() const {
  if (v1_values.size() < 2) return 0.0;
  return (v1_values.back() - v1_values.front()) / static_cast<double>(v1_values.size() - 1);
}

VoltageGrid build_grid(double v_min, double v_max, std::size_t n) {
  if (n < 2 || !std::isfinite(v_min) || !std::isfinite(v_max) || !(v_min < v_max)) {
    fail(ErrorCategory::invalid_parameter, "grid needs n >= 2 and v_min < v_max");
  }
  std::vector<double> values(n);
  const double step = (v_max - v_min) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) values[i] = v_min + static_cast<double>(i) * step;
  values.back() = v_max;
  return {values, values};
}

KickConfig KickConfig::from_steps(double v_min, double v_max, std::size_t n, double steps) {
  if (n < 2 || !(v_min < v_max)) fail(ErrorCategory::invalid_parameter, "degenerate kick reference grid");
  const double dv = steps * (v_max - v_min) / static_cast<double>(n - 1);
  KickConfig kick{dv, dv};
  kick.validate();
  return kick;
}

void KickConfig::validate() const {
  if (!(dv1 > 0.0) || !(dv2 > 0.0) || !std::isfinite(dv1) || !std::isfinite(dv2)) {
    fail(ErrorCategory::invalid_parameter, "kick offsets must be positive and finite");
  }
}

TrainingExample make_example(VoltagePair base, const KickConfig& kick, const ProbabilityRecord& at_base,
                             const ProbabilityRecord& at_kicked) {
  TrainingExample example;
  std::copy(at_base.p.begin(), at_base.p.end(), example.features.begin());
  std::copy(at_kicked.p.begin(), at_kicked.p.end(), example.features.begin() + kProbabilityCount);
  example.targets = {base.v1, base.v2, base.v1 + kick.dv1, base.v2 + kick.dv2};
  return example;
}

std::string_view to_string(Provenance provenance) {
  return provenance == Provenance::simulated ? "simulated" : "experimental";
}

Provenance parse_provenance(std::string_view text) {
  if (text == "simulated") return Provenance::simulated;
  if (text == "experimental") return Provenance::experimental;
  fail(ErrorCategory::parse, "unknown provenance `" + std::string(text) + "`");
}

double TargetScaling::span_lo() const { return *std::min_element(lo.begin(), lo.end()); }
double TargetScaling::span_hi() const { return *std::max_element(hi.begin(), hi.end()); }

TargetScaling TargetScaling::leading(std::size_t dims) const {
  if (dims > width()) fail(ErrorCategory::shape_mismatch, "scaling has fewer dimensions than requested");
  return {std::vector<double>(lo.begin(), lo.begin() + static_cast<std::ptrdiff_t>(dims)),
          std::vector<double>(hi.begin(), hi.begin() + static_cast<std::ptrdiff_t>(dims))};
}

Dataset generate_simulated(const VoltageGrid& grid, const KickConfig& kick, const Device& device, Rng& rng,
                           std::size_t replicas) {
  kick.validate();
  if (replicas == 0) fail(ErrorCategory::invalid_parameter, "replicas must be >= 1");
  if (grid.size() == 0) fail(ErrorCategory::invalid_parameter, "empty voltage grid");
  const auto& cfg = device.config();
  for (const auto* axis : {&grid.v1_values, &grid.v2_values}) {
    if (axis->front() < cfg.v_min || axis->back() > cfg.v_max ||
        !std::is_sorted(axis->begin(), axis->end(), std::less_equal<>())) {
      fail(ErrorCategory::invalid_parameter, "grid must be strictly increasing within the device range");
    }
  }
  // Fail before drawing anything if the largest kicked setting is not simulable.
  device.check_simulable({grid.v1_values.back() + kick.dv1, grid.v2_values.back() + kick.dv2});

  Dataset dataset;
  dataset.provenance = Provenance::simulated;
  dataset.kick = kick;
  dataset.examples.reserve(grid.size() * replicas);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const VoltagePair base = grid.at(i);
    const VoltagePair kicked{base.v1 + kick.dv1, base.v2 + kick.dv2};
    const ProbabilityRecord p_base = device.probabilities(base);
    const ProbabilityRecord p_kicked = device.probabilities(kicked);
    const double mean_total = cfg.mean_total;
    for (std::size_t r = 0; r < replicas; ++r) {
      const auto measured_base = estimate_probabilities(sample_counts(p_base, mean_total, rng));
      const auto measured_kicked = estimate_probabilities(sample_counts(p_kicked, mean_total, rng));
      dataset.examples.push_back(make_example(base, kick, measured_base, measured_kicked));
    }
  }
  return dataset;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double validation_fraction, Rng& rng) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    fail(ErrorCategory::invalid_parameter, "validation fraction must lie in (0, 1)");
  }
  const std::size_t n = dataset.size();
  if (n < 2) fail(ErrorCategory::degenerate_data, "need at least two examples to split");
  auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  Dataset train{{}, dataset.provenance, dataset.kick, dataset.scaling};
  Dataset validation{{}, dataset.provenance, dataset.kick, dataset.scaling};
  validation.examples.reserve(n_val);
  train.examples.reserve(n - n_val);
  for (std::size_t k = 0; k < n; ++k) {
    (k < n_val ? validation : train).examples.push_back(dataset.examples[order[k]]);
  }
  return {std::move(train), std::move(validation)};
}

std::pair<Dataset, TargetScaling> normalize_targets(const Dataset& train) {
  if (train.empty()) fail(ErrorCategory::degenerate_data, "cannot normalize an empty dataset");
  if (train.scaling) fail(ErrorCategory::invalid_parameter, "dataset is already normalized");
  TargetScaling scaling{std::vector<double>(kTargetCount, INFINITY), std::vector<double>(kTargetCount, -INFINITY)};
  for (const auto& example : train.examples) {
    for (std::size_t m = 0; m < kTargetCount; ++m) {
      scaling.lo[m] = std::min(scaling.lo[m], example.targets[m]);
      scaling.hi[m] = std::max(scaling.hi[m], example.targets[m]);
    }
  }
  for (std::size_t m = 0; m < kTargetCount; ++m) {
    if (!(scaling.hi[m] > scaling.lo[m])) {
      fail(ErrorCategory::degenerate_data, "target dimension " + std::to_string(m) + " is constant");
    }
  }
  return {apply_scaling(train, scaling), scaling};
}

Dataset apply_scaling(const Dataset& dataset, const TargetScaling& scaling) {
  if (dataset.scaling) fail(ErrorCategory::invalid_parameter, "dataset is already normalized");
  if (scaling.width() != kTargetCount) fail(ErrorCategory::shape_mismatch, "scaling must cover 4 targets");
  Dataset out = dataset;
  out.scaling = scaling;
  for (auto& example : out.examples) {
    for (std::size_t m = 0; m < kTargetCount; ++m) example.targets[m] = scaling.normalize(m, example.targets[m]);
  }
  return out;
}

Dataset denormalize(const Dataset& dataset) {
  if (!dataset.scaling) return dataset;
  Dataset out = dataset;
  out.scaling.reset();
  for (auto& example : out.examples) {
    for (std::size_t m = 0; m < kTargetCount; ++m) {
      example.targets[m] = dataset.scaling->denormalize(m, example.targets[m]);
    }
  }
  return out;
}

RegressionData to_regression(const Dataset& normalized, FeatureSet features) {
  if (!normalized.scaling) fail(ErrorCategory::invalid_parameter, "training data must be normalized");
  if (normalized.empty()) fail(ErrorCategory::degenerate_data, "empty dataset");
  const bool kicked = features == FeatureSet::kicked;
  const Eigen::Index n_in = kicked ? kFeatureCount : kProbabilityCount;
  const Eigen::Index n_out = kicked ? kTargetCount : 2;
  const auto n = static_cast<Eigen::Index>(normalized.size());
  RegressionData data{Eigen::MatrixXd(n_in, n), Eigen::MatrixXd(n_out, n),
                      normalized.scaling->leading(static_cast<std::size_t>(n_out))};
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& example = normalized.examples[static_cast<std::size_t>(k)];
    for (Eigen::Index f = 0; f < n_in; ++f) data.inputs(f, k) = example.features[static_cast<std::size_t>(f)];
    for (Eigen::Index m = 0; m < n_out; ++m) data.targets(m, k) = example.targets[static_cast<std::size_t>(m)];
  }
  return data;
}

// --- CSV -------------------------------------------------------------------

namespace {

constexpr double kRowSumTolerance = 1e-6;

std::string location(const std::string& source, int line) { return source + ":" + std::to_string(line); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCategory::io, "write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct Line {
  int number;
  std::string_view text;
};

// Splits into lines and collects `# key = value` metadata comments.
std::vector<Line> data_lines(std::string_view text, std::map<std::string, std::string>& meta) {
  std::vector<Line> lines;
  int number = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    ++number;
    start = end + 1;
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string_view::npos) {
        meta[std::string(trim(body.substr(0, eq)))] = std::string(trim(body.substr(eq + 1)));
      }
      continue;
    }
    lines.push_back({number, line});
  }
  return lines;
}

std::vector<double> parse_row(const Line& line, std::size_t columns, const std::string& source) {
  const auto fields = split_fields(line.text, ',');
  if (fields.size() != columns) {
    fail(ErrorCategory::parse, location(source, line.number) + ": expected " + std::to_string(columns) +
                                   " columns, got " + std::to_string(fields.size()));
  }
  std::vector<double> values;
  values.reserve(columns);
  for (std::size_t c = 0; c < columns; ++c) {
    const auto value = parse_real(fields[c]);
    if (!value || !std::isfinite(*value)) {
      fail(ErrorCategory::parse, location(source, line.number) + ": malformed number in column " +
                                     std::to_string(c + 1) + " `" + std::string(fields[c]) + "`");
    }
    values.push_back(*value);
  }
  return values;
}

void check_probability(double p, const Line& line, const std::string& source) {
  if (!(p >= 0.0 && p <= 1.0)) {
    fail(ErrorCategory::parse, location(source, line.number) + ": probability outside [0, 1]");
  }
}

// Each input's three output probabilities must close to 1.
void check_row_sums(std::span<const double> probabilities, const Line& line, const std::string& source) {
  for (std::size_t start = 0; start + 3 <= probabilities.size(); start += 3) {
    const double sum = probabilities[start] + probabilities[start + 1] + probabilities[start + 2];
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      fail(ErrorCategory::parse, location(source, line.number) + ": probability row sums to " + format_real(sum));
    }
  }
}

void check_voltage(double v, const Line& line, const std::string& source) {
  if (v < 0.0) fail(ErrorCategory::parse, location(source, line.number) + ": negative voltage");
}

}  // namespace

std::string to_csv(const Dataset& dataset) {
  if (dataset.scaling) fail(ErrorCategory::invalid_parameter, "denormalize before writing a dataset");
  std::string out;
  out.reserve(dataset.size() * 16 * 22 + 256);
  out += "# provenance = ";
  out += to_string(dataset.provenance);
  out += "\n# kick = " + format_real(dataset.kick.dv1) + " " + format_real(dataset.kick.dv2) + "\n";
  out += "# rows = " + std::to_string(dataset.size()) + "\n";
  out += kDatasetHeader;
  out += '\n';
  for (const auto& example : dataset.examples) {
    for (std::size_t m = 0; m < kTargetCount; ++m) {
      out += format_real(example.targets[m]);
      out += ',';
    }
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      out += format_real(example.features[f]);
      out += f + 1 == kFeatureCount ? '\n' : ',';
    }
  }
  return out;
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path) { write_text(path, to_csv(dataset)); }

Dataset read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path), path.string()); }

Dataset parse_csv(std::string_view text, const std::string& source) {
  std::map<std::string, std::string> meta;
  const auto lines = data_lines(text, meta);
  if (lines.empty()) fail(ErrorCategory::parse, source + ": missing header");
  if (lines.front().text != kDatasetHeader) {
    fail(ErrorCategory::parse, location(source, lines.front().number) + ": header mismatch, expected `" +
                                   std::string(kDatasetHeader) + "`");
  }
  if (lines.size() < 2) fail(ErrorCategory::parse, source + ": no examples");
  if (auto it = meta.find("rows"); it != meta.end()) {
    const auto declared_rows = parse_integer(it->second);
    if (!declared_rows || *declared_rows != static_cast<std::int64_t>(lines.size() - 1) || text.back() != '\n') {
      fail(ErrorCategory::parse, source + ": declared " + it->second + " rows, found " +
                                     std::to_string(lines.size() - 1) + " (truncated file?)");
    }
  }

  Dataset dataset;
  if (auto it = meta.find("provenance"); it != meta.end()) dataset.provenance = parse_provenance(it->second);
  std::optional<KickConfig> declared;
  if (auto it = meta.find("kick"); it != meta.end()) {
    const auto fields = split_fields(it->second, ' ');
    const auto a = fields.size() == 2 ? parse_real(fields[0]) : std::nullopt;
    const auto b = fields.size() == 2 ? parse_real(fields[1]) : std::nullopt;
    if (!a || !b) fail(ErrorCategory::parse, source + ": malformed `# kick` metadata");
    declared = KickConfig{*a, *b};
  }

  dataset.examples.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto row = parse_row(lines[i], 4 + kFeatureCount, source);
    TrainingExample example;
    for (std::size_t m = 0; m < kTargetCount; ++m) {
      check_voltage(row[m], lines[i], source);
      example.targets[m] = row[m];
    }
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      check_probability(row[4 + f], lines[i], source);
      example.features[f] = row[4 + f];
    }
    check_row_sums(example.features, lines[i], source);
    dataset.examples.push_back(example);
  }

  // With declared offsets the targets must reproduce v + dv bit-exactly;
  // otherwise the offsets are inferred and held to a relative tolerance.
  const auto& first = dataset.examples.front().targets;
  dataset.kick = declared.value_or(KickConfig{first[2] - first[0], first[3] - first[1]});
  if (!(dataset.kick.dv1 > 0.0) || !(dataset.kick.dv2 > 0.0)) {
    fail(ErrorCategory::parse, source + ": kick offsets must be positive");
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& t = dataset.examples[i].targets;
    const bool consistent =
        declared ? (t[2] == t[0] + dataset.kick.dv1 && t[3] == t[1] + dataset.kick.dv2)
                 : (std::abs(t[2] - t[0] - dataset.kick.dv1) <= 1e-9 * std::max(1.0, t[2]) &&
                    std::abs(t[3] - t[1] - dataset.kick.dv2) <= 1e-9 * std::max(1.0, t[3]));
    if (!consistent) {
      fail(ErrorCategory::parse, location(source, lines[i + 1].number) + ": kick offset inconsistent with file");
    }
  }
  return dataset;
}

void write_measurements(std::span<const MeasurementRow> rows, const std::filesystem::path& path) {
  std::string out;
  out += "# provenance = experimental\n";
  out += kMeasurementHeader;
  out += '\n';
  for (const auto& row : rows) {
    out += format_real(row.voltages.v1) + "," + format_real(row.voltages.v2);
    for (const double p : row.probabilities.p) out += "," + format_real(p);
    out += '\n';
  }
  write_text(path, out);
}

namespace {

// Index of the grid value matching `target`, nullopt if beyond the last grid
// value, -1 if inside the grid span but between points.
std::optional<long> partner_index(const std::vector<double>& axis, double target, double tol) {
  if (target > axis.back() + tol) return std::nullopt;
  const auto it = std::lower_bound(axis.begin(), axis.end(), target - tol);
  if (it != axis.end() && std::abs(*it - target) <= tol) return static_cast<long>(it - axis.begin());
  return -1;
}

}  // namespace

IngestionResult ingest_experimental_text(std::string_view text, const KickConfig& kick, const std::string& source) {
  if (!(kick.dv1 > 0.0) || !(kick.dv2 > 0.0)) {
    fail(ErrorCategory::ingestion, "kick must be positive (zero grid steps rejected)");
  }
  std::map<std::string, std::string> meta;
  const auto lines = data_lines(text, meta);
  if (lines.empty()) fail(ErrorCategory::parse, source + ": missing header");

  if (lines.front().text == kDatasetHeader) {
    Dataset dataset = parse_csv(text, source);
    const auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
    if (!close(dataset.kick.dv1, kick.dv1) || !close(dataset.kick.dv2, kick.dv2)) {
      fail(ErrorCategory::ingestion, source + ": file kick offsets differ from the requested kick");
    }
    return {std::move(dataset), 0};
  }
  if (lines.front().text != kMeasurementHeader) {
    fail(ErrorCategory::parse, location(source, lines.front().number) + ": header mismatch, expected `" +
                                   std::string(kMeasurementHeader) + "` or `" + std::string(kDatasetHeader) + "`");
  }

  std::vector<MeasurementRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto row = parse_row(lines[i], 2 + kProbabilityCount, source);
    check_voltage(row[0], lines[i], source);
    check_voltage(row[1], lines[i], source);
    MeasurementRow m{{row[0], row[1]}, {}};
    for (std::size_t k = 0; k < kProbabilityCount; ++k) {
      check_probability(row[2 + k], lines[i], source);
      m.probabilities.p[k] = row[2 + k];
    }
    check_row_sums(m.probabilities.p, lines[i], source);
    rows.push_back(m);
  }
  if (rows.empty()) fail(ErrorCategory::parse, source + ": no measurements");

  std::vector<double> axis1, axis2;
  for (const auto& r : rows) {
    axis1.push_back(r.voltages.v1);
    axis2.push_back(r.voltages.v2);
  }
  for (auto* axis : {&axis1, &axis2}) {
    std::sort(axis->begin(), axis->end());
    axis->erase(std::unique(axis->begin(), axis->end()), axis->end());
  }
  const std::size_t n1 = axis1.size(), n2 = axis2.size();
  std::vector<long> cell(n1 * n2, -1);
  std::vector<std::string> offenders;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<std::size_t>(std::lower_bound(axis1.begin(), axis1.end(), rows[r].voltages.v1) - axis1.begin());
    const auto j = static_cast<std::size_t>(std::lower_bound(axis2.begin(), axis2.end(), rows[r].voltages.v2) - axis2.begin());
    if (cell[i * n2 + j] >= 0) offenders.push_back("duplicate (" + format_real(axis1[i]) + ", " + format_real(axis2[j]) + ")");
    cell[i * n2 + j] = static_cast<long>(r);
  }
  for (std::size_t c = 0; c < cell.size() && offenders.size() < 10; ++c) {
    if (cell[c] < 0) offenders.push_back("missing (" + format_real(axis1[c / n2]) + ", " + format_real(axis2[c % n2]) + ")");
  }
  if (!offenders.empty()) {
    std::string msg = source + ": non-rectangular grid:";
    for (const auto& o : offenders) msg += " " + o;
    fail(ErrorCategory::ingestion, msg);
  }

  const auto min_step = [](const std::vector<double>& axis) {
    double step = INFINITY;
    for (std::size_t k = 1; k < axis.size(); ++k) step = std::min(step, axis[k] - axis[k - 1]);
    return step;
  };
  const double tol1 = 1e-6 * (n1 > 1 ? min_step(axis1) : 1.0);
  const double tol2 = 1e-6 * (n2 > 1 ? min_step(axis2) : 1.0);
  std::vector<std::optional<long>> partner1(n1), partner2(n2);
  offenders.clear();
  for (std::size_t i = 0; i < n1; ++i) {
    partner1[i] = partner_index(axis1, axis1[i] + kick.dv1, tol1);
    if (partner1[i] && *partner1[i] < 0) offenders.push_back("v1=" + format_real(axis1[i]));
  }
  for (std::size_t j = 0; j < n2; ++j) {
    partner2[j] = partner_index(axis2, axis2[j] + kick.dv2, tol2);
    if (partner2[j] && *partner2[j] < 0) offenders.push_back("v2=" + format_real(axis2[j]));
  }
  if (!offenders.empty()) {
    std::string msg = source + ": kicked partner not on grid for";
    for (std::size_t k = 0; k < std::min<std::size_t>(offenders.size(), 10); ++k) msg += " " + offenders[k];
    if (offenders.size() > 10) msg += " (+" + std::to_string(offenders.size() - 10) + " more)";
    fail(ErrorCategory::ingestion, msg);
  }

  IngestionResult result;
  result.dataset.provenance = meta.count("provenance") ? parse_provenance(meta["provenance"]) : Provenance::experimental;
  result.dataset.kick = kick;
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      if (!partner1[i] || !partner2[j]) {
        ++result.dropped;
        continue;
      }
      const auto& base = rows[static_cast<std::size_t>(cell[i * n2 + j])];
      const auto& kicked = rows[static_cast<std::size_t>(
          cell[static_cast<std::size_t>(*partner1[i]) * n2 + static_cast<std::size_t>(*partner2[j])])];
      result.dataset.examples.push_back(make_example(base.voltages, kick, base.probabilities, kicked.probabilities));
    }
  }
  if (result.dataset.empty()) fail(ErrorCategory::ingestion, source + ": no grid point has a kicked partner");
  return result;
}

KickConfig measurement_kick(std::string_view text, double steps, const std::string& source) {
  if (!(steps > 0.0)) fail(ErrorCategory::ingestion, "kick must be a positive number of grid steps");
  std::map<std::string, std::string> meta;
  const auto lines = data_lines(text, meta);
  if (lines.empty() || lines.front().text != kMeasurementHeader) {
    fail(ErrorCategory::parse, source + ": expected a measurement CSV header `" + std::string(kMeasurementHeader) + "`");
  }
  std::vector<double> axis1, axis2;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto row = parse_row(lines[i], 2 + kProbabilityCount, source);
    axis1.push_back(row[0]);
    axis2.push_back(row[1]);
  }
  const auto min_step = [&source](std::vector<double>& axis) {
    std::sort(axis.begin(), axis.end());
    axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
    if (axis.size() < 2) fail(ErrorCategory::ingestion, source + ": grid needs at least two values per axis");
    double step = INFINITY;
    for (std::size_t k = 1; k < axis.size(); ++k) step = std::min(step, axis[k] - axis[k - 1]);
    return step;
  };
  return {steps * min_step(axis1), steps * min_step(axis2)};
}

IngestionResult ingest_experimental(const std::filesystem::path& path, const KickConfig& kick) {
  return ingest_experimental_text(read_text(path), kick, path.string());
}

std::uint64_t content_hash(const Dataset& dataset) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  const auto mix = [&hash](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      hash ^= (word >> (8 * b)) & 0xffu;
      hash *= 0x100000001b3ull;
    }
  };
  mix(static_cast<std::uint64_t>(dataset.provenance));
  mix(std::bit_cast<std::uint64_t>(dataset.kick.dv1));
  mix(std::bit_cast<std::uint64_t>(dataset.kick.dv2));
  for (const auto& example : dataset.examples) {
    for (const double t : example.targets) mix(std::bit_cast<std::uint64_t>(t));
    for (const double f : example.features) mix(std::bit_cast<std::uint64_t>(f));
  }
  return hash;
}

}  // namespace tritcal
