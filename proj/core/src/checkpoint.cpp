#include "tritcal/checkpoint.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tritcal/error.hpp"

namespace tritcal {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (const unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

namespace {

std::string hex64(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

void write_block(std::string& out, const std::string& label, const NetworkParameters& params) {
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    out += label + " " + std::to_string(l) + " weights\n";
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        if (c) out += ' ';
        out += format_real(layer.weights(r, c));
      }
      out += '\n';
    }
    out += label + " " + std::to_string(l) + " bias\n";
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      if (r) out += ' ';
      out += format_real(layer.bias(r));
    }
    out += '\n';
  }
}

class Reader {
 public:
  Reader(std::string_view text, std::string source) : text_(text), source_(std::move(source)) {}

  std::string_view line() {
    if (pos_ >= text_.size()) fail(ErrorCategory::parse, where() + ": unexpected end of checkpoint");
    auto end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    const auto out = text_.substr(pos_, end - pos_);
    pos_ = end + 1;
    ++number_;
    return out;
  }

  // `key v1 v2 ...`, returning the values after the key.
  std::vector<std::string_view> keyed(std::string_view key) {
    const auto fields = split(line());
    if (fields.empty() || fields.front() != key) {
      fail(ErrorCategory::parse, where() + ": expected `" + std::string(key) + "`");
    }
    return {fields.begin() + 1, fields.end()};
  }

  std::vector<double> reals(std::size_t count) {
    const auto fields = split(line());
    if (fields.size() != count) {
      fail(ErrorCategory::parse, where() + ": expected " + std::to_string(count) + " values, got " +
                                     std::to_string(fields.size()));
    }
    std::vector<double> out;
    out.reserve(count);
    for (const auto f : fields) {
      const auto v = parse_real(f);
      if (!v) fail(ErrorCategory::parse, where() + ": malformed number `" + std::string(f) + "`");
      out.push_back(*v);
    }
    return out;
  }

  std::string where() const { return source_ + ":" + std::to_string(number_); }

  static std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && line[i] == ' ') ++i;
      const auto start = i;
      while (i < line.size() && line[i] != ' ') ++i;
      if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
  }

 private:
  std::string_view text_;
  std::string source_;
  std::size_t pos_ = 0;
  int number_ = 0;
};

std::size_t to_size(std::string_view text, const Reader& reader) {
  const auto v = parse_integer(text);
  if (!v || *v <= 0) fail(ErrorCategory::parse, reader.where() + ": expected a positive integer");
  return static_cast<std::size_t>(*v);
}

double to_real(std::string_view text, const Reader& reader) {
  const auto v = parse_real(text);
  if (!v) fail(ErrorCategory::parse, reader.where() + ": malformed number");
  return *v;
}

NetworkParameters read_block(Reader& reader, const std::string& label, const LayerSpec& spec) {
  NetworkParameters params = NetworkParameters::zeros(spec);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    const auto header = reader.keyed(label);
    if (header.size() != 2 || header[0] != std::to_string(l) || header[1] != "weights") {
      fail(ErrorCategory::parse, reader.where() + ": expected `" + label + " " + std::to_string(l) + " weights`");
    }
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      const auto row = reader.reals(static_cast<std::size_t>(layer.weights.cols()));
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = row[static_cast<std::size_t>(c)];
    }
    const auto bias_header = reader.keyed(label);
    if (bias_header.size() != 2 || bias_header[0] != std::to_string(l) || bias_header[1] != "bias") {
      fail(ErrorCategory::parse, reader.where() + ": expected `" + label + " " + std::to_string(l) + " bias`");
    }
    const auto bias = reader.reals(static_cast<std::size_t>(layer.bias.size()));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = bias[static_cast<std::size_t>(r)];
  }
  return params;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  const auto spec = checkpoint.params.spec();
  if (checkpoint.scaling.width() != spec.output_width()) {
    fail(ErrorCategory::shape_mismatch, "scaling width does not match the network output");
  }
  std::string out;
  out += std::string(kCheckpointMagic) + "\n";
  out += "version " + std::to_string(kCheckpointVersion) + "\n";
  out += "layers";
  for (const auto w : spec.sizes) out += " " + std::to_string(w);
  out += "\nkick " + format_real(checkpoint.kick.dv1) + " " + format_real(checkpoint.kick.dv2) + "\n";
  out += "scaling_lo";
  for (const double v : checkpoint.scaling.lo) out += " " + format_real(v);
  out += "\nscaling_hi";
  for (const double v : checkpoint.scaling.hi) out += " " + format_real(v);
  out += "\nprovenance " + std::string(to_string(checkpoint.provenance)) + "\n";
  out += "dataset_hash " + hex64(checkpoint.dataset_hash) + "\n";
  write_block(out, "param", checkpoint.params);
  out += "adam_step " + std::to_string(checkpoint.adam.step) + "\n";
  write_block(out, "adam_m", checkpoint.adam.first_moment);
  write_block(out, "adam_v", checkpoint.adam.second_moment);
  out += "checksum " + hex64(fnv1a(out)) + "\n";
  return out;
}

Checkpoint parse_checkpoint(std::string_view text, const std::string& source) {
  // The checksum line is last; verify it before interpreting anything else.
  const auto marker = text.rfind("\nchecksum ");
  if (marker == std::string_view::npos) {
    fail(ErrorCategory::checksum, source + ": missing checksum (truncated file?)");
  }
  const auto body = text.substr(0, marker + 1);
  const auto stated = trim(text.substr(marker + 10));
  if (stated != hex64(fnv1a(body))) fail(ErrorCategory::checksum, source + ": checksum mismatch");

  Reader reader(body, source);
  if (reader.line() != kCheckpointMagic) fail(ErrorCategory::parse, source + ": not a tritcal checkpoint");
  const auto version = reader.keyed("version");
  if (version.size() != 1 || version[0] != std::to_string(kCheckpointVersion)) {
    fail(ErrorCategory::version_mismatch, source + ": unsupported checkpoint version");
  }
  Checkpoint checkpoint;
  LayerSpec spec;
  spec.sizes.clear();
  for (const auto w : reader.keyed("layers")) spec.sizes.push_back(to_size(w, reader));
  spec.validate();
  const auto kick = reader.keyed("kick");
  if (kick.size() != 2) fail(ErrorCategory::parse, reader.where() + ": kick needs two values");
  checkpoint.kick = {to_real(kick[0], reader), to_real(kick[1], reader)};
  for (const auto v : reader.keyed("scaling_lo")) checkpoint.scaling.lo.push_back(to_real(v, reader));
  for (const auto v : reader.keyed("scaling_hi")) checkpoint.scaling.hi.push_back(to_real(v, reader));
  if (checkpoint.scaling.width() != spec.output_width() || checkpoint.scaling.hi.size() != spec.output_width()) {
    fail(ErrorCategory::parse, reader.where() + ": scaling width does not match the output layer");
  }
  const auto provenance = reader.keyed("provenance");
  if (provenance.size() != 1) fail(ErrorCategory::parse, reader.where() + ": bad provenance");
  checkpoint.provenance = parse_provenance(provenance[0]);
  const auto hash = reader.keyed("dataset_hash");
  if (hash.size() != 1 || hash[0].size() != 16) fail(ErrorCategory::parse, reader.where() + ": bad dataset hash");
  const auto [ptr, ec] = std::from_chars(hash[0].data(), hash[0].data() + 16, checkpoint.dataset_hash, 16);
  if (ec != std::errc() || ptr != hash[0].data() + 16) fail(ErrorCategory::parse, reader.where() + ": bad dataset hash");

  checkpoint.params = read_block(reader, "param", spec);
  const auto step = reader.keyed("adam_step");
  const auto parsed_step = step.size() == 1 ? parse_integer(step[0]) : std::nullopt;
  if (!parsed_step || *parsed_step < 0) fail(ErrorCategory::parse, reader.where() + ": bad adam_step");
  checkpoint.adam.step = static_cast<std::uint64_t>(*parsed_step);
  checkpoint.adam.first_moment = read_block(reader, "adam_m", spec);
  checkpoint.adam.second_moment = read_block(reader, "adam_v", spec);
  if (!checkpoint.params.all_finite()) fail(ErrorCategory::parse, source + ": non-finite parameters");
  return checkpoint;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const auto text = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCategory::io, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_checkpoint(buffer.str(), path.string());
}

}  // namespace tritcal
