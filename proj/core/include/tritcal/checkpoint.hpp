#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "tritcal/dataset.hpp"
#include "tritcal/mlp.hpp"

namespace tritcal {

inline constexpr std::string_view kCheckpointMagic = "TRITCAL-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

// Everything needed to resume training or deploy the calibrator.
struct Checkpoint {
  NetworkParameters params;
  AdamState adam;
  TargetScaling scaling;
  KickConfig kick;
  Provenance provenance = Provenance::simulated;
  std::uint64_t dataset_hash = 0;
};

// Text container: magic, version, header fields, row-major weights and
// biases, Adam moments, then an FNV-1a checksum of every preceding byte.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view text, const std::string& source = "<string>");

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::uint64_t fnv1a(std::string_view bytes);

}  // namespace tritcal
