#pragma once

// Checkpoint container:
//   8 bytes   magic "SBBTSCKP"
//   uint32    format version (little endian)
//   uint64    header length in bytes
//   header    UTF-8 JSON: config, resolved beta, scaler, grid, grid hash,
//             network shape and a table of parameters (name, shape, offset)
//   payload   float64 little-endian values, parameters back to back

#include <cstdint>
#include <string>

#include <json.hpp>

#include "sbbts/core/trainer.hpp"

namespace sbbts::core {

inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json config_to_json(const SBBTSConfig& config);
/// Reads the keys present in `j` on top of `base`; unknown keys raise ConfigError.
SBBTSConfig config_from_json(const nlohmann::json& j, SBBTSConfig base = {});

nlohmann::json scaler_to_json(const ScalerState& scaler);
ScalerState scaler_from_json(const nlohmann::json& j);

void save_checkpoint(const SBBTSModel& model, const std::string& path);
SBBTSModel load_checkpoint(const std::string& path);

std::string grid_hash_hex(const stochastic::TimeGrid& grid);

}  // namespace sbbts::core
