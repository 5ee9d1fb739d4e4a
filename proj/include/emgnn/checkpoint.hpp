#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include <json.hpp>

#include "emgnn/gnn.hpp"
#include "emgnn/training.hpp"

namespace emgnn {

// Checkpoint container, little-endian throughout:
//   8 bytes   magic "EMGNNCKP"
//   u32       format version
//   u64       header length L
//   L bytes   JSON header: format_version, seed, input_dim, config, tensors[{name, rows, cols}]
//   f64 ...   tensor data in header order, row-major
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelParams params;
    GnnConfig config;
    std::uint64_t seed = 0;
    std::size_t input_dim = 0;
};

nlohmann::json to_json(const GnnConfig& cfg);
GnnConfig gnn_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainReport& report);
nlohmann::json to_json(const SplitSpec& split, const GeneCatalog& catalog);

void write_checkpoint(std::ostream& out, const ModelParams& params, const GnnConfig& cfg, std::uint64_t seed);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const ModelParams& params, const GnnConfig& cfg, std::uint64_t seed,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace emgnn
