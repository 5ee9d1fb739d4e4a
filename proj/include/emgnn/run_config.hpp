#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "emgnn/datamodel.hpp"
#include "emgnn/explain.hpp"
#include "emgnn/gnn.hpp"
#include "emgnn/training.hpp"

// Declarative run configuration (JSON). Relative paths resolve against the
// directory holding the config file.
namespace emgnn {

struct LayerSource {
    std::string name;
    std::filesystem::path path;
};

struct DataSection {
    std::vector<LayerSource> layers;
    std::filesystem::path features;
    std::filesystem::path labels;
    std::optional<std::filesystem::path> gene_sets;
};

struct TrainingSection {
    std::size_t epochs = 2000;
    double lr = 0.001;
    std::string test_layer;  // empty: first layer
    double test_fraction = 0.25;
    double val_fraction = 0.1;
    double positive_weight = 1.0;
};

struct ExplainSection {
    std::size_t steps = 64;
    EdgeIgVariant edge_variant = EdgeIgVariant::meta;
    std::size_t top_neighbors = 20;
    std::vector<std::string> genes;
};

struct DiscoverSection {
    double precision_target = 0.95;
    std::optional<double> threshold;  // skips threshold selection when set
};

struct GseaSection {
    std::size_t permutations = 1000;
    double weight = 1.0;
};

enum class AblationMode { none, random_features, all_one, edge_removal };
std::string to_string(AblationMode m);
AblationMode ablation_mode_from_string(const std::string& s);

struct AblationSection {
    std::vector<AblationMode> modes{AblationMode::random_features, AblationMode::all_one,
                                    AblationMode::edge_removal};
    double fraction = 0.2;
    std::vector<std::uint64_t> seeds{0, 1, 2};
};

struct RunConfig {
    std::uint64_t seed = 0;
    DataSection data;
    GnnConfig model;
    TrainingSection training;
    ExplainSection explain;
    DiscoverSection discover;
    GseaSection gsea;
    AblationSection ablation;
    std::filesystem::path output_dir = "out";

    TrainConfig train_config() const;
};

/// Parses and validates. `seed_override` stands in for a missing seed.
/// Errors are ConfigError naming the offending field path.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir,
                           std::optional<std::uint64_t> seed_override = std::nullopt);
RunConfig load_run_config(const std::filesystem::path& path,
                          std::optional<std::uint64_t> seed_override = std::nullopt);

/// Fully resolved configuration, defaults included.
nlohmann::json to_json(const RunConfig& cfg);

struct LoadedDataset {
    MultilayerDataset dataset;
    GeneSetCollection gene_sets;  // empty when no path is configured
    std::size_t missing_feature_genes = 0;
    std::size_t unknown_feature_genes = 0;
};

/// Reads layers in config order (building the catalog), then features and labels.
LoadedDataset load_dataset(const RunConfig& cfg);

}  // namespace emgnn
