#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emgnn/datamodel.hpp"

namespace emgnn {

enum class SynthVariant {
    standard,      // positives form pure communities in every layer
    complementary  // positives are split into groups; group g is pure only in layer g mod K
};

std::string to_string(SynthVariant v);
SynthVariant synth_variant_from_string(const std::string& s);

/// Planted multilayer task.
///
/// In every layer, positives whose group is planted there link at random
/// among themselves; all other genes link at random among the rest. Both
/// pools get `within_degree` expected neighbors, so degree carries no label
/// information, and `background_degree` random edges per gene are added on
/// top.
/// Positives add `signal * feature_shift` to the first `informative_features`
/// features; all features carry standard normal noise.
struct SynthSpec {
    std::size_t n_genes = 200;
    std::size_t n_layers = 2;
    std::size_t n_features = 8;
    std::size_t informative_features = 8;
    double signal = 1.0;  // 0 plants nothing: no pools, no shift
    double feature_shift = 0.6;
    SynthVariant variant = SynthVariant::complementary;
    double positive_fraction = 0.25;
    double labeled_fraction = 0.8;
    double within_degree = 6.0;
    double background_degree = 2.0;
    double layer_coverage = 1.0;  // fraction of genes kept in each layer
    std::uint64_t seed = 0;
};

struct SynthDataset {
    MultilayerDataset dataset;
    std::vector<int> truth;          // planted class of every gene, labeled or not
    std::vector<std::size_t> group;  // positive group per gene (meaningful for positives)
    GeneSetCollection gene_sets;
};

SynthDataset make_synthetic(const SynthSpec& spec);

/// Writes layer_<i>.tsv, features.csv, labels.tsv, truth.tsv, gene_sets.gmt
/// and a ready-to-run config.json into `dir`.
void write_synthetic(const SynthDataset& synth, const SynthSpec& spec, const std::filesystem::path& dir);

}  // namespace emgnn
