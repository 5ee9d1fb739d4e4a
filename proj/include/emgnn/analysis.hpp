#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emgnn/datamodel.hpp"

namespace emgnn {

struct RankedGene {
    std::string gene;
    double score;
};

/// Ordered by descending score; ties keep the order given at construction.
struct RankedGeneList {
    std::vector<RankedGene> entries;

    /// Sorts (id, score) pairs by (score desc, id asc) and resolves names.
    static RankedGeneList from_scores(std::span<const std::pair<std::size_t, double>> scored,
                                      const GeneCatalog& catalog);
    std::size_t size() const noexcept { return entries.size(); }
};

/// Smallest observed score t with precision({score >= t}) >= target.
/// Throws NumericError naming the best achievable precision when no t qualifies.
double select_threshold(std::span<const double> scores, std::span<const int> labels, double precision_target = 0.95);

/// Precision of {score >= threshold}; 0 when nothing is selected.
double precision_at(std::span<const double> scores, std::span<const int> labels, double threshold);

struct DiscoveryResult {
    double threshold = 0.0;
    RankedGeneList all;         // every unlabeled gene
    RankedGeneList candidates;  // unlabeled genes with probability >= threshold
};

DiscoveryResult discover_candidates(std::span<const double> probabilities, const MultilayerDataset& dataset,
                                    double threshold);

/// Fraction of one-hop neighbors carrying a positive label; nullopt when the
/// gene is absent from the layer or isolated in it.
std::optional<double> cancer_neighbor_fraction(const MultilayerDataset& dataset, std::size_t gene, std::size_t layer);

struct Variability {
    std::size_t valid_layers = 0;
    std::optional<double> stddev;       // sample standard deviation of attributions
    std::optional<double> correlation;  // Pearson r between attribution and fraction
};

/// Uses only layers where both values are defined; fewer than two such layers
/// leaves both statistics undefined, and a constant vector leaves r undefined.
Variability meta_edge_variability(std::span<const std::optional<double>> attributions,
                                  std::span<const std::optional<double>> fractions);

struct EnrichmentResult {
    std::string set_name;
    double es = 0.0;
    std::optional<double> p_value;  // unset when permutations == 0
    std::optional<double> fdr;
    bool p_below_resolution = false;  // no null draw reached |ES|; p < 1/permutations
    std::size_t leading_edge = 0;
    std::size_t hits = 0;
    std::size_t set_size = 0;
};

struct GseaResult {
    std::vector<EnrichmentResult> results;         // usable sets in collection order
    std::vector<std::string> skipped;              // sets with no member in the list
    std::vector<std::size_t> unresolved_members;   // per usable set, members absent from the list
};

struct EnrichmentScore {
    double es = 0.0;
    std::size_t peak = 0;  // list position of the extremum
};

/// Weighted running-sum statistic. `hits` are ascending list positions. At
/// position i the deviation is (sum of |s|^p over hits <= i) / N_R minus
/// (misses <= i) / (n - n_hits); the ES is the deviation of largest magnitude
/// (positive on ties). All-zero hit weights fall back to equal weights.
EnrichmentScore enrichment_score(std::span<const double> scores, std::span<const std::size_t> hits, double weight);

GseaResult gsea_prerank(const RankedGeneList& ranked, const GeneSetCollection& sets, std::size_t permutations = 1000,
                        double weight = 1.0, std::uint64_t seed = 0);

/// Benjamini-Hochberg adjusted p-values in input order.
std::vector<double> benjamini_hochberg(std::span<const double> p_values);

}  // namespace emgnn
