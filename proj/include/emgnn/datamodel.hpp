#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "emgnn/tensor.hpp"

namespace emgnn {

/// Ordered set of unique gene identifiers; ids are positions in load order.
class GeneCatalog {
public:
    std::size_t size() const noexcept { return names_.size(); }
    const std::string& name(std::size_t id) const { return names_.at(id); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    std::optional<std::size_t> find(std::string_view name) const;
    /// Returns the id of `name`, appending it when unseen.
    std::size_t intern(std::string_view name);

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Undirected edge between catalog ids, stored with a < b.
struct Edge {
    std::size_t a;
    std::size_t b;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// One interaction network over a subset of the catalog.
///
/// Edges are canonical: no self-loops, no duplicates, sorted. Nodes get a
/// layer-local id equal to their rank among the layer's catalog ids; the
/// adjacency lists both directions with neighbors in ascending local id.
class LayerGraph {
public:
    LayerGraph() = default;

    /// Canonicalizes `edges` (self-loops and duplicates dropped, endpoints added to `nodes`).
    static LayerGraph build(std::string name, std::vector<std::size_t> nodes, std::vector<Edge> edges);

    const std::string& name() const noexcept { return name_; }
    const std::vector<std::size_t>& node_ids() const noexcept { return nodes_; }
    std::size_t num_nodes() const noexcept { return nodes_.size(); }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    std::size_t num_edges() const noexcept { return edges_.size(); }

    std::optional<std::size_t> local_id(std::size_t gene) const;
    bool contains(std::size_t gene) const { return local_id(gene).has_value(); }
    std::size_t gene_of(std::size_t local) const { return nodes_[local]; }

    std::span<const std::size_t> neighbors(std::size_t local) const {
        return {adj_.data() + offsets_[local], offsets_[local + 1] - offsets_[local]};
    }
    std::size_t degree(std::size_t local) const { return offsets_[local + 1] - offsets_[local]; }

private:
    std::string name_;
    std::vector<std::size_t> nodes_;
    std::vector<Edge> edges_;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> adj_;
};

struct FeatureMatrix {
    Tensor values;  // N x d_I
    std::vector<std::string> names;
    std::vector<std::string> groups;  // omic group per feature
};

enum class Label : std::uint8_t { negative = 0, positive = 1 };

/// Partial map gene id -> label; unlabeled genes are absent.
struct LabelSet {
    std::map<std::size_t, Label> labels;

    std::optional<Label> find(std::size_t gene) const;
    std::size_t count(Label which) const;
};

struct GeneSet {
    std::string name;
    std::string description;
    std::vector<std::string> members;
};

/// Sets in file order.
struct GeneSetCollection {
    std::vector<GeneSet> sets;
};

struct MultilayerDataset {
    GeneCatalog catalog;
    std::vector<LayerGraph> layers;
    FeatureMatrix features;
    LabelSet labels;

    std::size_t num_genes() const noexcept { return catalog.size(); }
    std::size_t num_features() const noexcept { return features.values.cols(); }
    std::optional<std::size_t> layer_index(std::string_view name) const;
    /// Checks the cross-component invariants; throws DataError naming the first violation.
    void validate() const;
};

struct FeatureLoadResult {
    FeatureMatrix features;
    std::size_t missing_genes = 0;  // catalog genes absent from the file (zero rows)
    std::size_t unknown_genes = 0;  // file rows naming genes outside the catalog (skipped)
};

LayerGraph read_layer_graph(std::istream& in, GeneCatalog& catalog, std::string layer_name);
LayerGraph load_layer_graph(const std::filesystem::path& path, GeneCatalog& catalog, std::string layer_name);

FeatureLoadResult read_feature_matrix(std::istream& in, const GeneCatalog& catalog);
FeatureLoadResult load_feature_matrix(const std::filesystem::path& path, const GeneCatalog& catalog);

LabelSet read_labels(std::istream& in, const GeneCatalog& catalog);
LabelSet load_labels(const std::filesystem::path& path, const GeneCatalog& catalog);

GeneSetCollection read_gene_sets(std::istream& in);
GeneSetCollection load_gene_sets(const std::filesystem::path& path);

void write_layer_graph(std::ostream& out, const LayerGraph& layer, const GeneCatalog& catalog);
void write_feature_matrix(std::ostream& out, const FeatureMatrix& features, const GeneCatalog& catalog);
void write_labels(std::ostream& out, const LabelSet& labels, const GeneCatalog& catalog);
void write_gene_sets(std::ostream& out, const GeneSetCollection& sets);

enum class FeaturePerturbation { random, all_one };

/// Copy with the feature matrix replaced (standard normal draws or all ones).
MultilayerDataset perturb_features(const MultilayerDataset& dataset, FeaturePerturbation mode,
                                   std::uint64_t seed);

/// Copy with floor(fraction * |E_i|) edges removed uniformly from every layer.
/// Layer i samples from a generator seeded by sub_seed(seed, i).
MultilayerDataset remove_edges(const MultilayerDataset& dataset, double fraction, std::uint64_t seed);

}  // namespace emgnn
