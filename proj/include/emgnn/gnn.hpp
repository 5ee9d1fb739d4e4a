#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emgnn/autodiff.hpp"
#include "emgnn/datamodel.hpp"

// Multilayer GNN: a shared encoder runs on every layer graph, each gene's
// layer copies send directed messages into a per-gene meta node, a meta GNN
// updates the meta nodes, and an MLP head scores them.
namespace emgnn {

enum class Arch { gcn, gat };

std::string to_string(Arch arch);
Arch arch_from_string(const std::string& s);

struct GnnConfig {
    Arch arch = Arch::gcn;
    std::size_t encoder_layers = 3;
    std::size_t hidden_dim = 64;
    std::size_t meta_layers = 1;
    std::size_t meta_hidden_dim = 64;
    std::size_t head_hidden_dim = 64;
    double leaky_slope = 0.2;

    void validate() const;
    friend bool operator==(const GnnConfig&, const GnnConfig&) = default;
};

struct NamedTensor {
    std::string name;
    Tensor value;
    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// All trainable tensors in a fixed declaration order (see param_layout).
struct ModelParams {
    std::vector<NamedTensor> tensors;

    const Tensor& at(std::string_view name) const;
    bool all_finite() const;
    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Index of each parameter role within ModelParams::tensors.
struct ParamLayout {
    std::vector<std::size_t> encoder_weight;
    std::vector<std::size_t> encoder_attention;  // GAT only
    std::size_t meta_projection = 0;
    std::vector<std::size_t> meta_weight;
    std::vector<std::size_t> meta_attention;  // GAT only
    std::size_t head_weight = 0;
    std::size_t head_bias = 0;
    std::size_t output_weight = 0;
    std::size_t output_bias = 0;
    std::size_t count = 0;
};

ParamLayout param_layout(const GnnConfig& cfg);

struct ParamShape {
    std::string name;
    std::size_t rows;
    std::size_t cols;
};
std::vector<ParamShape> param_shapes(const GnnConfig& cfg, std::size_t input_dim);

/// Glorot-uniform weights and zero biases drawn from a generator seeded with `seed`.
ModelParams init_params(const GnnConfig& cfg, std::size_t input_dim, std::uint64_t seed);

/// Layer adjacency over local ids with a self-loop per node; each row lists
/// its neighbors and itself in ascending local id.
std::shared_ptr<const SparseStructure> adjacency_with_self_loops(const LayerGraph& layer);

/// Self-loop adjacency weighted 1 / sqrt(d_u * d_v) with d = degree + 1.
ad::SparseWeighted gcn_normalize(const LayerGraph& layer);

/// h' = spmm(adj, edge_weights, h) * w
ad::Var gcn_layer(ad::Var h, std::shared_ptr<const SparseStructure> adj, ad::Var edge_weights, ad::Var w);

/// Single-head attention layer. `attention` is 2F x 1: the first F entries
/// score the destination, the rest the source. An optional per-entry mask
/// multiplies the attention coefficients. The coefficients are written to
/// `coefficients` when given.
ad::Var gat_layer(ad::Var h, std::shared_ptr<const SparseStructure> adj, ad::Var w, ad::Var attention,
                  double slope, std::optional<ad::Var> edge_mask = std::nullopt,
                  ad::Var* coefficients = nullptr);

/// Incoming meta-edge: the copy of a gene in layer `layer` (layer-local id `local`).
struct MetaEdge {
    std::size_t layer;
    std::size_t local;
};

/// Per-gene star: incoming edges from every layer containing the gene, in
/// ascending layer-name order, plus an implicit self-loop on the meta node.
struct MetaGraph {
    std::vector<std::vector<MetaEdge>> incoming;
};

MetaGraph build_meta_graph(const MultilayerDataset& dataset);

/// Sparse structures derived once per dataset and reused by every forward pass.
struct PreparedGraphs {
    struct Layer {
        std::shared_ptr<const SparseStructure> adj;
        Tensor gcn_weights;                // nnz x 1
        std::vector<std::size_t> genes;    // catalog id per local id
        std::vector<bool> self_loop;       // per entry
    };
    /// Meta adjacency over rows [0, N) for meta nodes followed by one block of
    /// layer copies per layer. Copy rows hold only their self-loop.
    struct Meta {
        std::shared_ptr<const SparseStructure> adj;
        Tensor gcn_weights;
        std::vector<std::size_t> block_offset;  // first row of each layer's copy block
        /// Per gene, (layer, entry index) of each incoming meta-edge in adjacency order.
        std::vector<std::vector<std::pair<std::size_t, std::size_t>>> gene_entries;
    };

    std::size_t num_genes = 0;
    std::vector<Layer> layers;
    Meta meta;
    MetaGraph meta_graph;
};

PreparedGraphs prepare_graphs(const MultilayerDataset& dataset);

/// Optional multiplicative masks on edge weights. Sizes follow the matching
/// adjacency's nnz; an unset mask means all ones.
struct EdgeMasks {
    std::optional<ad::Var> meta;
    std::vector<std::optional<ad::Var>> layers;
};

/// Puts every parameter on the tape, as variables or constants.
std::vector<ad::Var> bind_params(ad::Tape& tape, const ModelParams& params, bool trainable);

struct ForwardVars {
    std::vector<ad::Var> layer_outputs;  // H per layer, N_i x hidden
    ad::Var meta_out;                    // N x meta_hidden
    ad::Var logits;                      // N x 1
};

/// Full forward on a tape. `features` is N x d_I.
ForwardVars forward_on_tape(const GnnConfig& cfg, std::span<const ad::Var> params, const PreparedGraphs& graphs,
                            ad::Var features, const EdgeMasks* masks = nullptr);

std::vector<Tensor> encode_layers(const ModelParams& params, const GnnConfig& cfg, const MultilayerDataset& dataset);

Tensor meta_forward(const ModelParams& params, const GnnConfig& cfg, const MultilayerDataset& dataset,
                    const std::vector<Tensor>& per_layer_h);

/// Per-row probabilities from meta representations through the MLP head.
std::vector<double> predict(const ModelParams& params, const GnnConfig& cfg, const Tensor& h_meta);

std::vector<double> forward_logits(const ModelParams& params, const GnnConfig& cfg, const PreparedGraphs& graphs,
                                   const Tensor& features);
std::vector<double> forward(const ModelParams& params, const GnnConfig& cfg, const MultilayerDataset& dataset);

double sigmoid(double z);

}  // namespace emgnn
