#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "emgnn/gnn.hpp"

// Integrated-gradients attributions of one gene's pre-sigmoid logit.
//
// Both modes integrate with the midpoint rule over alpha_k = (k + 0.5) / steps.
// Node features interpolate from an all-zero baseline with edges fixed; edge
// attributions scale meta-edge weights from 0 to 1 with features fixed.
namespace emgnn {

struct AttributionMatrix {
    std::size_t target = 0;
    Tensor values;  // N x d_I; row i = attribution of gene i's features
    std::size_t steps = 0;
    std::string baseline = "zero";
    double logit = 0.0;           // F(x)
    double baseline_logit = 0.0;  // F(baseline)

    std::vector<double> meta_row() const;
    double total() const;
};

enum class EdgeIgVariant {
    meta,   // scale only the target gene's incoming meta-edges
    global  // scale every non-self-loop edge of every graph, layer graphs included
};

std::string to_string(EdgeIgVariant v);
EdgeIgVariant edge_variant_from_string(const std::string& s);

struct MetaEdgeAttribution {
    std::size_t target = 0;
    std::size_t steps = 0;
    EdgeIgVariant variant = EdgeIgVariant::meta;
    std::vector<std::size_t> layers;  // dataset layer index per incoming meta-edge
    std::vector<double> raw;
    /// raw / max|raw|, signed; all zero when every raw value is zero.
    std::vector<double> normalized;
    bool empty = false;  // gene has no incoming meta-edge

    /// Normalized values clamped to [0, 1] for display.
    std::vector<double> display() const;
};

/// raw / max|raw| (zeros when the max is 0).
std::vector<double> max_normalize(const std::vector<double>& raw);

AttributionMatrix ig_node_features(const ModelParams& params, const GnnConfig& cfg, const PreparedGraphs& graphs,
                                   const Tensor& features, std::size_t gene, std::size_t steps = 64);

MetaEdgeAttribution ig_meta_edges(const ModelParams& params, const GnnConfig& cfg, const PreparedGraphs& graphs,
                                  const Tensor& features, std::size_t gene, std::size_t steps = 64,
                                  EdgeIgVariant variant = EdgeIgVariant::meta);

/// Per-gene max feature attribution; exact zeros dropped; sorted descending,
/// ties by ascending gene id.
std::vector<std::pair<std::size_t, double>> neighbor_importance(const AttributionMatrix& attr);

}  // namespace emgnn
