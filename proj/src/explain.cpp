#include "emgnn/explain.hpp"

#include <algorithm>
#include <cmath>

#include "emgnn/error.hpp"

namespace emgnn {

std::vector<double> AttributionMatrix::meta_row() const {
    const auto r = values.row(target);
    return {r.begin(), r.end()};
}

double AttributionMatrix::total() const {
    double acc = 0.0;
    for (double v : values.values()) acc += v;
    return acc;
}

std::string to_string(EdgeIgVariant v) { return v == EdgeIgVariant::meta ? "meta" : "global"; }

EdgeIgVariant edge_variant_from_string(const std::string& s) {
    if (s == "meta") return EdgeIgVariant::meta;
    if (s == "global") return EdgeIgVariant::global;
    throw ConfigError("unknown edge attribution variant '" + s + "' (expected meta or global)");
}

std::vector<double> MetaEdgeAttribution::display() const {
    std::vector<double> out = normalized;
    for (double& v : out) v = std::clamp(v, 0.0, 1.0);
    return out;
}

std::vector<double> max_normalize(const std::vector<double>& raw) {
    double m = 0.0;
    for (double v : raw) m = std::max(m, std::abs(v));
    std::vector<double> out(raw.size(), 0.0);
    if (m > 0.0) {
        for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / m;
    }
    return out;
}

namespace {

void check_inputs(const ModelParams& params, const PreparedGraphs& graphs, const Tensor& features,
                  std::size_t gene, std::size_t steps) {
    if (!params.all_finite()) throw NumericError("explain: model parameters contain non-finite values");
    if (gene >= graphs.num_genes) throw DataError("explain: gene id " + std::to_string(gene) + " out of range");
    if (features.rows() != graphs.num_genes) throw ConfigError("explain: feature rows do not match the catalog");
    if (steps == 0) throw ConfigError("explain: steps must be >= 1");
}

double target_logit(const ModelParams& params, const GnnConfig& cfg, const PreparedGraphs& graphs,
                    const Tensor& features, std::size_t gene) {
    return forward_logits(params, cfg, graphs, features)[gene];
}

}  // namespace

AttributionMatrix ig_node_features(const ModelParams& params, const GnnConfig& cfg, const PreparedGraphs& graphs,
                                   const Tensor& features, std::size_t gene, std::size_t steps) {
    check_inputs(params, graphs, features, gene, steps);
    Tensor grad_sum(features.rows(), features.cols());
    for (std::size_t k = 0; k < steps; ++k) {
        const double alpha = (static_cast<double>(k) + 0.5) / static_cast<double>(steps);
        Tensor scaled = features;
        for (double& v : scaled.values()) v *= alpha;
        ad::Tape tape;
        const auto vars = bind_params(tape, params, false);
        const ad::Var x = tape.variable(std::move(scaled));
        const ForwardVars fv = forward_on_tape(cfg, vars, graphs, x);
        const ad::Var out = ad::row_gather(fv.logits, {gene});
        const Tensor g = tape.backward(out).of(x);
        for (std::size_t i = 0; i < g.size(); ++i) grad_sum[i] += g[i];
    }
    AttributionMatrix attr;
    attr.target = gene;
    attr.steps = steps;
    attr.values = Tensor(features.rows(), features.cols());
    const double inv = 1.0 / static_cast<double>(steps);
    for (std::size_t i = 0; i < features.size(); ++i) attr.values[i] = features[i] * (grad_sum[i] * inv);
    attr.logit = target_logit(params, cfg, graphs, features, gene);
    attr.baseline_logit = target_logit(params, cfg, graphs, Tensor(features.rows(), features.cols()), gene);
    return attr;
}

MetaEdgeAttribution ig_meta_edges(const ModelParams& params, const GnnConfig& cfg, const PreparedGraphs& graphs,
                                  const Tensor& features, std::size_t gene, std::size_t steps,
                                  EdgeIgVariant variant) {
    check_inputs(params, graphs, features, gene, steps);
    MetaEdgeAttribution result;
    result.target = gene;
    result.steps = steps;
    result.variant = variant;
    const auto& entries = graphs.meta.gene_entries[gene];
    if (entries.empty()) {
        result.empty = true;
        return result;
    }
    const std::size_t meta_nnz = graphs.meta.adj->nnz();
    std::vector<double> grad_sum(entries.size(), 0.0);
    for (std::size_t k = 0; k < steps; ++k) {
        const double alpha = (static_cast<double>(k) + 0.5) / static_cast<double>(steps);
        Tensor meta_mask(meta_nnz, 1, 1.0);
        if (variant == EdgeIgVariant::meta) {
            for (const auto& [layer, entry] : entries) meta_mask[entry] = alpha;
        } else {
            for (std::size_t e = 0; e < meta_nnz; ++e) {
                if (graphs.meta.adj->row_of(e) != graphs.meta.adj->col(e)) meta_mask[e] = alpha;
            }
        }
        ad::Tape tape;
        const auto vars = bind_params(tape, params, false);
        const ad::Var x = tape.constant(features);
        EdgeMasks masks;
        masks.meta = tape.variable(std::move(meta_mask));
        if (variant == EdgeIgVariant::global) {
            for (const auto& layer : graphs.layers) {
                Tensor m(layer.adj->nnz(), 1, 1.0);
                for (std::size_t e = 0; e < m.size(); ++e) {
                    if (!layer.self_loop[e]) m[e] = alpha;
                }
                masks.layers.emplace_back(tape.constant(std::move(m)));
            }
        }
        const ForwardVars fv = forward_on_tape(cfg, vars, graphs, x, &masks);
        const ad::Var out = ad::row_gather(fv.logits, {gene});
        const Tensor g = tape.backward(out).of(*masks.meta);
        for (std::size_t i = 0; i < entries.size(); ++i) grad_sum[i] += g[entries[i].second];
    }
    const double inv = 1.0 / static_cast<double>(steps);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        result.layers.push_back(entries[i].first);
        result.raw.push_back(grad_sum[i] * inv);
    }
    result.normalized = max_normalize(result.raw);
    return result;
}

std::vector<std::pair<std::size_t, double>> neighbor_importance(const AttributionMatrix& attr) {
    std::vector<std::pair<std::size_t, double>> out;
    const Tensor& k = attr.values;
    if (k.cols() == 0) return out;
    for (std::size_t i = 0; i < k.rows(); ++i) {
        const auto row = k.row(i);
        const double m = *std::max_element(row.begin(), row.end());
        if (m != 0.0) out.emplace_back(i, m);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

}  // namespace emgnn
