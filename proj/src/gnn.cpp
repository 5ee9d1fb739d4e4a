#include "emgnn/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emgnn/error.hpp"
#include "emgnn/rng.hpp"

namespace emgnn {

std::string to_string(Arch arch) { return arch == Arch::gcn ? "GCN" : "GAT"; }

Arch arch_from_string(const std::string& s) {
    if (s == "GCN" || s == "gcn") return Arch::gcn;
    if (s == "GAT" || s == "gat") return Arch::gat;
    throw ConfigError("unknown architecture '" + s + "' (expected GCN or GAT)");
}

void GnnConfig::validate() const {
    if (encoder_layers < 1) throw ConfigError("model.encoder_layers must be >= 1");
    if (meta_layers < 1) throw ConfigError("model.meta_layers must be >= 1");
    if (hidden_dim < 1 || meta_hidden_dim < 1 || head_hidden_dim < 1) {
        throw ConfigError("model dimensions must be >= 1");
    }
    if (!std::isfinite(leaky_slope)) throw ConfigError("model.leaky_slope must be finite");
}

const Tensor& ModelParams::at(std::string_view name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t.value;
    }
    throw ConfigError("model parameters: no tensor named '" + std::string(name) + "'");
}

bool ModelParams::all_finite() const {
    return std::all_of(tensors.begin(), tensors.end(), [](const NamedTensor& t) { return t.value.all_finite(); });
}

ParamLayout param_layout(const GnnConfig& cfg) {
    ParamLayout p;
    std::size_t next = 0;
    for (std::size_t l = 0; l < cfg.encoder_layers; ++l) {
        p.encoder_weight.push_back(next++);
        if (cfg.arch == Arch::gat) p.encoder_attention.push_back(next++);
    }
    p.meta_projection = next++;
    for (std::size_t l = 0; l < cfg.meta_layers; ++l) {
        p.meta_weight.push_back(next++);
        if (cfg.arch == Arch::gat) p.meta_attention.push_back(next++);
    }
    p.head_weight = next++;
    p.head_bias = next++;
    p.output_weight = next++;
    p.output_bias = next++;
    p.count = next;
    return p;
}

std::vector<ParamShape> param_shapes(const GnnConfig& cfg, std::size_t input_dim) {
    cfg.validate();
    std::vector<ParamShape> out;
    std::size_t in = input_dim;
    for (std::size_t l = 0; l < cfg.encoder_layers; ++l) {
        const std::string prefix = "encoder." + std::to_string(l);
        out.push_back({prefix + ".weight", in, cfg.hidden_dim});
        if (cfg.arch == Arch::gat) out.push_back({prefix + ".attention", 2 * cfg.hidden_dim, 1});
        in = cfg.hidden_dim;
    }
    out.push_back({"meta.projection", input_dim, cfg.hidden_dim});
    in = cfg.hidden_dim;
    for (std::size_t l = 0; l < cfg.meta_layers; ++l) {
        const std::string prefix = "meta." + std::to_string(l);
        out.push_back({prefix + ".weight", in, cfg.meta_hidden_dim});
        if (cfg.arch == Arch::gat) out.push_back({prefix + ".attention", 2 * cfg.meta_hidden_dim, 1});
        in = cfg.meta_hidden_dim;
    }
    out.push_back({"head.hidden.weight", cfg.meta_hidden_dim, cfg.head_hidden_dim});
    out.push_back({"head.hidden.bias", 1, cfg.head_hidden_dim});
    out.push_back({"head.output.weight", cfg.head_hidden_dim, 1});
    out.push_back({"head.output.bias", 1, 1});
    return out;
}

ModelParams init_params(const GnnConfig& cfg, std::size_t input_dim, std::uint64_t seed) {
    if (input_dim < 1) throw ConfigError("init_params: input dimension must be >= 1");
    Rng rng(seed);
    ModelParams params;
    for (const ParamShape& s : param_shapes(cfg, input_dim)) {
        Tensor t(s.rows, s.cols);
        if (!s.name.ends_with(".bias")) {
            const double limit = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
            for (double& v : t.values()) v = rng.uniform(-limit, limit);
        }
        params.tensors.push_back({s.name, std::move(t)});
    }
    return params;
}

std::shared_ptr<const SparseStructure> adjacency_with_self_loops(const LayerGraph& layer) {
    std::vector<std::vector<std::size_t>> rows(layer.num_nodes());
    for (std::size_t u = 0; u < layer.num_nodes(); ++u) {
        const auto nbrs = layer.neighbors(u);
        auto& row = rows[u];
        row.reserve(nbrs.size() + 1);
        const auto split = std::lower_bound(nbrs.begin(), nbrs.end(), u);
        row.insert(row.end(), nbrs.begin(), split);
        row.push_back(u);
        row.insert(row.end(), split, nbrs.end());
    }
    return std::make_shared<const SparseStructure>(layer.num_nodes(), rows);
}

ad::SparseWeighted gcn_normalize(const LayerGraph& layer) {
    auto adj = adjacency_with_self_loops(layer);
    Tensor w(adj->nnz(), 1);
    for (std::size_t u = 0; u < adj->rows(); ++u) {
        const double du = static_cast<double>(layer.degree(u) + 1);
        for (std::size_t k = adj->row_begin(u); k < adj->row_end(u); ++k) {
            const double dv = static_cast<double>(layer.degree(adj->col(k)) + 1);
            w[k] = 1.0 / std::sqrt(du * dv);
        }
    }
    return {std::move(adj), std::move(w)};
}

ad::Var gcn_layer(ad::Var h, std::shared_ptr<const SparseStructure> adj, ad::Var edge_weights, ad::Var w) {
    return ad::matmul(ad::spmm(std::move(adj), edge_weights, h), w);
}

ad::Var gat_layer(ad::Var h, std::shared_ptr<const SparseStructure> adj, ad::Var w, ad::Var attention,
                  double slope, std::optional<ad::Var> edge_mask, ad::Var* coefficients) {
    const ad::Var z = ad::matmul(h, w);
    const std::size_t f = z.cols();
    if (attention.rows() != 2 * f || attention.cols() != 1) {
        throw ConfigError("gat_layer: attention vector must be " + std::to_string(2 * f) + "x1, got " +
                          attention.value().shape_string());
    }
    std::vector<std::size_t> dst_half(f), src_half(f);
    std::iota(dst_half.begin(), dst_half.end(), 0);
    std::iota(src_half.begin(), src_half.end(), f);
    const ad::Var score_dst = ad::matmul(z, ad::row_gather(attention, std::move(dst_half)));
    const ad::Var score_src = ad::matmul(z, ad::row_gather(attention, std::move(src_half)));

    std::vector<std::size_t> entry_dst(adj->nnz()), entry_src(adj->nnz());
    for (std::size_t k = 0; k < adj->nnz(); ++k) {
        entry_dst[k] = adj->row_of(k);
        entry_src[k] = adj->col(k);
    }
    const ad::Var logits = ad::leaky_relu(
        ad::add(ad::row_gather(score_dst, std::move(entry_dst)), ad::row_gather(score_src, std::move(entry_src))),
        slope);
    ad::Var alpha = ad::neighbor_softmax(adj, logits);
    if (coefficients) *coefficients = alpha;
    const ad::Var weights = edge_mask ? ad::hadamard(alpha, *edge_mask) : alpha;
    return ad::spmm(std::move(adj), weights, z);
}

MetaGraph build_meta_graph(const MultilayerDataset& dataset) {
    // Canonical layer order by name makes meta aggregation independent of input order.
    std::vector<std::size_t> order(dataset.layers.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dataset.layers[a].name() < dataset.layers[b].name();
    });
    MetaGraph meta;
    meta.incoming.resize(dataset.num_genes());
    for (std::size_t i : order) {
        const LayerGraph& layer = dataset.layers[i];
        for (std::size_t local = 0; local < layer.num_nodes(); ++local) {
            meta.incoming[layer.gene_of(local)].push_back({i, local});
        }
    }
    return meta;
}

PreparedGraphs prepare_graphs(const MultilayerDataset& dataset) {
    PreparedGraphs g;
    const std::size_t n = dataset.num_genes();
    g.num_genes = n;
    for (const LayerGraph& layer : dataset.layers) {
        PreparedGraphs::Layer pl;
        auto norm = gcn_normalize(layer);
        pl.adj = std::move(norm.structure);
        pl.gcn_weights = std::move(norm.weights);
        pl.genes = layer.node_ids();
        pl.self_loop.resize(pl.adj->nnz());
        for (std::size_t k = 0; k < pl.adj->nnz(); ++k) pl.self_loop[k] = pl.adj->row_of(k) == pl.adj->col(k);
        g.layers.push_back(std::move(pl));
    }

    g.meta_graph = build_meta_graph(dataset);
    auto& meta = g.meta;
    std::size_t total = n;
    for (const LayerGraph& layer : dataset.layers) {
        meta.block_offset.push_back(total);
        total += layer.num_nodes();
    }
    // Meta row j: self-loop first, then incoming copies in canonical layer order.
    std::vector<std::vector<std::size_t>> rows(total);
    for (std::size_t j = 0; j < n; ++j) {
        rows[j].push_back(j);
        for (const MetaEdge& e : g.meta_graph.incoming[j]) rows[j].push_back(meta.block_offset[e.layer] + e.local);
    }
    for (std::size_t r = n; r < total; ++r) rows[r].push_back(r);
    meta.adj = std::make_shared<const SparseStructure>(total, rows);

    // In-degree + 1 on the star; a copy node only receives its own self-loop.
    meta.gcn_weights = Tensor(meta.adj->nnz(), 1);
    meta.gene_entries.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t b = meta.adj->row_begin(j);
        const double d = static_cast<double>(meta.adj->row_end(j) - b);
        meta.gcn_weights[b] = 1.0 / d;
        for (std::size_t k = b + 1; k < meta.adj->row_end(j); ++k) {
            meta.gcn_weights[k] = 1.0 / std::sqrt(d);
            meta.gene_entries[j].emplace_back(g.meta_graph.incoming[j][k - b - 1].layer, k);
        }
    }
    for (std::size_t r = n; r < total; ++r) meta.gcn_weights[meta.adj->row_begin(r)] = 1.0;
    return g;
}

std::vector<ad::Var> bind_params(ad::Tape& tape, const ModelParams& params, bool trainable) {
    std::vector<ad::Var> vars;
    vars.reserve(params.tensors.size());
    for (const auto& t : params.tensors) vars.push_back(trainable ? tape.variable(t.value) : tape.constant(t.value));
    return vars;
}

namespace {

void check_params(const GnnConfig& cfg, std::span<const ad::Var> params, const ParamLayout& layout) {
    if (params.size() != layout.count) {
        throw ConfigError("model parameters: expected " + std::to_string(layout.count) + " tensors for " +
                          to_string(cfg.arch) + " configuration, got " + std::to_string(params.size()));
    }
}

ad::Var message_layer(const GnnConfig& cfg, ad::Tape& tape, ad::Var h, const std::shared_ptr<const SparseStructure>& adj,
                      const Tensor& gcn_weights, ad::Var w, std::optional<ad::Var> attention,
                      std::optional<ad::Var> mask) {
    if (cfg.arch == Arch::gcn) {
        ad::Var weights = tape.constant(gcn_weights);
        if (mask) weights = ad::hadamard(weights, *mask);
        return gcn_layer(h, adj, weights, w);
    }
    return gat_layer(h, adj, w, *attention, cfg.leaky_slope, mask);
}

std::vector<ad::Var> encode_on_tape(const GnnConfig& cfg, std::span<const ad::Var> params, const ParamLayout& layout,
                                    const PreparedGraphs& graphs, ad::Var features, const EdgeMasks* masks) {
    ad::Tape& tape = *features.tape;
    std::vector<ad::Var> out;
    out.reserve(graphs.layers.size());
    for (std::size_t i = 0; i < graphs.layers.size(); ++i) {
        const auto& layer = graphs.layers[i];
        std::optional<ad::Var> mask;
        if (masks && i < masks->layers.size()) mask = masks->layers[i];
        ad::Var h = ad::row_gather(features, layer.genes);
        for (std::size_t l = 0; l < cfg.encoder_layers; ++l) {
            std::optional<ad::Var> att;
            if (cfg.arch == Arch::gat) att = params[layout.encoder_attention[l]];
            h = message_layer(cfg, tape, h, layer.adj, layer.gcn_weights, params[layout.encoder_weight[l]], att, mask);
            if (l + 1 < cfg.encoder_layers) h = ad::relu(h);
        }
        out.push_back(h);
    }
    return out;
}

ad::Var meta_on_tape(const GnnConfig& cfg, std::span<const ad::Var> params, const ParamLayout& layout,
                     const PreparedGraphs& graphs, ad::Var features, const std::vector<ad::Var>& layer_outputs,
                     const EdgeMasks* masks) {
    ad::Tape& tape = *features.tape;
    std::vector<ad::Var> blocks;
    blocks.reserve(layer_outputs.size() + 1);
    blocks.push_back(ad::matmul(features, params[layout.meta_projection]));
    for (const ad::Var& h : layer_outputs) blocks.push_back(h);
    ad::Var h = ad::concat_rows(blocks);
    std::optional<ad::Var> mask;
    if (masks) mask = masks->meta;
    for (std::size_t l = 0; l < cfg.meta_layers; ++l) {
        std::optional<ad::Var> att;
        if (cfg.arch == Arch::gat) att = params[layout.meta_attention[l]];
        h = message_layer(cfg, tape, h, graphs.meta.adj, graphs.meta.gcn_weights, params[layout.meta_weight[l]], att,
                          mask);
        if (l + 1 < cfg.meta_layers) h = ad::relu(h);
    }
    std::vector<std::size_t> meta_rows(graphs.num_genes);
    std::iota(meta_rows.begin(), meta_rows.end(), 0);
    return ad::row_gather(h, std::move(meta_rows));
}

ad::Var head_on_tape(std::span<const ad::Var> params, const ParamLayout& layout, ad::Var h_meta) {
    const ad::Var hidden =
        ad::relu(ad::add_row_bias(ad::matmul(h_meta, params[layout.head_weight]), params[layout.head_bias]));
    return ad::add_row_bias(ad::matmul(hidden, params[layout.output_weight]), params[layout.output_bias]);
}

void check_features(const PreparedGraphs& graphs, const Tensor& features) {
    if (features.rows() != graphs.num_genes) {
        throw ConfigError("forward: feature matrix has " + std::to_string(features.rows()) + " rows for " +
                          std::to_string(graphs.num_genes) + " genes");
    }
}

}  // namespace

ForwardVars forward_on_tape(const GnnConfig& cfg, std::span<const ad::Var> params, const PreparedGraphs& graphs,
                            ad::Var features, const EdgeMasks* masks) {
    const ParamLayout layout = param_layout(cfg);
    check_params(cfg, params, layout);
    check_features(graphs, features.value());
    ForwardVars out;
    out.layer_outputs = encode_on_tape(cfg, params, layout, graphs, features, masks);
    out.meta_out = meta_on_tape(cfg, params, layout, graphs, features, out.layer_outputs, masks);
    out.logits = head_on_tape(params, layout, out.meta_out);
    return out;
}

std::vector<Tensor> encode_layers(const ModelParams& params, const GnnConfig& cfg, const MultilayerDataset& dataset) {
    const PreparedGraphs graphs = prepare_graphs(dataset);
    const ParamLayout layout = param_layout(cfg);
    ad::Tape tape;
    const auto vars = bind_params(tape, params, false);
    check_params(cfg, vars, layout);
    check_features(graphs, dataset.features.values);
    const ad::Var x = tape.constant(dataset.features.values);
    std::vector<Tensor> out;
    for (const ad::Var& h : encode_on_tape(cfg, vars, layout, graphs, x, nullptr)) out.push_back(h.value());
    return out;
}

Tensor meta_forward(const ModelParams& params, const GnnConfig& cfg, const MultilayerDataset& dataset,
                    const std::vector<Tensor>& per_layer_h) {
    const PreparedGraphs graphs = prepare_graphs(dataset);
    const ParamLayout layout = param_layout(cfg);
    if (per_layer_h.size() != graphs.layers.size()) {
        throw ConfigError("meta_forward: expected one representation per layer");
    }
    ad::Tape tape;
    const auto vars = bind_params(tape, params, false);
    check_params(cfg, vars, layout);
    const ad::Var x = tape.constant(dataset.features.values);
    std::vector<ad::Var> hs;
    for (std::size_t i = 0; i < per_layer_h.size(); ++i) {
        if (per_layer_h[i].rows() != graphs.layers[i].genes.size() || per_layer_h[i].cols() != cfg.hidden_dim) {
            throw ConfigError("meta_forward: layer " + std::to_string(i) + " representation has shape " +
                              per_layer_h[i].shape_string());
        }
        hs.push_back(tape.constant(per_layer_h[i]));
    }
    return meta_on_tape(cfg, vars, layout, graphs, x, hs, nullptr).value();
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::vector<double> predict(const ModelParams& params, const GnnConfig& cfg, const Tensor& h_meta) {
    const ParamLayout layout = param_layout(cfg);
    ad::Tape tape;
    const auto vars = bind_params(tape, params, false);
    check_params(cfg, vars, layout);
    const ad::Var logits = head_on_tape(vars, layout, tape.constant(h_meta));
    std::vector<double> out(logits.rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(logits.value()[i]);
    return out;
}

std::vector<double> forward_logits(const ModelParams& params, const GnnConfig& cfg, const PreparedGraphs& graphs,
                                   const Tensor& features) {
    ad::Tape tape;
    const auto vars = bind_params(tape, params, false);
    const ad::Var x = tape.constant(features);
    const ForwardVars fv = forward_on_tape(cfg, vars, graphs, x);
    return fv.logits.value().values();
}

std::vector<double> forward(const ModelParams& params, const GnnConfig& cfg, const MultilayerDataset& dataset) {
    const PreparedGraphs graphs = prepare_graphs(dataset);
    auto out = forward_logits(params, cfg, graphs, dataset.features.values);
    for (double& v : out) v = sigmoid(v);
    return out;
}

}  // namespace emgnn
