#include "emgnn/datamodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "emgnn/error.hpp"
#include "emgnn/rng.hpp"

namespace emgnn {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string> split_whitespace(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) out.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::optional<double> parse_double(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace

std::optional<std::size_t> GeneCatalog::find(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t GeneCatalog::intern(std::string_view name) {
    const auto [it, inserted] = index_.emplace(std::string(name), names_.size());
    if (inserted) names_.emplace_back(name);
    return it->second;
}

LayerGraph LayerGraph::build(std::string name, std::vector<std::size_t> nodes, std::vector<Edge> edges) {
    LayerGraph g;
    g.name_ = std::move(name);
    for (Edge& e : edges) {
        if (e.a > e.b) std::swap(e.a, e.b);
        nodes.push_back(e.a);
        nodes.push_back(e.b);
    }
    std::erase_if(edges, [](const Edge& e) { return e.a == e.b; });
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    g.nodes_ = std::move(nodes);
    g.edges_ = std::move(edges);

    std::vector<std::vector<std::size_t>> lists(g.nodes_.size());
    for (const Edge& e : g.edges_) {
        const std::size_t la = *g.local_id(e.a);
        const std::size_t lb = *g.local_id(e.b);
        lists[la].push_back(lb);
        lists[lb].push_back(la);
    }
    g.offsets_.reserve(lists.size() + 1);
    g.offsets_.push_back(0);
    for (auto& l : lists) {
        std::sort(l.begin(), l.end());
        g.adj_.insert(g.adj_.end(), l.begin(), l.end());
        g.offsets_.push_back(g.adj_.size());
    }
    return g;
}

std::optional<std::size_t> LayerGraph::local_id(std::size_t gene) const {
    const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), gene);
    if (it == nodes_.end() || *it != gene) return std::nullopt;
    return static_cast<std::size_t>(it - nodes_.begin());
}

std::optional<Label> LabelSet::find(std::size_t gene) const {
    const auto it = labels.find(gene);
    if (it == labels.end()) return std::nullopt;
    return it->second;
}

std::size_t LabelSet::count(Label which) const {
    return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(),
                                                  [&](const auto& kv) { return kv.second == which; }));
}

std::optional<std::size_t> MultilayerDataset::layer_index(std::string_view name) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].name() == name) return i;
    }
    return std::nullopt;
}

void MultilayerDataset::validate() const {
    const std::size_t n = catalog.size();
    if (n == 0) throw DataError("dataset: empty gene catalog");
    if (layers.empty()) throw DataError("dataset: at least one layer graph is required");
    std::set<std::string> names;
    for (const LayerGraph& l : layers) {
        if (!names.insert(l.name()).second) throw DataError("dataset: duplicate layer name '" + l.name() + "'");
        if (!l.node_ids().empty() && l.node_ids().back() >= n) {
            throw DataError("dataset: layer '" + l.name() + "' references a gene outside the catalog");
        }
    }
    if (features.values.rows() != n) {
        throw DataError("dataset: feature matrix has " + std::to_string(features.values.rows()) +
                        " rows for " + std::to_string(n) + " genes");
    }
    if (features.names.size() != features.values.cols() || features.groups.size() != features.values.cols()) {
        throw DataError("dataset: feature names/groups do not match the feature dimension");
    }
    if (!features.values.all_finite()) throw DataError("dataset: non-finite feature value");
    if (!labels.labels.empty() && labels.labels.rbegin()->first >= n) {
        throw DataError("dataset: label for a gene outside the catalog");
    }
}

LayerGraph read_layer_graph(std::istream& in, GeneCatalog& catalog, std::string layer_name) {
    std::vector<std::size_t> nodes;
    std::vector<Edge> edges;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (is_blank(line) || line.front() == '#') continue;
        const auto cols = split_whitespace(line);
        if (cols.size() != 2) {
            throw DataError("edge list '" + layer_name + "' line " + std::to_string(line_no) +
                            ": expected 2 columns, found " + std::to_string(cols.size()));
        }
        const std::size_t a = catalog.intern(cols[0]);
        const std::size_t b = catalog.intern(cols[1]);
        nodes.push_back(a);
        nodes.push_back(b);
        edges.push_back({a, b});
    }
    if (nodes.empty()) throw DataError("edge list '" + layer_name + "' is empty");
    return LayerGraph::build(std::move(layer_name), std::move(nodes), std::move(edges));
}

LayerGraph load_layer_graph(const std::filesystem::path& path, GeneCatalog& catalog, std::string layer_name) {
    auto in = open_input(path);
    return read_layer_graph(in, catalog, std::move(layer_name));
}

FeatureLoadResult read_feature_matrix(std::istream& in, const GeneCatalog& catalog) {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            strip_cr(line);
            if (!is_blank(line)) return true;
        }
        return false;
    };
    if (!next_line()) throw DataError("feature matrix: empty file");
    auto header = split(line, ',');
    if (header.size() < 2) throw DataError("feature matrix: header needs a gene column and at least one feature");
    FeatureLoadResult result;
    FeatureMatrix& fm = result.features;
    fm.names.assign(header.begin() + 1, header.end());
    {
        std::set<std::string> seen;
        for (const auto& f : fm.names) {
            if (!seen.insert(f).second) throw DataError("feature matrix: duplicate feature name '" + f + "'");
        }
    }
    const std::size_t d = fm.names.size();
    fm.groups.assign(d, "features");
    fm.values = Tensor(catalog.size(), d);
    std::vector<bool> filled(catalog.size(), false);

    bool first_data_row = true;
    while (next_line()) {
        auto cells = split(line, ',');
        if (first_data_row && cells.front() == "omic_group") {
            first_data_row = false;
            if (cells.size() != d + 1) {
                throw DataError("feature matrix line " + std::to_string(line_no) + ": omic_group row has " +
                                std::to_string(cells.size() - 1) + " entries for " + std::to_string(d) +
                                " features");
            }
            fm.groups.assign(cells.begin() + 1, cells.end());
            continue;
        }
        first_data_row = false;
        if (cells.size() != d + 1) {
            throw DataError("feature matrix line " + std::to_string(line_no) + ": expected " +
                            std::to_string(d + 1) + " cells, found " + std::to_string(cells.size()));
        }
        const auto id = catalog.find(cells.front());
        if (!id) {
            ++result.unknown_genes;
            continue;
        }
        if (filled[*id]) {
            throw DataError("feature matrix line " + std::to_string(line_no) + ": duplicate row for gene '" +
                            cells.front() + "'");
        }
        filled[*id] = true;
        for (std::size_t c = 0; c < d; ++c) {
            const auto v = parse_double(cells[c + 1]);
            if (!v || !std::isfinite(*v)) {
                throw DataError("feature matrix line " + std::to_string(line_no) + ", column '" + fm.names[c] +
                                "': invalid value '" + cells[c + 1] + "'");
            }
            fm.values(*id, c) = *v;
        }
    }
    result.missing_genes = static_cast<std::size_t>(std::count(filled.begin(), filled.end(), false));
    return result;
}

FeatureLoadResult load_feature_matrix(const std::filesystem::path& path, const GeneCatalog& catalog) {
    auto in = open_input(path);
    return read_feature_matrix(in, catalog);
}

LabelSet read_labels(std::istream& in, const GeneCatalog& catalog) {
    LabelSet out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (is_blank(line) || line.front() == '#') continue;
        const auto cols = split_whitespace(line);
        if (cols.size() != 2) {
            throw DataError("labels line " + std::to_string(line_no) + ": expected 'gene<TAB>0|1'");
        }
        const auto id = catalog.find(cols[0]);
        if (!id) throw DataError("labels line " + std::to_string(line_no) + ": unknown gene '" + cols[0] + "'");
        Label label;
        if (cols[1] == "1") {
            label = Label::positive;
        } else if (cols[1] == "0") {
            label = Label::negative;
        } else {
            throw DataError("labels line " + std::to_string(line_no) + ": label must be 0 or 1, got '" +
                            cols[1] + "'");
        }
        const auto [it, inserted] = out.labels.emplace(*id, label);
        if (!inserted && it->second != label) {
            throw DataError("labels line " + std::to_string(line_no) + ": conflicting labels for gene '" +
                            cols[0] + "'");
        }
    }
    return out;
}

LabelSet load_labels(const std::filesystem::path& path, const GeneCatalog& catalog) {
    auto in = open_input(path);
    return read_labels(in, catalog);
}

GeneSetCollection read_gene_sets(std::istream& in) {
    GeneSetCollection out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (is_blank(line)) continue;
        auto fields = split(line, '\t');
        std::erase_if(fields, [](const std::string& f) { return f.empty(); });
        if (fields.size() < 3) {
            throw DataError("gene sets line " + std::to_string(line_no) +
                            ": expected name, description and at least one gene");
        }
        out.sets.push_back({fields[0], fields[1], {fields.begin() + 2, fields.end()}});
    }
    return out;
}

GeneSetCollection load_gene_sets(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_gene_sets(in);
}

void write_layer_graph(std::ostream& out, const LayerGraph& layer, const GeneCatalog& catalog) {
    // Nodes without edges are written as self-loop lines so they survive a reload.
    std::vector<bool> touched(layer.num_nodes(), false);
    for (const Edge& e : layer.edges()) {
        touched[*layer.local_id(e.a)] = true;
        touched[*layer.local_id(e.b)] = true;
        out << catalog.name(e.a) << '\t' << catalog.name(e.b) << '\n';
    }
    for (std::size_t l = 0; l < layer.num_nodes(); ++l) {
        if (!touched[l]) out << catalog.name(layer.gene_of(l)) << '\t' << catalog.name(layer.gene_of(l)) << '\n';
    }
}

void write_feature_matrix(std::ostream& out, const FeatureMatrix& features, const GeneCatalog& catalog) {
    out << "gene";
    for (const auto& n : features.names) out << ',' << n;
    out << "\nomic_group";
    for (const auto& g : features.groups) out << ',' << g;
    out << '\n';
    char buf[64];
    for (std::size_t r = 0; r < features.values.rows(); ++r) {
        out << catalog.name(r);
        for (std::size_t c = 0; c < features.values.cols(); ++c) {
            const auto res = std::to_chars(buf, buf + sizeof buf, features.values(r, c));
            out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        out << '\n';
    }
}

void write_labels(std::ostream& out, const LabelSet& labels, const GeneCatalog& catalog) {
    for (const auto& [id, label] : labels.labels) {
        out << catalog.name(id) << '\t' << (label == Label::positive ? 1 : 0) << '\n';
    }
}

void write_gene_sets(std::ostream& out, const GeneSetCollection& sets) {
    for (const GeneSet& s : sets.sets) {
        out << s.name << '\t' << s.description;
        for (const auto& m : s.members) out << '\t' << m;
        out << '\n';
    }
}

MultilayerDataset perturb_features(const MultilayerDataset& dataset, FeaturePerturbation mode,
                                   std::uint64_t seed) {
    MultilayerDataset out = dataset;
    Tensor& x = out.features.values;
    if (mode == FeaturePerturbation::all_one) {
        for (double& v : x.values()) v = 1.0;
    } else {
        Rng rng(seed);
        for (double& v : x.values()) v = rng.normal();
    }
    return out;
}

MultilayerDataset remove_edges(const MultilayerDataset& dataset, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw ConfigError("remove_edges: fraction must lie in [0, 1]");
    }
    MultilayerDataset out = dataset;
    for (std::size_t i = 0; i < out.layers.size(); ++i) {
        const LayerGraph& layer = dataset.layers[i];
        const auto n_edges = layer.num_edges();
        const auto n_remove = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n_edges)));
        if (n_remove == 0) continue;
        std::vector<std::size_t> order(n_edges);
        for (std::size_t k = 0; k < n_edges; ++k) order[k] = k;
        // Partial Fisher-Yates: the first n_remove slots are a uniform sample.
        Rng rng(sub_seed(seed, i));
        for (std::size_t k = 0; k < n_remove; ++k) {
            const std::size_t j = k + rng.index(n_edges - k);
            std::swap(order[k], order[j]);
        }
        std::vector<bool> removed(n_edges, false);
        for (std::size_t k = 0; k < n_remove; ++k) removed[order[k]] = true;
        std::vector<Edge> kept;
        kept.reserve(n_edges - n_remove);
        for (std::size_t k = 0; k < n_edges; ++k) {
            if (!removed[k]) kept.push_back(layer.edges()[k]);
        }
        out.layers[i] = LayerGraph::build(layer.name(), layer.node_ids(), std::move(kept));
    }
    return out;
}

}  // namespace emgnn
