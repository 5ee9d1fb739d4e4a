#include "emgnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "emgnn/error.hpp"
#include "emgnn/rng.hpp"

namespace emgnn {

std::string to_string(SynthVariant v) { return v == SynthVariant::standard ? "standard" : "complementary"; }

SynthVariant synth_variant_from_string(const std::string& s) {
    if (s == "standard") return SynthVariant::standard;
    if (s == "complementary") return SynthVariant::complementary;
    throw ConfigError("unknown synthetic variant '" + s + "' (expected standard or complementary)");
}

namespace {

constexpr const char* kOmicGroups[] = {"MF", "CNA", "METH", "GE"};

// Erdos-Renyi graph over `members` with the given expected degree.
void add_pool_edges(const std::vector<std::size_t>& members, double degree, Rng& rng, std::vector<Edge>& edges) {
    if (members.size() < 2) return;
    const double p = std::min(1.0, degree / static_cast<double>(members.size() - 1));
    for (std::size_t i = 0; i < members.size(); ++i) {
        for (std::size_t j = i + 1; j < members.size(); ++j) {
            if (rng.uniform() < p) edges.push_back({members[i], members[j]});
        }
    }
}

std::string gene_name(std::size_t i, std::size_t n) {
    const std::size_t width = std::to_string(n).size();
    std::string digits = std::to_string(i);
    return "G" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

}  // namespace

SynthDataset make_synthetic(const SynthSpec& spec) {
    if (spec.n_genes < 8) throw ConfigError("synth: at least 8 genes are required");
    if (spec.n_layers < 1) throw ConfigError("synth: at least one layer is required");
    if (spec.n_features < 1 || spec.informative_features > spec.n_features) {
        throw ConfigError("synth: informative features must not exceed the feature count");
    }
    if (!(spec.within_degree >= 0.0) || !(spec.background_degree >= 0.0)) {
        throw ConfigError("synth: degrees must be >= 0");
    }
    if (!(spec.positive_fraction > 0.0 && spec.positive_fraction < 1.0) ||
        !(spec.labeled_fraction > 0.0 && spec.labeled_fraction <= 1.0) ||
        !(spec.layer_coverage > 0.0 && spec.layer_coverage <= 1.0)) {
        throw ConfigError("synth: fractions must lie in (0, 1]");
    }
    const std::size_t n = spec.n_genes;
    SynthDataset out;
    MultilayerDataset& ds = out.dataset;
    for (std::size_t i = 0; i < n; ++i) ds.catalog.intern(gene_name(i, n));

    // Class assignment and positive groups.
    Rng class_rng(sub_seed(spec.seed, 1000));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    class_rng.shuffle(std::span<std::size_t>(order));
    const auto n_pos = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(spec.positive_fraction * static_cast<double>(n))));
    out.truth.assign(n, 0);
    out.group.assign(n, 0);
    std::vector<std::size_t> positives(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_pos));
    std::sort(positives.begin(), positives.end());
    for (std::size_t r = 0; r < positives.size(); ++r) {
        out.truth[positives[r]] = 1;
        out.group[positives[r]] = spec.variant == SynthVariant::complementary ? r % spec.n_layers : 0;
    }

    // Labels: a random subset of genes is labeled.
    Rng label_rng(sub_seed(spec.seed, 2000));
    for (std::size_t i = 0; i < n; ++i) {
        if (label_rng.uniform() < spec.labeled_fraction) {
            ds.labels.labels.emplace(i, out.truth[i] == 1 ? Label::positive : Label::negative);
        }
    }

    // Layers.
    for (std::size_t layer = 0; layer < spec.n_layers; ++layer) {
        Rng rng(sub_seed(spec.seed, layer));
        std::vector<std::size_t> present;
        for (std::size_t i = 0; i < n; ++i) {
            if (spec.layer_coverage >= 1.0 || rng.uniform() < spec.layer_coverage) present.push_back(i);
        }
        std::vector<std::size_t> pure, mixed;
        for (std::size_t i : present) {
            const bool planted = spec.signal > 0.0 && out.truth[i] == 1 &&
                                 (spec.variant == SynthVariant::standard || out.group[i] == layer);
            (planted ? pure : mixed).push_back(i);
        }
        std::vector<Edge> edges;
        add_pool_edges(pure, spec.within_degree, rng, edges);
        add_pool_edges(mixed, spec.within_degree, rng, edges);
        const auto n_background =
            static_cast<std::size_t>(std::llround(spec.background_degree * static_cast<double>(present.size()) / 2.0));
        for (std::size_t e = 0; e < n_background && present.size() > 1; ++e) {
            const std::size_t a = present[rng.index(present.size())];
            const std::size_t b = present[rng.index(present.size())];
            edges.push_back({a, b});
        }
        ds.layers.push_back(LayerGraph::build("layer_" + std::to_string(layer), present, std::move(edges)));
    }

    // Features: standard normal noise plus a planted shift for positives.
    Rng feat_rng(sub_seed(spec.seed, 3000));
    FeatureMatrix& fm = ds.features;
    fm.values = Tensor(n, spec.n_features);
    for (std::size_t f = 0; f < spec.n_features; ++f) {
        const char* group = kOmicGroups[f % 4];
        fm.names.push_back(std::string(group) + "_" + std::to_string(f / 4));
        fm.groups.emplace_back(group);
    }
    const double shift = spec.signal * spec.feature_shift;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < spec.n_features; ++f) {
            double v = feat_rng.normal();
            if (out.truth[i] == 1 && f < spec.informative_features) v += shift;
            fm.values(i, f) = v;
        }
    }

    // Gene sets: planted positives plus random controls.
    Rng set_rng(sub_seed(spec.seed, 4000));
    auto names_of = [&](const std::vector<std::size_t>& ids) {
        std::vector<std::string> names;
        for (std::size_t id : ids) names.push_back(ds.catalog.name(id));
        return names;
    };
    const std::size_t set_size = std::max<std::size_t>(5, std::min<std::size_t>(25, n_pos / 2));
    {
        std::vector<std::size_t> pick = positives;
        set_rng.shuffle(std::span<std::size_t>(pick));
        pick.resize(std::min(pick.size(), set_size));
        std::sort(pick.begin(), pick.end());
        out.gene_sets.sets.push_back({"PLANTED_POSITIVES", "random subset of planted positives", names_of(pick)});
    }
    for (std::size_t k = 0; k < 8; ++k) {
        std::vector<std::size_t> pick(order.begin(), order.end());
        set_rng.shuffle(std::span<std::size_t>(pick));
        pick.resize(std::min(pick.size(), set_size));
        std::sort(pick.begin(), pick.end());
        out.gene_sets.sets.push_back({"RANDOM_" + std::to_string(k), "uniform random genes", names_of(pick)});
    }
    ds.validate();
    return out;
}

void write_synthetic(const SynthDataset& synth, const SynthSpec& spec, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const MultilayerDataset& ds = synth.dataset;
    auto open = [&](const std::string& name) {
        std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot write " + (dir / name).string());
        return f;
    };
    nlohmann::json layers = nlohmann::json::array();
    for (const LayerGraph& layer : ds.layers) {
        const std::string file = layer.name() + ".tsv";
        auto f = open(file);
        f << "# synthetic layer " << layer.name() << '\n';
        write_layer_graph(f, layer, ds.catalog);
        layers.push_back({{"name", layer.name()}, {"path", file}});
    }
    {
        auto f = open("features.csv");
        write_feature_matrix(f, ds.features, ds.catalog);
    }
    {
        auto f = open("labels.tsv");
        write_labels(f, ds.labels, ds.catalog);
    }
    {
        auto f = open("truth.tsv");
        for (std::size_t i = 0; i < ds.num_genes(); ++i) {
            f << ds.catalog.name(i) << '\t' << synth.truth[i] << '\t' << (ds.labels.find(i) ? "labeled" : "unlabeled")
              << '\n';
        }
    }
    {
        auto f = open("gene_sets.gmt");
        write_gene_sets(f, synth.gene_sets);
    }
    // Explain two unlabeled planted positives by default.
    std::vector<std::string> explain_genes;
    for (std::size_t i = 0; i < ds.num_genes() && explain_genes.size() < 2; ++i) {
        if (synth.truth[i] == 1 && !ds.labels.find(i)) explain_genes.push_back(ds.catalog.name(i));
    }
    const nlohmann::json config = {
        {"seed", spec.seed},
        {"data",
         {{"layers", layers},
          {"features", "features.csv"},
          {"labels", "labels.tsv"},
          {"gene_sets", "gene_sets.gmt"}}},
        {"synth",
         {{"n_genes", spec.n_genes},
          {"n_layers", spec.n_layers},
          {"n_features", spec.n_features},
          {"signal", spec.signal},
          {"variant", to_string(spec.variant)}}},
        // Compact model: enough for the planted task and quick on a laptop.
        {"model", {{"hidden_dim", 16}, {"meta_hidden_dim", 16}, {"head_hidden_dim", 16}}},
        {"training", {{"epochs", 300}, {"lr", 0.01}, {"test_layer", ds.layers.front().name()}}},
        {"explain", {{"genes", explain_genes}}},
        {"output_dir", "out"},
    };
    auto f = open("config.json");
    f << config.dump(2) << '\n';
}

}  // namespace emgnn
