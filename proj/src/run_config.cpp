#include "emgnn/run_config.hpp"

#include <fstream>
#include <set>

#include "emgnn/error.hpp"

namespace emgnn {

std::string to_string(AblationMode m) {
    switch (m) {
        case AblationMode::none: return "none";
        case AblationMode::random_features: return "random_features";
        case AblationMode::all_one: return "all_one";
        case AblationMode::edge_removal: return "edge_removal";
    }
    return "none";
}

AblationMode ablation_mode_from_string(const std::string& s) {
    if (s == "none") return AblationMode::none;
    if (s == "random_features") return AblationMode::random_features;
    if (s == "all_one") return AblationMode::all_one;
    if (s == "edge_removal") return AblationMode::edge_removal;
    throw ConfigError("unknown ablation mode '" + s + "' (expected none, random_features, all_one or edge_removal)");
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.epochs = training.epochs;
    t.adam.lr = training.lr;
    t.positive_weight = training.positive_weight;
    t.seed = seed;
    return t;
}

namespace {

using nlohmann::json;

// Typed field access that reports the full field path on failure.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(label() + ": expected an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    const json& raw(const std::string& key) const {
        seen_.insert(key);
        return j_.at(key);
    }

    Section sub(const std::string& key) const {
        static const json empty = json::object();
        if (!has(key)) {
            seen_.insert(key);
            return Section(empty, field(key));
        }
        return Section(raw(key), field(key));
    }

    std::string str(const std::string& key, std::optional<std::string> fallback = std::nullopt) const {
        if (!has(key)) return require(key, fallback);
        const json& v = raw(key);
        if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
        return v.get<std::string>();
    }

    double num(const std::string& key, double fallback) const {
        if (!has(key)) {
            seen_.insert(key);
            return fallback;
        }
        const json& v = raw(key);
        if (!v.is_number()) throw ConfigError(field(key) + ": expected a number");
        return v.get<double>();
    }

    std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) {
            seen_.insert(key);
            return fallback;
        }
        return as_count(raw(key), field(key));
    }

    static std::uint64_t as_count(const json& v, const std::string& where) {
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            throw ConfigError(where + ": expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

    /// Rejects keys nobody asked for; catches typos in config files.
    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) throw ConfigError(field(key) + ": unknown field");
        }
    }

private:
    std::string require(const std::string& key, const std::optional<std::string>& fallback) const {
        seen_.insert(key);
        if (!fallback) throw ConfigError(field(key) + ": required field is missing");
        return *fallback;
    }
    std::string label() const { return path_.empty() ? "config" : path_; }

    const json& j_;
    std::string path_;
    mutable std::set<std::string> seen_;
};

std::filesystem::path existing_path(const Section& s, const std::string& key, const std::filesystem::path& base) {
    std::filesystem::path p = s.str(key);
    if (p.is_relative()) p = base / p;
    if (!std::filesystem::exists(p)) throw ConfigError(s.field(key) + ": file not found: " + p.string());
    return p.lexically_normal();
}

void check_range(bool ok, const std::string& where, const std::string& what) {
    if (!ok) throw ConfigError(where + ": " + what);
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir,
                           std::optional<std::uint64_t> seed_override) {
    RunConfig cfg;
    Section root(j, "");
    if (root.has("seed")) {
        cfg.seed = Section::as_count(root.raw("seed"), "seed");
    } else if (seed_override) {
        root.count("seed", 0);
    } else {
        throw ConfigError("seed: required field is missing");
    }
    if (seed_override) cfg.seed = *seed_override;

    {
        const Section data = root.sub("data");
        if (!data.has("layers")) throw ConfigError("data.layers: required field is missing");
        const json& layers = data.raw("layers");
        if (!layers.is_array() || layers.empty()) throw ConfigError("data.layers: expected a non-empty array");
        std::set<std::string> names;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const Section l(layers[i], "data.layers[" + std::to_string(i) + "]");
            LayerSource src;
            src.name = l.str("name");
            check_range(!src.name.empty(), l.field("name"), "must not be empty");
            check_range(names.insert(src.name).second, l.field("name"), "duplicate layer name '" + src.name + "'");
            src.path = existing_path(l, "path", base_dir);
            l.finish();
            cfg.data.layers.push_back(std::move(src));
        }
        cfg.data.features = existing_path(data, "features", base_dir);
        cfg.data.labels = existing_path(data, "labels", base_dir);
        if (data.has("gene_sets")) cfg.data.gene_sets = existing_path(data, "gene_sets", base_dir);
        data.finish();
    }
    {
        const Section m = root.sub("model");
        GnnConfig& g = cfg.model;
        try {
            g.arch = arch_from_string(m.str("arch", to_string(g.arch)));
        } catch (const ConfigError& e) {
            throw ConfigError(m.field("arch") + ": " + e.what());
        }
        g.encoder_layers = m.count("encoder_layers", g.encoder_layers);
        g.hidden_dim = m.count("hidden_dim", g.hidden_dim);
        g.meta_layers = m.count("meta_layers", g.meta_layers);
        g.meta_hidden_dim = m.count("meta_hidden_dim", g.meta_hidden_dim);
        g.head_hidden_dim = m.count("head_hidden_dim", g.head_hidden_dim);
        g.leaky_slope = m.num("leaky_slope", g.leaky_slope);
        m.finish();
        try {
            g.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("model: ") + e.what());
        }
    }
    {
        const Section t = root.sub("training");
        TrainingSection& tr = cfg.training;
        tr.epochs = t.count("epochs", tr.epochs);
        tr.lr = t.num("lr", tr.lr);
        tr.test_layer = t.str("test_layer", cfg.data.layers.front().name);
        tr.test_fraction = t.num("test_fraction", tr.test_fraction);
        tr.val_fraction = t.num("val_fraction", tr.val_fraction);
        tr.positive_weight = t.num("positive_weight", tr.positive_weight);
        t.finish();
        check_range(tr.epochs >= 1, t.field("epochs"), "must be >= 1");
        check_range(tr.lr > 0.0, t.field("lr"), "must be > 0");
        check_range(tr.test_fraction > 0.0 && tr.test_fraction < 1.0, t.field("test_fraction"), "must lie in (0, 1)");
        check_range(tr.val_fraction >= 0.0 && tr.val_fraction < 1.0, t.field("val_fraction"), "must lie in [0, 1)");
        check_range(tr.positive_weight > 0.0, t.field("positive_weight"), "must be > 0");
        bool known = false;
        for (const auto& l : cfg.data.layers) known = known || l.name == tr.test_layer;
        check_range(known, t.field("test_layer"), "no layer named '" + tr.test_layer + "'");
    }
    {
        const Section e = root.sub("explain");
        ExplainSection& ex = cfg.explain;
        ex.steps = e.count("steps", ex.steps);
        check_range(ex.steps >= 1, e.field("steps"), "must be >= 1");
        try {
            ex.edge_variant = edge_variant_from_string(e.str("edge_variant", to_string(ex.edge_variant)));
        } catch (const ConfigError& err) {
            throw ConfigError(e.field("edge_variant") + ": " + err.what());
        }
        ex.top_neighbors = e.count("top_neighbors", ex.top_neighbors);
        if (e.has("genes")) {
            const json& genes = e.raw("genes");
            if (!genes.is_array()) throw ConfigError(e.field("genes") + ": expected an array of gene names");
            for (const auto& g : genes) {
                if (!g.is_string()) throw ConfigError(e.field("genes") + ": expected an array of gene names");
                ex.genes.push_back(g.get<std::string>());
            }
        }
        e.finish();
    }
    {
        const Section d = root.sub("discover");
        cfg.discover.precision_target = d.num("precision_target", cfg.discover.precision_target);
        check_range(cfg.discover.precision_target > 0.0 && cfg.discover.precision_target <= 1.0,
                    d.field("precision_target"), "must lie in (0, 1]");
        if (d.has("threshold")) {
            const double t = d.num("threshold", 0.0);
            check_range(t >= 0.0 && t <= 1.0, d.field("threshold"), "must lie in [0, 1]");
            cfg.discover.threshold = t;
        }
        d.finish();
    }
    {
        const Section g = root.sub("gsea");
        cfg.gsea.permutations = g.count("permutations", cfg.gsea.permutations);
        cfg.gsea.weight = g.num("weight", cfg.gsea.weight);
        check_range(cfg.gsea.weight >= 0.0, g.field("weight"), "must be >= 0");
        g.finish();
    }
    {
        const Section a = root.sub("ablation");
        AblationSection& ab = cfg.ablation;
        if (a.has("modes")) {
            const json& modes = a.raw("modes");
            if (!modes.is_array() || modes.empty()) throw ConfigError(a.field("modes") + ": expected a non-empty array");
            ab.modes.clear();
            for (const auto& m : modes) {
                if (!m.is_string()) throw ConfigError(a.field("modes") + ": expected mode names");
                try {
                    ab.modes.push_back(ablation_mode_from_string(m.get<std::string>()));
                } catch (const ConfigError& err) {
                    throw ConfigError(a.field("modes") + ": " + err.what());
                }
            }
        }
        ab.fraction = a.num("fraction", ab.fraction);
        check_range(ab.fraction >= 0.0 && ab.fraction <= 1.0, a.field("fraction"), "must lie in [0, 1]");
        if (a.has("seeds")) {
            const json& seeds = a.raw("seeds");
            if (!seeds.is_array() || seeds.empty()) throw ConfigError(a.field("seeds") + ": expected a non-empty array");
            ab.seeds.clear();
            for (std::size_t i = 0; i < seeds.size(); ++i) {
                ab.seeds.push_back(Section::as_count(seeds[i], a.field("seeds") + "[" + std::to_string(i) + "]"));
            }
        }
        a.finish();
    }
    if (root.has("output_dir")) {
        std::filesystem::path out = root.str("output_dir");
        cfg.output_dir = out.is_relative() ? base_dir / out : out;
    } else {
        cfg.output_dir = base_dir / cfg.output_dir;
    }
    // Generator parameters written by `synth` are informational only.
    if (root.has("synth")) root.raw("synth");
    root.finish();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    return parse_run_config(j, base, seed_override);
}

nlohmann::json to_json(const RunConfig& cfg) {
    using nlohmann::json;
    json layers = json::array();
    for (const auto& l : cfg.data.layers) layers.push_back({{"name", l.name}, {"path", l.path.string()}});
    json data = {{"layers", layers}, {"features", cfg.data.features.string()}, {"labels", cfg.data.labels.string()}};
    if (cfg.data.gene_sets) data["gene_sets"] = cfg.data.gene_sets->string();
    json modes = json::array();
    for (auto m : cfg.ablation.modes) modes.push_back(to_string(m));
    json discover = {{"precision_target", cfg.discover.precision_target}};
    if (cfg.discover.threshold) discover["threshold"] = *cfg.discover.threshold;
    return {
        {"seed", cfg.seed},
        {"data", data},
        {"model",
         {{"arch", to_string(cfg.model.arch)},
          {"encoder_layers", cfg.model.encoder_layers},
          {"hidden_dim", cfg.model.hidden_dim},
          {"meta_layers", cfg.model.meta_layers},
          {"meta_hidden_dim", cfg.model.meta_hidden_dim},
          {"head_hidden_dim", cfg.model.head_hidden_dim},
          {"leaky_slope", cfg.model.leaky_slope}}},
        {"training",
         {{"epochs", cfg.training.epochs},
          {"lr", cfg.training.lr},
          {"test_layer", cfg.training.test_layer},
          {"test_fraction", cfg.training.test_fraction},
          {"val_fraction", cfg.training.val_fraction},
          {"positive_weight", cfg.training.positive_weight}}},
        {"explain",
         {{"steps", cfg.explain.steps},
          {"edge_variant", to_string(cfg.explain.edge_variant)},
          {"top_neighbors", cfg.explain.top_neighbors},
          {"genes", cfg.explain.genes}}},
        {"discover", discover},
        {"gsea", {{"permutations", cfg.gsea.permutations}, {"weight", cfg.gsea.weight}}},
        {"ablation", {{"modes", modes}, {"fraction", cfg.ablation.fraction}, {"seeds", cfg.ablation.seeds}}},
        {"output_dir", cfg.output_dir.string()},
    };
}

LoadedDataset load_dataset(const RunConfig& cfg) {
    LoadedDataset out;
    MultilayerDataset& ds = out.dataset;
    for (const auto& l : cfg.data.layers) ds.layers.push_back(load_layer_graph(l.path, ds.catalog, l.name));
    FeatureLoadResult f = load_feature_matrix(cfg.data.features, ds.catalog);
    ds.features = std::move(f.features);
    out.missing_feature_genes = f.missing_genes;
    out.unknown_feature_genes = f.unknown_genes;
    ds.labels = load_labels(cfg.data.labels, ds.catalog);
    if (cfg.data.gene_sets) out.gene_sets = load_gene_sets(*cfg.data.gene_sets);
    ds.validate();
    return out;
}

}  // namespace emgnn
