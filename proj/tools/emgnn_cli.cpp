// emgnn command-line front end.
//
//   emgnn --config run.json train
//   emgnn --config run.json explain --genes TP53,KRAS
//   emgnn --seed 7 --out toy synth --n-genes 200
//
// Every command writes under --out (or output_dir from the config) and echoes
// the resolved configuration as effective_config.json. Timestamps go to
// run.log only, so every other output is a pure function of the inputs.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emgnn/analysis.hpp"
#include "emgnn/checkpoint.hpp"
#include "emgnn/error.hpp"
#include "emgnn/explain.hpp"
#include "emgnn/kernels.hpp"
#include "emgnn/run_config.hpp"
#include "emgnn/synth.hpp"
#include "emgnn/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace emgnn;

namespace {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };
Level g_level = Level::info;
std::ofstream g_runlog;

std::string timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", std::localtime(&t));
    return buf;
}

void log(Level level, const std::string& msg) {
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (g_runlog.is_open()) g_runlog << timestamp() << ' ' << names[static_cast<int>(level)] << ' ' << msg << '\n';
    if (level <= g_level) std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << '\n';
}

Level level_from_string(const std::string& s) {
    if (s == "error") return Level::error;
    if (s == "warn") return Level::warn;
    if (s == "info") return Level::info;
    if (s == "debug") return Level::debug;
    throw ConfigError("--log-level: expected error, warn, info or debug");
}

std::string fmt(double v, int digits = 6) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
json optional_or_null(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::ofstream open_out(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path.string());
    return f;
}

void write_json(const fs::path& path, const json& j) {
    auto f = open_out(path);
    f << j.dump(2) << '\n';
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::size_t resolve_gene(const GeneCatalog& catalog, const std::string& name) {
    if (auto id = catalog.find(name)) return *id;
    std::vector<std::pair<std::size_t, std::string>> near;
    for (const auto& n : catalog.names()) near.emplace_back(levenshtein(name, n), n);
    std::sort(near.begin(), near.end());
    std::string msg = "unknown gene '" + name + "'";
    if (!near.empty()) {
        msg += "; nearest matches:";
        for (std::size_t i = 0; i < std::min<std::size_t>(3, near.size()); ++i) msg += " " + near[i].second;
    }
    throw DataError(msg);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int threads = 1;
    std::string log_level = "info";
};

// Shared state of a config-driven command.
struct Run {
    RunConfig cfg;
    fs::path out;
    LoadedDataset data;
};

Run start_run(const Globals& g, const std::string& command, bool echo = true) {
    if (g.config.empty()) throw ConfigError("--config: required for '" + command + "'");
    Run run;
    run.cfg = load_run_config(g.config, g.seed);
    run.out = g.out.empty() ? run.cfg.output_dir : fs::path(g.out);
    run.cfg.output_dir = run.out;
    fs::create_directories(run.out);
    g_runlog.open(run.out / "run.log", std::ios::app);
    log(Level::info, command + ": config " + g.config + ", seed " + std::to_string(run.cfg.seed));
    if (echo) write_json(run.out / "effective_config.json", to_json(run.cfg));
    run.data = load_dataset(run.cfg);
    const auto& ds = run.data.dataset;
    log(Level::info, "dataset: " + std::to_string(ds.num_genes()) + " genes, " + std::to_string(ds.layers.size()) +
                         " layers, " + std::to_string(ds.num_features()) + " features, " +
                         std::to_string(ds.labels.labels.size()) + " labels");
    if (run.data.unknown_feature_genes > 0) {
        log(Level::warn, std::to_string(run.data.unknown_feature_genes) + " feature rows name genes outside every layer");
    }
    if (run.data.missing_feature_genes > 0) {
        log(Level::warn, std::to_string(run.data.missing_feature_genes) + " genes have no feature row (zeros used)");
    }
    return run;
}

SplitSpec make_split(const Run& run) {
    const auto& t = run.cfg.training;
    return stratified_split(run.data.dataset.labels, run.data.dataset, t.test_layer, t.test_fraction, t.val_fraction,
                            run.cfg.seed);
}

fs::path checkpoint_path(const Run& run, const std::string& flag) {
    return flag.empty() ? run.out / "checkpoint.emgnn" : fs::path(flag);
}

Checkpoint load_compatible(const Run& run, const fs::path& path) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.input_dim != run.data.dataset.num_features()) {
        throw ConfigError("checkpoint " + path.string() + " expects " + std::to_string(ck.input_dim) +
                          " input features but the dataset has " + std::to_string(run.data.dataset.num_features()));
    }
    if (!(ck.config == run.cfg.model)) {
        throw ConfigError("checkpoint " + path.string() + " was trained with a different model section");
    }
    return ck;
}

int cmd_ingest(const Globals& g) {
    Run run = start_run(g, "ingest");
    const auto& ds = run.data.dataset;
    json layers = json::array();
    for (const auto& l : ds.layers) {
        layers.push_back({{"name", l.name()}, {"nodes", l.num_nodes()}, {"edges", l.num_edges()}});
    }
    json groups = json::object();
    for (const auto& grp : ds.features.groups) groups[grp] = groups.value(grp, 0) + 1;
    const json summary = {
        {"genes", ds.num_genes()},
        {"layers", layers},
        {"features", {{"count", ds.num_features()}, {"groups", groups}}},
        {"missing_feature_genes", run.data.missing_feature_genes},
        {"unknown_feature_genes", run.data.unknown_feature_genes},
        {"labels",
         {{"positive", ds.labels.count(Label::positive)},
          {"negative", ds.labels.count(Label::negative)},
          {"unlabeled", ds.num_genes() - ds.labels.labels.size()}}},
        {"gene_sets", run.data.gene_sets.sets.size()},
    };
    write_json(run.out / "ingest_summary.json", summary);
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int cmd_train(const Globals& g) {
    Run run = start_run(g, "train");
    const SplitSpec split = make_split(run);
    write_json(run.out / "split.json", to_json(split, run.data.dataset.catalog));
    log(Level::info, "split: " + std::to_string(split.train_ids.size()) + " train, " +
                         std::to_string(split.val_ids.size()) + " validation, " +
                         std::to_string(split.test_ids.size()) + " test");
    const std::size_t every = std::max<std::size_t>(1, run.cfg.training.epochs / 10);
    const TrainResult result =
        train(run.cfg.model, run.cfg.train_config(), run.data.dataset, split,
              [&](std::size_t epoch, std::span<const std::size_t>, double loss) {
                  if (epoch % every == 0) log(Level::debug, "epoch " + std::to_string(epoch) + " loss " + fmt(loss));
              });
    save_checkpoint(result.params, run.cfg.model, run.cfg.seed, run.out / "checkpoint.emgnn");
    write_json(run.out / "train_report.json", to_json(result.report));
    log(Level::info, "best epoch " + std::to_string(result.report.best_epoch) + ", test AUPRC " +
                         fmt(result.report.test_auprc) + ", wall " + fmt(result.report.wall_seconds, 4) + " s");
    std::cout << "test AUPRC " << fmt(result.report.test_auprc) << '\n';
    return 0;
}

int cmd_evaluate(const Globals& g, const std::string& ckpt_flag) {
    Run run = start_run(g, "evaluate");
    const auto& ds = run.data.dataset;
    const Checkpoint ck = load_compatible(run, checkpoint_path(run, ckpt_flag));
    const SplitSpec split = make_split(run);
    const PreparedGraphs graphs = prepare_graphs(ds);
    const std::vector<double> logits = forward_logits(ck.params, ck.config, graphs, ds.features.values);

    std::vector<std::string> role(ds.num_genes(), "unlabeled");
    for (auto id : split.train_ids) role[id] = "train";
    for (auto id : split.val_ids) role[id] = "validation";
    for (auto id : split.test_ids) role[id] = "test";
    for (std::size_t i = 0; i < ds.num_genes(); ++i) {
        if (role[i] == "unlabeled" && ds.labels.find(i)) role[i] = "labeled_unused";
    }
    auto set_auprc = [&](const std::vector<std::size_t>& ids) -> json {
        std::vector<double> s;
        std::vector<int> y;
        for (auto id : ids) {
            s.push_back(logits[id]);
            y.push_back(ds.labels.find(id) == Label::positive ? 1 : 0);
        }
        if (std::find(y.begin(), y.end(), 1) == y.end()) return nullptr;
        return auprc(s, y, ids);
    };
    const json report = {
        {"checkpoint", checkpoint_path(run, ckpt_flag).filename().string()},
        {"test_auprc", set_auprc(split.test_ids)},
        {"validation_auprc", set_auprc(split.val_ids)},
        {"train_auprc", set_auprc(split.train_ids)},
        {"test_size", split.test_ids.size()},
        {"prevalence_test",
         split.test_ids.empty() ? json(nullptr)
                                : json(static_cast<double>(std::count_if(split.test_ids.begin(), split.test_ids.end(),
                                                                         [&](std::size_t id) {
                                                                             return ds.labels.find(id) == Label::positive;
                                                                         })) /
                                       static_cast<double>(split.test_ids.size()))},
    };
    write_json(run.out / "evaluation.json", report);
    auto f = open_out(run.out / "predictions.csv");
    f << "gene,probability,logit,label,split\n";
    for (std::size_t i = 0; i < ds.num_genes(); ++i) {
        const auto lab = ds.labels.find(i);
        f << ds.catalog.name(i) << ',' << fmt(sigmoid(logits[i]), 10) << ',' << fmt(logits[i], 10) << ','
          << (lab ? (*lab == Label::positive ? "1" : "0") : "NA") << ',' << role[i] << '\n';
    }
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_explain(const Globals& g, const std::string& ckpt_flag, const std::string& genes_flag,
                std::optional<std::size_t> steps_flag, const std::string& variant_flag) {
    Run run = start_run(g, "explain");
    const auto& ds = run.data.dataset;
    const Checkpoint ck = load_compatible(run, checkpoint_path(run, ckpt_flag));
    std::vector<std::string> names = genes_flag.empty() ? run.cfg.explain.genes : split_list(genes_flag);
    if (names.empty()) throw ConfigError("explain.genes: no genes requested (set it or pass --genes)");
    std::vector<std::size_t> ids;
    for (const auto& n : names) ids.push_back(resolve_gene(ds.catalog, n));
    const std::size_t steps = steps_flag.value_or(run.cfg.explain.steps);
    if (steps == 0) throw ConfigError("--steps: must be >= 1");
    const EdgeIgVariant variant =
        variant_flag.empty() ? run.cfg.explain.edge_variant : edge_variant_from_string(variant_flag);

    const PreparedGraphs graphs = prepare_graphs(ds);
    auto fractions = open_out(run.out / "explain" / "neighbor_fractions.csv");
    fractions << "gene,layer,cancer_neighbor_fraction,meta_edge_attribution\n";
    auto variability = open_out(run.out / "explain" / "meta_edge_variability.csv");
    variability << "gene,valid_layers,stddev,correlation\n";

    for (std::size_t gi = 0; gi < ids.size(); ++gi) {
        const std::size_t gene = ids[gi];
        log(Level::info, "explaining " + names[gi]);
        const AttributionMatrix attr = ig_node_features(ck.params, ck.config, graphs, ds.features.values, gene, steps);
        const MetaEdgeAttribution edges = ig_meta_edges(ck.params, ck.config, graphs, ds.features.values, gene, steps,
                                                        variant);

        json feature_row = json::array();
        std::map<std::string, double> by_group;
        const auto row = attr.meta_row();
        for (std::size_t f = 0; f < row.size(); ++f) {
            feature_row.push_back(
                {{"feature", ds.features.names[f]}, {"omic_group", ds.features.groups[f]}, {"attribution", row[f]}});
            by_group[ds.features.groups[f]] += row[f];
        }
        json groups = json::array();
        for (const auto& [grp, v] : by_group) groups.push_back({{"omic_group", grp}, {"attribution", v}});

        std::vector<std::optional<double>> attr_per_layer(ds.layers.size()), frac_per_layer(ds.layers.size());
        json layers = json::array();
        const auto display = edges.display();
        for (std::size_t k = 0; k < edges.layers.size(); ++k) {
            const std::size_t l = edges.layers[k];
            attr_per_layer[l] = edges.normalized[k];
            frac_per_layer[l] = cancer_neighbor_fraction(ds, gene, l);
            layers.push_back({{"layer", ds.layers[l].name()},
                              {"raw", edges.raw[k]},
                              {"normalized", edges.normalized[k]},
                              {"display", display[k]},
                              {"cancer_neighbor_fraction", optional_or_null(frac_per_layer[l])}});
        }
        for (std::size_t l = 0; l < ds.layers.size(); ++l) {
            if (!attr_per_layer[l]) frac_per_layer[l] = cancer_neighbor_fraction(ds, gene, l);
            fractions << names[gi] << ',' << ds.layers[l].name() << ','
                      << (frac_per_layer[l] ? fmt(*frac_per_layer[l], 10) : "NA") << ','
                      << (attr_per_layer[l] ? fmt(*attr_per_layer[l], 10) : "NA") << '\n';
        }
        const Variability var = meta_edge_variability(attr_per_layer, frac_per_layer);
        variability << names[gi] << ',' << var.valid_layers << ','
                    << (var.stddev ? fmt(*var.stddev, 10) : "NA") << ','
                    << (var.correlation ? fmt(*var.correlation, 10) : "NA") << '\n';

        json neighbors = json::array();
        const auto ranked = neighbor_importance(attr);
        for (std::size_t k = 0; k < std::min(ranked.size(), run.cfg.explain.top_neighbors); ++k) {
            neighbors.push_back({{"gene", ds.catalog.name(ranked[k].first)}, {"importance", ranked[k].second}});
        }
        const json out = {
            {"gene", names[gi]},
            {"steps", steps},
            {"baseline", attr.baseline},
            {"logit", attr.logit},
            {"probability", sigmoid(attr.logit)},
            {"baseline_logit", attr.baseline_logit},
            {"attribution_total", attr.total()},
            {"completeness_gap", attr.total() - (attr.logit - attr.baseline_logit)},
            {"meta_node_features", feature_row},
            {"omic_groups", groups},
            {"meta_edges",
             {{"variant", to_string(edges.variant)}, {"empty", edges.empty}, {"layers", layers}}},
            {"variability",
             {{"valid_layers", var.valid_layers},
              {"stddev", optional_or_null(var.stddev)},
              {"correlation", optional_or_null(var.correlation)}}},
            {"top_neighbors", neighbors},
        };
        write_json(run.out / "explain" / (names[gi] + ".json"), out);
    }
    std::cout << "explained " << ids.size() << " genes into " << (run.out / "explain").string() << '\n';
    return 0;
}

void write_ranked(const fs::path& path, const RankedGeneList& list, double threshold, bool overridden) {
    auto f = open_out(path);
    f << "# threshold " << fmt(threshold, 10) << (overridden ? " (override)" : " (selected)") << '\n';
    f << "rank,gene,probability\n";
    for (std::size_t i = 0; i < list.entries.size(); ++i) {
        f << i + 1 << ',' << list.entries[i].gene << ',' << fmt(list.entries[i].score, 10) << '\n';
    }
}

int cmd_discover(const Globals& g, const std::string& ckpt_flag, std::optional<double> threshold_flag,
                 std::optional<double> target_flag) {
    Run run = start_run(g, "discover");
    const auto& ds = run.data.dataset;
    const Checkpoint ck = load_compatible(run, checkpoint_path(run, ckpt_flag));
    std::vector<double> probs = forward_logits(ck.params, ck.config, prepare_graphs(ds), ds.features.values);
    for (double& p : probs) p = sigmoid(p);

    std::optional<double> threshold = threshold_flag ? threshold_flag : run.cfg.discover.threshold;
    const bool overridden = threshold.has_value();
    if (!threshold) {
        const double target = target_flag.value_or(run.cfg.discover.precision_target);
        std::vector<double> s;
        std::vector<int> y;
        for (const auto& [id, lab] : ds.labels.labels) {
            s.push_back(probs[id]);
            y.push_back(lab == Label::positive ? 1 : 0);
        }
        threshold = select_threshold(s, y, target);
        log(Level::info, "threshold " + fmt(*threshold, 10) + " reaches precision " +
                             fmt(precision_at(s, y, *threshold)) + " on labeled genes (target " + fmt(target) + ")");
    }
    const DiscoveryResult res = discover_candidates(probs, ds, *threshold);
    write_ranked(run.out / "candidates.csv", res.candidates, *threshold, overridden);
    write_ranked(run.out / "all_unlabeled.csv", res.all, *threshold, overridden);
    std::cout << res.candidates.size() << " candidates at threshold " << fmt(*threshold, 10) << '\n';
    return 0;
}

// Reads "gene" plus a score column ("probability" or "score") from a CSV;
// '#' lines are comments.
RankedGeneList read_ranked_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open ranked list " + path.string());
    std::string line;
    std::vector<std::string> header;
    std::size_t gene_col = 0, score_col = 0, lineno = 0;
    RankedGeneList out;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        if (header.empty()) {
            header = cells;
            auto find = [&](std::initializer_list<const char*> keys) -> std::optional<std::size_t> {
                for (const char* k : keys) {
                    auto it = std::find(header.begin(), header.end(), k);
                    if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
                }
                return std::nullopt;
            };
            const auto gc = find({"gene"});
            const auto sc = find({"probability", "score"});
            if (!gc || !sc) throw DataError(path.string() + ": header needs 'gene' and 'probability' or 'score'");
            gene_col = *gc;
            score_col = *sc;
            continue;
        }
        if (cells.size() <= std::max(gene_col, score_col)) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": too few columns");
        }
        double v = 0.0;
        try {
            std::size_t used = 0;
            v = std::stod(cells[score_col], &used);
            if (used != cells[score_col].size() || !std::isfinite(v)) throw std::invalid_argument("score");
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad score '" + cells[score_col] + "'");
        }
        out.entries.push_back({cells[gene_col], v});
    }
    std::stable_sort(out.entries.begin(), out.entries.end(),
                     [](const RankedGene& a, const RankedGene& b) { return a.score > b.score; });
    return out;
}

int cmd_gsea(const Globals& g, const std::string& ranked_flag, const std::string& sets_flag,
             std::optional<std::size_t> perms_flag, std::optional<double> weight_flag) {
    std::optional<Run> run;
    fs::path out = g.out;
    std::uint64_t seed = g.seed.value_or(0);
    std::size_t perms = perms_flag.value_or(1000);
    double weight = weight_flag.value_or(1.0);
    std::optional<fs::path> sets_path;
    if (!sets_flag.empty()) sets_path = sets_flag;
    if (!g.config.empty()) {
        run = start_run(g, "gsea");
        out = run->out;
        seed = run->cfg.seed;
        perms = perms_flag.value_or(run->cfg.gsea.permutations);
        weight = weight_flag.value_or(run->cfg.gsea.weight);
        if (!sets_path) sets_path = run->cfg.data.gene_sets;
    } else {
        if (!g.seed) throw ConfigError("--seed: required when gsea runs without --config");
        if (out.empty()) out = "out";
        fs::create_directories(out);
        g_runlog.open(out / "run.log", std::ios::app);
        write_json(out / "effective_config.json",
                   {{"seed", seed}, {"gsea", {{"permutations", perms}, {"weight", weight}}}});
    }
    if (!sets_path) throw ConfigError("data.gene_sets: no gene set file (set it or pass --gene-sets)");
    const fs::path ranked_path = ranked_flag.empty() ? out / "all_unlabeled.csv" : fs::path(ranked_flag);
    const RankedGeneList ranked = read_ranked_csv(ranked_path);
    const GeneSetCollection sets = load_gene_sets(*sets_path);
    const GseaResult res = gsea_prerank(ranked, sets, perms, weight, seed);
    if (res.results.empty()) throw DataError("gsea: no gene set has a member in the ranked list");
    for (const auto& name : res.skipped) log(Level::warn, "gene set " + name + " has no member in the ranked list");

    std::vector<std::size_t> order(res.results.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = res.results[a];
        const auto& rb = res.results[b];
        const double fa = ra.fdr.value_or(1.0), fb = rb.fdr.value_or(1.0);
        if (fa != fb) return fa < fb;
        return std::abs(ra.es) > std::abs(rb.es);
    });
    auto f = open_out(out / "enrichment.csv");
    f << "set,size,hits,es,p_value,fdr,leading_edge\n";
    const std::string floor = perms > 0 ? "<1/" + std::to_string(perms) : "NA";
    for (std::size_t i : order) {
        const auto& r = res.results[i];
        f << r.set_name << ',' << r.set_size << ',' << r.hits << ',' << fmt(r.es, 10) << ','
          << (!r.p_value ? "NA" : (r.p_below_resolution ? floor : fmt(*r.p_value, 10))) << ','
          << (r.fdr ? fmt(*r.fdr, 10) : "NA") << ',' << r.leading_edge << '\n';
    }
    std::cout << res.results.size() << " gene sets scored into " << (out / "enrichment.csv").string() << '\n';
    return 0;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return std::nan("");
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

int cmd_ablate(const Globals& g, const std::string& modes_flag, std::optional<double> fraction_flag,
               const std::string& seeds_flag) {
    Run run = start_run(g, "ablate", false);
    if (!modes_flag.empty()) {
        run.cfg.ablation.modes.clear();
        for (const auto& m : split_list(modes_flag)) run.cfg.ablation.modes.push_back(ablation_mode_from_string(m));
    }
    if (fraction_flag) {
        if (!(*fraction_flag >= 0.0 && *fraction_flag <= 1.0)) throw ConfigError("--fraction: must lie in [0, 1]");
        run.cfg.ablation.fraction = *fraction_flag;
    }
    if (!seeds_flag.empty()) {
        run.cfg.ablation.seeds.clear();
        for (const auto& s : split_list(seeds_flag)) {
            try {
                run.cfg.ablation.seeds.push_back(std::stoull(s));
            } catch (const std::exception&) {
                throw ConfigError("--seeds: bad seed '" + s + "'");
            }
        }
    }
    write_json(run.out / "effective_config.json", to_json(run.cfg));
    const auto& ds = run.data.dataset;
    const SplitSpec split = make_split(run);
    const auto& ab = run.cfg.ablation;

    auto run_one = [&](AblationMode mode, std::uint64_t seed) {
        TrainConfig t = run.cfg.train_config();
        t.seed = seed;
        switch (mode) {
            case AblationMode::none: return train(run.cfg.model, t, ds, split).report.test_auprc;
            case AblationMode::random_features:
                return train(run.cfg.model, t, perturb_features(ds, FeaturePerturbation::random, seed), split)
                    .report.test_auprc;
            case AblationMode::all_one:
                return train(run.cfg.model, t, perturb_features(ds, FeaturePerturbation::all_one, seed), split)
                    .report.test_auprc;
            case AblationMode::edge_removal:
                return train(run.cfg.model, t, remove_edges(ds, ab.fraction, seed), split).report.test_auprc;
        }
        return std::nan("");
    };

    std::vector<double> baseline;
    for (auto seed : ab.seeds) {
        log(Level::info, "ablate: baseline seed " + std::to_string(seed));
        baseline.push_back(run_one(AblationMode::none, seed));
    }
    auto summary = [](const std::vector<double>& v) {
        json vals = json::array();
        for (double x : v) vals.push_back(number_or_null(x));
        return json{{"auprc", vals}, {"mean", number_or_null(mean(v))}, {"std", number_or_null(sample_std(v))}};
    };
    json modes = json::array();
    for (auto mode : ab.modes) {
        if (mode == AblationMode::none) continue;
        std::vector<double> vals;
        for (auto seed : ab.seeds) {
            log(Level::info, "ablate: " + to_string(mode) + " seed " + std::to_string(seed));
            vals.push_back(run_one(mode, seed));
        }
        json entry = summary(vals);
        entry["mode"] = to_string(mode);
        if (mode == AblationMode::edge_removal) entry["fraction"] = ab.fraction;
        entry["delta_mean"] = number_or_null(mean(vals) - mean(baseline));
        modes.push_back(entry);
    }
    json report = {{"seeds", ab.seeds}, {"unperturbed", summary(baseline)}, {"modes", modes}};
    write_json(run.out / "ablation_report.json", report);
    std::cout << report.dump(2) << '\n';
    return 0;
}

struct SynthFlags {
    std::size_t n_genes = 200;
    std::size_t n_layers = 2;
    std::size_t n_features = 8;
    std::optional<std::size_t> informative;
    double signal = 1.0;
    std::string variant = "complementary";
};

int cmd_synth(const Globals& g, const SynthFlags& f) {
    if (!g.seed) throw ConfigError("--seed: required for synth");
    SynthSpec spec;
    spec.n_genes = f.n_genes;
    spec.n_layers = f.n_layers;
    spec.n_features = f.n_features;
    spec.informative_features = f.informative.value_or(std::min(f.n_features, spec.informative_features));
    spec.signal = f.signal;
    spec.variant = synth_variant_from_string(f.variant);
    spec.seed = *g.seed;
    const fs::path out = g.out.empty() ? fs::path("synth") : fs::path(g.out);
    const SynthDataset synth = make_synthetic(spec);
    write_synthetic(synth, spec, out);
    std::cout << "wrote " << spec.n_genes << "-gene, " << spec.n_layers << "-layer dataset to " << out.string() << '\n';
    return 0;
}

int exit_code(ErrorKind k) { return static_cast<int>(k); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"emgnn: multilayer graph neural network toolkit for gene classification"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed_value = 0;
    app.add_option("--config", g.config, "Run configuration (JSON)");
    auto* seed_opt = app.add_option("--seed", seed_value, "Seed; overrides the config");
    app.add_option("--out", g.out, "Output directory; overrides output_dir");
    app.add_option("--threads", g.threads, "Worker threads for parallel kernels")->check(CLI::PositiveNumber);
    app.add_option("--log-level", g.log_level, "error, warn, info or debug");

    auto* ingest = app.add_subcommand("ingest", "Load and validate the inputs; write ingest_summary.json");
    auto* train_cmd = app.add_subcommand("train", "Split, train and write checkpoint, report and split");

    std::string ckpt;
    auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint; write evaluation.json and predictions.csv");
    evaluate->add_option("--checkpoint", ckpt, "Checkpoint (default <out>/checkpoint.emgnn)");

    std::string genes, variant;
    std::optional<std::size_t> steps;
    auto* explain = app.add_subcommand("explain", "Integrated-gradients attributions per gene");
    explain->add_option("--checkpoint", ckpt, "Checkpoint (default <out>/checkpoint.emgnn)");
    explain->add_option("--genes", genes, "Comma-separated gene names; overrides explain.genes");
    explain->add_option("--steps", steps, "Integration steps");
    explain->add_option("--edge-variant", variant, "meta or global");

    std::optional<double> threshold, target;
    auto* discover = app.add_subcommand("discover", "Rank unlabeled genes above the precision threshold");
    discover->add_option("--checkpoint", ckpt, "Checkpoint (default <out>/checkpoint.emgnn)");
    discover->add_option("--threshold", threshold, "Fixed probability threshold; skips selection");
    discover->add_option("--precision-target", target, "Precision required on labeled genes");

    std::string ranked, gene_sets;
    std::optional<std::size_t> perms;
    std::optional<double> weight;
    auto* gsea = app.add_subcommand("gsea", "Preranked gene set enrichment; write enrichment.csv");
    gsea->add_option("--ranked", ranked, "CSV with gene and probability/score (default <out>/all_unlabeled.csv)");
    gsea->add_option("--gene-sets", gene_sets, "GMT file; overrides data.gene_sets");
    gsea->add_option("--permutations", perms, "Null draws per set; 0 reports ES only");
    gsea->add_option("--weight", weight, "Running-sum weight exponent");

    std::string modes, seeds;
    std::optional<double> fraction;
    auto* ablate = app.add_subcommand("ablate", "Retrain under input perturbations; write ablation_report.json");
    ablate->add_option("--modes", modes, "Comma-separated: random_features, all_one, edge_removal");
    ablate->add_option("--fraction", fraction, "Edge removal fraction");
    ablate->add_option("--seeds", seeds, "Comma-separated seeds");

    SynthFlags sf;
    auto* synth = app.add_subcommand("synth", "Write a planted synthetic dataset with a ready config.json");
    synth->add_option("--n-genes", sf.n_genes, "Gene count");
    synth->add_option("--n-layers", sf.n_layers, "Layer count");
    synth->add_option("--n-features", sf.n_features, "Feature count");
    synth->add_option("--informative", sf.informative, "Features carrying the planted shift");
    synth->add_option("--signal", sf.signal, "Signal strength; 0 plants nothing");
    synth->add_option("--variant", sf.variant, "standard or complementary");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    if (seed_opt->count() > 0) g.seed = seed_value;

    try {
        g_level = level_from_string(g.log_level);
        kernels::set_num_threads(g.threads);
        if (*ingest) return cmd_ingest(g);
        if (*train_cmd) return cmd_train(g);
        if (*evaluate) return cmd_evaluate(g, ckpt);
        if (*explain) return cmd_explain(g, ckpt, genes, steps, variant);
        if (*discover) return cmd_discover(g, ckpt, threshold, target);
        if (*gsea) return cmd_gsea(g, ranked, gene_sets, perms, weight);
        if (*ablate) return cmd_ablate(g, modes, fraction, seeds);
        if (*synth) return cmd_synth(g, sf);
    } catch (const Error& e) {
        log(Level::error, e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        log(Level::error, e.what());
        return 2;
    }
    return 1;
}
