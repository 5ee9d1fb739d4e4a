#include "emgnn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "emgnn/error.hpp"
#include "emgnn/kernels.hpp"
#include "emgnn/rng.hpp"

namespace emgnn {

RankedGeneList RankedGeneList::from_scores(std::span<const std::pair<std::size_t, double>> scored,
                                           const GeneCatalog& catalog) {
    std::vector<std::pair<std::size_t, double>> sorted(scored.begin(), scored.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    RankedGeneList out;
    out.entries.reserve(sorted.size());
    for (const auto& [id, s] : sorted) out.entries.push_back({catalog.name(id), s});
    return out;
}

double precision_at(std::span<const double> scores, std::span<const int> labels, double threshold) {
    std::size_t selected = 0, tp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] >= threshold) {
            ++selected;
            tp += labels[i] == 1 ? 1 : 0;
        }
    }
    return selected == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(selected);
}

double select_threshold(std::span<const double> scores, std::span<const int> labels, double precision_target) {
    if (scores.size() != labels.size()) throw ConfigError("select_threshold: scores and labels differ in length");
    if (std::find(labels.begin(), labels.end(), 1) == labels.end()) {
        throw DataError("select_threshold: no positive labels");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    // Walk distinct score levels from the top; the cut at a level includes all ties.
    std::optional<double> best;
    double max_precision = 0.0;
    std::size_t selected = 0, tp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double level = scores[order[i]];
        while (i < order.size() && scores[order[i]] == level) {
            ++selected;
            tp += labels[order[i]] == 1 ? 1 : 0;
            ++i;
        }
        const double precision = static_cast<double>(tp) / static_cast<double>(selected);
        max_precision = std::max(max_precision, precision);
        if (precision >= precision_target) best = level;
    }
    if (!best) {
        throw NumericError("select_threshold: precision target " + std::to_string(precision_target) +
                           " is unattainable; maximum achievable precision is " + std::to_string(max_precision));
    }
    return *best;
}

DiscoveryResult discover_candidates(std::span<const double> probabilities, const MultilayerDataset& dataset,
                                    double threshold) {
    if (probabilities.size() != dataset.num_genes()) {
        throw ConfigError("discover_candidates: one probability per gene is required");
    }
    std::vector<std::pair<std::size_t, double>> unlabeled, passing;
    for (std::size_t id = 0; id < probabilities.size(); ++id) {
        if (dataset.labels.find(id)) continue;
        unlabeled.emplace_back(id, probabilities[id]);
        if (probabilities[id] >= threshold) passing.emplace_back(id, probabilities[id]);
    }
    DiscoveryResult out;
    out.threshold = threshold;
    out.all = RankedGeneList::from_scores(unlabeled, dataset.catalog);
    out.candidates = RankedGeneList::from_scores(passing, dataset.catalog);
    return out;
}

std::optional<double> cancer_neighbor_fraction(const MultilayerDataset& dataset, std::size_t gene, std::size_t layer) {
    const LayerGraph& g = dataset.layers.at(layer);
    const auto local = g.local_id(gene);
    if (!local || g.degree(*local) == 0) return std::nullopt;
    std::size_t positive = 0;
    for (std::size_t v : g.neighbors(*local)) {
        if (dataset.labels.find(g.gene_of(v)) == Label::positive) ++positive;
    }
    return static_cast<double>(positive) / static_cast<double>(g.degree(*local));
}

Variability meta_edge_variability(std::span<const std::optional<double>> attributions,
                                  std::span<const std::optional<double>> fractions) {
    if (attributions.size() != fractions.size()) throw ConfigError("meta_edge_variability: length mismatch");
    std::vector<double> a, f;
    for (std::size_t i = 0; i < attributions.size(); ++i) {
        if (attributions[i] && fractions[i]) {
            a.push_back(*attributions[i]);
            f.push_back(*fractions[i]);
        }
    }
    Variability out;
    out.valid_layers = a.size();
    if (a.size() < 2) return out;
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mf = std::accumulate(f.begin(), f.end(), 0.0) / n;
    double saa = 0.0, sff = 0.0, saf = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sff += (f[i] - mf) * (f[i] - mf);
        saf += (a[i] - ma) * (f[i] - mf);
    }
    out.stddev = std::sqrt(saa / (n - 1.0));
    if (saa > 0.0 && sff > 0.0) out.correlation = std::clamp(saf / std::sqrt(saa * sff), -1.0, 1.0);
    return out;
}

EnrichmentScore enrichment_score(std::span<const double> scores, std::span<const std::size_t> hits, double weight) {
    const std::size_t n = scores.size();
    const std::size_t m = hits.size();
    if (m == 0 || m > n) throw ConfigError("enrichment_score: hit count must lie in [1, n]");
    std::vector<double> w(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double s = std::abs(scores[hits[j]]);
        w[j] = weight == 0.0 ? 1.0 : (weight == 1.0 ? s : std::pow(s, weight));
    }
    double norm = 0.0;
    for (double v : w) norm += v;
    if (norm == 0.0) {
        std::fill(w.begin(), w.end(), 1.0);
        norm = static_cast<double>(m);
    }
    const double n_miss = static_cast<double>(n - m);
    auto deviation = [&](double cum, std::size_t misses) {
        return n > m ? cum / norm - static_cast<double>(misses) / n_miss : cum / norm;
    };

    // The running sum is monotone between hits, so extremes occur right after a
    // hit or right before one (or at the end); evaluating those positions in
    // ascending order reproduces the full walk, first occurrences included.
    double best_max = -std::numeric_limits<double>::infinity(), best_min = std::numeric_limits<double>::infinity();
    std::size_t pos_max = 0, pos_min = 0;
    auto consider = [&](double v, std::size_t pos) {
        if (v > best_max) {
            best_max = v;
            pos_max = pos;
        }
        if (v < best_min) {
            best_min = v;
            pos_min = pos;
        }
    };
    double cum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t p = hits[j];
        const std::size_t misses_before = p - j;
        const bool miss_precedes = p > 0 && (j == 0 || hits[j - 1] + 1 < p);
        if (miss_precedes) consider(deviation(cum, misses_before), p - 1);
        cum += w[j];
        consider(deviation(cum, misses_before), p);
    }
    if (hits[m - 1] + 1 < n) consider(deviation(cum, n - m), n - 1);

    if (best_max >= -best_min) return {best_max, pos_max};
    return {best_min, pos_min};
}

std::vector<double> benjamini_hochberg(std::span<const double> p_values) {
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (p_values[a] != p_values[b]) return p_values[a] < p_values[b];
        return a < b;
    });
    std::vector<double> q(m);
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        const double v = p_values[order[r]] * static_cast<double>(m) / static_cast<double>(r + 1);
        running = std::min(running, v);
        q[order[r]] = std::min(1.0, running);
    }
    return q;
}

GseaResult gsea_prerank(const RankedGeneList& ranked, const GeneSetCollection& sets, std::size_t permutations,
                        double weight, std::uint64_t seed) {
    if (ranked.entries.empty()) throw DataError("gsea: ranked gene list is empty");
    if (!(weight >= 0.0)) throw ConfigError("gsea: weight must be >= 0");
    const std::size_t n = ranked.size();
    std::unordered_map<std::string, std::size_t> position;
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!position.emplace(ranked.entries[i].gene, i).second) {
            throw DataError("gsea: gene '" + ranked.entries[i].gene + "' appears twice in the ranked list");
        }
        scores[i] = ranked.entries[i].score;
    }

    GseaResult out;
    std::vector<std::vector<std::size_t>> set_hits;
    std::vector<std::size_t> set_index;
    for (std::size_t s = 0; s < sets.sets.size(); ++s) {
        std::unordered_set<std::string> seen;
        std::vector<std::size_t> hits;
        std::size_t unresolved = 0;
        for (const auto& g : sets.sets[s].members) {
            if (!seen.insert(g).second) continue;
            const auto it = position.find(g);
            if (it == position.end()) {
                ++unresolved;
            } else {
                hits.push_back(it->second);
            }
        }
        if (hits.empty()) {
            out.skipped.push_back(sets.sets[s].name);
            continue;
        }
        std::sort(hits.begin(), hits.end());
        EnrichmentResult r;
        r.set_name = sets.sets[s].name;
        r.hits = hits.size();
        r.set_size = seen.size();
        out.results.push_back(r);
        out.unresolved_members.push_back(unresolved);
        set_hits.push_back(std::move(hits));
        set_index.push_back(s);
    }

    const auto usable = static_cast<std::ptrdiff_t>(out.results.size());
#pragma omp parallel for schedule(dynamic) num_threads(kernels::num_threads())
    for (std::ptrdiff_t si = 0; si < usable; ++si) {
        const auto u = static_cast<std::size_t>(si);
        EnrichmentResult& r = out.results[u];
        const auto& hits = set_hits[u];
        const EnrichmentScore es = enrichment_score(scores, hits, weight);
        r.es = es.es;
        r.leading_edge = es.es >= 0.0
                             ? static_cast<std::size_t>(std::count_if(hits.begin(), hits.end(),
                                                                      [&](std::size_t p) { return p <= es.peak; }))
                             : static_cast<std::size_t>(std::count_if(hits.begin(), hits.end(),
                                                                      [&](std::size_t p) { return p > es.peak; }));
        if (permutations == 0) continue;
        Rng rng(sub_seed(seed, set_index[u]));
        std::vector<std::size_t> pool(n);
        std::iota(pool.begin(), pool.end(), 0);
        std::vector<std::size_t> drawn(hits.size());
        std::size_t extreme = 0;
        for (std::size_t p = 0; p < permutations; ++p) {
            for (std::size_t k = 0; k < hits.size(); ++k) {
                std::swap(pool[k], pool[k + rng.index(n - k)]);
                drawn[k] = pool[k];
            }
            std::sort(drawn.begin(), drawn.end());
            if (std::abs(enrichment_score(scores, drawn, weight).es) >= std::abs(r.es)) ++extreme;
        }
        r.p_below_resolution = extreme == 0;
        // Zero exceedances are reported at the resolution floor 1/permutations.
        r.p_value = static_cast<double>(std::max<std::size_t>(extreme, 1)) / static_cast<double>(permutations);
    }

    if (permutations > 0 && !out.results.empty()) {
        std::vector<double> p;
        for (const auto& r : out.results) p.push_back(*r.p_value);
        const auto q = benjamini_hochberg(p);
        for (std::size_t i = 0; i < q.size(); ++i) out.results[i].fdr = q[i];
    }
    return out;
}

}  // namespace emgnn
