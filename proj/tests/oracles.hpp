#pragma once
// Reference implementations used only by tests. Each one evaluates the
// textbook definition directly (dense matrices, explicit curve walks) and
// shares no code with the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "emgnn/datamodel.hpp"
#include "emgnn/tensor.hpp"

namespace oracle {

using emgnn::Tensor;

using Dense = std::vector<std::vector<double>>;

inline Dense zeros(std::size_t r, std::size_t c) { return Dense(r, std::vector<double>(c, 0.0)); }

inline Dense from_tensor(const Tensor& t) {
    Dense d = zeros(t.rows(), t.cols());
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) d[i][j] = t(i, j);
    return d;
}

inline Dense matmul(const Dense& a, const Dense& b) {
    Dense c = zeros(a.size(), b.empty() ? 0 : b[0].size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < c[i].size(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < b.size(); ++k) s += a[i][k] * b[k][j];
            c[i][j] = s;
        }
    return c;
}

/// D^-1/2 (A + I) D^-1/2 over a layer's local ids.
inline Dense gcn_dense(const emgnn::LayerGraph& g) {
    const std::size_t n = g.num_nodes();
    Dense a = zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) a[i][i] = 1.0;
    for (const auto& e : g.edges()) {
        const auto u = *g.local_id(e.a), v = *g.local_id(e.b);
        a[u][v] = a[v][u] = 1.0;
    }
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) d[i] += a[i][j];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[i][j] /= std::sqrt(d[i]) * std::sqrt(d[j]);
    return a;
}

/// Single-head GAT: alpha_uv = softmax over N(u) + u of LeakyReLU(a^T [W h_u || W h_v]).
inline Dense gat_direct(const emgnn::LayerGraph& g, const Dense& h, const Dense& w, const std::vector<double>& a,
                        double slope, Dense* alpha_out = nullptr) {
    const std::size_t n = g.num_nodes();
    const Dense z = matmul(h, w);
    const std::size_t f = w[0].size();
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) adj[i][i] = true;
    for (const auto& e : g.edges()) {
        const auto u = *g.local_id(e.a), v = *g.local_id(e.b);
        adj[u][v] = adj[v][u] = true;
    }
    Dense out = zeros(n, f);
    if (alpha_out) *alpha_out = zeros(n, n);
    for (std::size_t u = 0; u < n; ++u) {
        std::vector<double> e(n, -INFINITY);
        double mx = -INFINITY;
        for (std::size_t v = 0; v < n; ++v) {
            if (!adj[u][v]) continue;
            double s = 0.0;
            for (std::size_t k = 0; k < f; ++k) s += a[k] * z[u][k] + a[f + k] * z[v][k];
            e[v] = s > 0 ? s : slope * s;
            mx = std::max(mx, e[v]);
        }
        double den = 0.0;
        for (std::size_t v = 0; v < n; ++v)
            if (adj[u][v]) den += std::exp(e[v] - mx);
        for (std::size_t v = 0; v < n; ++v) {
            if (!adj[u][v]) continue;
            const double al = std::exp(e[v] - mx) / den;
            if (alpha_out) (*alpha_out)[u][v] = al;
            for (std::size_t k = 0; k < f; ++k) out[u][k] += al * z[v][k];
        }
    }
    return out;
}

/// Average precision as an exact rational, rounded once to double. Walks
/// every cut of the ranking (score desc, id asc) and adds
/// (recall step) x (precision at the cut). Valid for n <= 8.
inline double auprc_exact(const std::vector<double>& scores, const std::vector<int>& labels) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const std::int64_t lcm = 840;  // lcm(1..8)
    std::int64_t pos = 0;
    for (int y : labels) pos += y;
    std::int64_t num = 0;  // sum over cuts of (tp_k / k) * [label_k], scaled by lcm
    std::int64_t tp = 0;
    for (std::size_t k = 1; k <= n; ++k) {
        const std::int64_t prev_recall_num = tp;
        tp += labels[order[k - 1]];
        const std::int64_t recall_step = tp - prev_recall_num;  // over pos
        num += recall_step * tp * (lcm / static_cast<std::int64_t>(k));
    }
    return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(lcm * pos));
}

/// Walks every list position and evaluates the running-sum deviation
/// (hit weights so far / total hit weight) - (misses so far / misses total).
inline double es_walk(const std::vector<double>& scores, const std::vector<bool>& in_set, double p) {
    const std::size_t n = scores.size();
    double total = 0.0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (in_set[i]) {
            total += p == 0.0 ? 1.0 : std::pow(std::abs(scores[i]), p);
            ++m;
        }
    const bool flat = total == 0.0;
    if (flat) total = static_cast<double>(m);
    double hit = 0.0, best = 0.0;
    std::size_t miss = 0;
    bool first = true;
    for (std::size_t i = 0; i < n; ++i) {
        if (in_set[i]) {
            hit += (p == 0.0 || flat) ? 1.0 : std::pow(std::abs(scores[i]), p);
        } else {
            ++miss;
        }
        const double dev = n > m ? hit / total - static_cast<double>(miss) / static_cast<double>(n - m) : hit / total;
        if (first || std::abs(dev) > std::abs(best) || (std::abs(dev) == std::abs(best) && dev > best)) best = dev;
        first = false;
    }
    return best;
}

/// Central finite difference of f with respect to every entry of x.
inline Tensor numeric_grad(const std::function<double(const Tensor&)>& f, Tensor x, double h = 1e-5) {
    Tensor g(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline double max_rel_error(const Tensor& a, const Tensor& b, double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::abs(a[i] - b[i]) / std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, d);
    }
    return worst;
}

inline Tensor random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(r, c);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

/// Erdos-Renyi graph over catalog ids [0, n).
inline emgnn::LayerGraph random_layer(std::mt19937_64& rng, std::size_t n, double p, std::string name = "g") {
    std::bernoulli_distribution coin(p);
    std::vector<emgnn::Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (coin(rng)) edges.push_back({i, j});
    std::vector<std::size_t> nodes(n);
    std::iota(nodes.begin(), nodes.end(), 0);
    return emgnn::LayerGraph::build(std::move(name), nodes, edges);
}

}  // namespace oracle
