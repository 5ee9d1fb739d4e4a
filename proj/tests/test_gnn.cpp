#include <doctest.h>

#include <cmath>
#include <random>

#include "emgnn/error.hpp"
#include "emgnn/gnn.hpp"
#include "oracles.hpp"
#include "toy.hpp"

using namespace emgnn;
namespace ad = emgnn::ad;

namespace {

double weight_between(const ad::SparseWeighted& sw, std::size_t u, std::size_t v) {
    for (std::size_t k = sw.structure->row_begin(u); k < sw.structure->row_end(u); ++k)
        if (sw.structure->col(k) == v) return sw.weights[k];
    return 0.0;
}

Tensor identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

double max_abs_diff(const Tensor& a, const oracle::Dense& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) worst = std::max(worst, std::abs(a(i, j) - b[i][j]));
    return worst;
}

ModelParams with_tensor(ModelParams p, const std::string& name, Tensor value) {
    for (auto& t : p.tensors)
        if (t.name == name) t.value = std::move(value);
    return p;
}

}  // namespace

TEST_CASE("gcn normalization") {
    const auto iso = gcn_normalize(LayerGraph::build("x", {0}, {}));
    CHECK(iso.weights[0] == 1.0);
    const auto pair = gcn_normalize(LayerGraph::build("x", {0, 1}, {{0, 1}}));
    CHECK(weight_between(pair, 0, 1) == 0.5);
    CHECK(weight_between(pair, 0, 0) == 0.5);
    CHECK(weight_between(pair, 1, 1) == 0.5);
    const auto path = gcn_normalize(LayerGraph::build("x", {0, 1, 2}, {{0, 1}, {1, 2}}));
    CHECK(weight_between(path, 0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
    CHECK(weight_between(path, 0, 1) == doctest::Approx(0.4082).epsilon(1e-4));
}

TEST_CASE("gcn layer examples and dense oracle") {
    ad::Tape tape;
    {
        const auto sw = gcn_normalize(LayerGraph::build("x", {0}, {}));
        const Tensor h{{0.3, -2.0}};
        const ad::Var out = gcn_layer(tape.constant(h), sw.structure, tape.constant(sw.weights), tape.constant(identity(2)));
        CHECK(out.value() == h);
    }
    {
        const auto sw = gcn_normalize(LayerGraph::build("x", {0, 1}, {{0, 1}}));
        const ad::Var out = gcn_layer(tape.constant(Tensor{{1.5, 2.0}, {1.5, 2.0}}), sw.structure,
                                      tape.constant(sw.weights), tape.constant(Tensor{{1.0, 2.0}, {3.0, 4.0}}));
        CHECK(out.value()(0, 0) == out.value()(1, 0));
        CHECK(out.value()(0, 1) == out.value()(1, 1));
    }
    std::mt19937_64 rng(21);
    for (std::size_t n : {4u, 9u, 20u}) {
        CAPTURE(n);
        const LayerGraph g = oracle::random_layer(rng, n, 0.3);
        const auto sw = gcn_normalize(g);
        const Tensor h = oracle::random_tensor(rng, n, 3);
        const Tensor w = oracle::random_tensor(rng, 3, 2);
        const ad::Var out = gcn_layer(tape.constant(h), sw.structure, tape.constant(sw.weights), tape.constant(w));
        const auto expected =
            oracle::matmul(oracle::matmul(oracle::gcn_dense(g), oracle::from_tensor(h)), oracle::from_tensor(w));
        CHECK(max_abs_diff(out.value(), expected) < 1e-12);
    }
    CHECK_THROWS_AS(gcn_layer(tape.constant(Tensor(3, 2)), gcn_normalize(LayerGraph::build("x", {0}, {})).structure,
                              tape.constant(Tensor(1, 1, 1.0)), tape.constant(Tensor(2, 2))),
                    ConfigError);
}

TEST_CASE("gat layer examples and direct formula") {
    ad::Tape tape;
    {
        const LayerGraph g = LayerGraph::build("x", {0}, {});
        const Tensor w{{1.0, 2.0}, {0.5, -1.0}};
        ad::Var coef;
        const ad::Var out = gat_layer(tape.constant(Tensor{{1.0, 3.0}}), adjacency_with_self_loops(g),
                                      tape.constant(w), tape.constant(Tensor{{0.4}, {0.1}, {-2.0}, {1.0}}), 0.2,
                                      std::nullopt, &coef);
        CHECK(coef.value()[0] == 1.0);
        CHECK(out.value() == Tensor{{2.5, -1.0}});
    }
    std::mt19937_64 rng(4);
    {
        const LayerGraph g = oracle::random_layer(rng, 6, 0.5);
        const auto adj = adjacency_with_self_loops(g);
        ad::Var coef;
        gat_layer(tape.constant(oracle::random_tensor(rng, 6, 3)), adj, tape.constant(oracle::random_tensor(rng, 3, 2)),
                  tape.constant(Tensor(4, 1)), 0.2, std::nullopt, &coef);
        for (std::size_t u = 0; u < 6; ++u)
            for (std::size_t k = adj->row_begin(u); k < adj->row_end(u); ++k)
                CHECK(coef.value()[k] == doctest::Approx(1.0 / static_cast<double>(g.degree(u) + 1)).epsilon(1e-15));
    }
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = trial == 0 ? 3 : 8;
        const LayerGraph g = oracle::random_layer(rng, n, 0.4);
        const auto adj = adjacency_with_self_loops(g);
        const Tensor h = oracle::random_tensor(rng, n, 4);
        const Tensor w = oracle::random_tensor(rng, 4, 3);
        const Tensor a = oracle::random_tensor(rng, 6, 1, -2, 2);
        ad::Var coef;
        const ad::Var out =
            gat_layer(tape.constant(h), adj, tape.constant(w), tape.constant(a), 0.2, std::nullopt, &coef);
        oracle::Dense alpha;
        const auto expected =
            oracle::gat_direct(g, oracle::from_tensor(h), oracle::from_tensor(w), a.values(), 0.2, &alpha);
        CHECK(max_abs_diff(out.value(), expected) < 1e-12);
        for (std::size_t u = 0; u < n; ++u) {
            double s = 0.0;
            for (std::size_t k = adj->row_begin(u); k < adj->row_end(u); ++k) {
                CHECK(std::abs(coef.value()[k] - alpha[u][adj->col(k)]) < 1e-12);
                s += coef.value()[k];
            }
            CHECK(std::abs(s - 1.0) < 1e-12);
        }
    }
    const LayerGraph g = LayerGraph::build("x", {0, 1}, {{0, 1}});
    CHECK_THROWS_AS(gat_layer(tape.constant(Tensor(2, 2)), adjacency_with_self_loops(g), tape.constant(Tensor(2, 3)),
                              tape.constant(Tensor(4, 1)), 0.2),
                    ConfigError);
}

TEST_CASE("shared encoder") {
    MultilayerDataset ds = toy::six_gene();
    ds.layers[1] = LayerGraph::build("b", ds.layers[0].node_ids(), ds.layers[0].edges());
    for (Arch arch : {Arch::gcn, Arch::gat}) {
        const GnnConfig cfg = toy::small_config(arch);
        const auto h = encode_layers(init_params(cfg, 3, 2), cfg, ds);
        REQUIRE(h.size() == 2);
        CHECK(h[0] == h[1]);
    }

    // one GCN layer over isolated nodes with W = I reproduces X
    MultilayerDataset iso = toy::six_gene();
    iso.layers = {LayerGraph::build("a", {0, 1, 2, 3, 4, 5}, {})};
    GnnConfig cfg = toy::small_config(Arch::gcn, 3);
    cfg.encoder_layers = 1;
    const ModelParams p = with_tensor(init_params(cfg, 3, 1), "encoder.0.weight", identity(3));
    CHECK(encode_layers(p, cfg, iso)[0] == iso.features.values);
}

TEST_CASE("layer order permutes encoder outputs and leaves predictions unchanged") {
    std::mt19937_64 rng(12);
    const MultilayerDataset ds = toy::random_dataset(rng, 30, 3, 4, 0.15);
    MultilayerDataset perm = ds;
    perm.layers = {ds.layers[2], ds.layers[0], ds.layers[1]};
    for (Arch arch : {Arch::gcn, Arch::gat}) {
        const GnnConfig cfg = toy::small_config(arch);
        const ModelParams p = init_params(cfg, 4, 8);
        const auto h = encode_layers(p, cfg, ds), hp = encode_layers(p, cfg, perm);
        CHECK(hp[0] == h[2]);
        CHECK(hp[1] == h[0]);
        CHECK(hp[2] == h[1]);
        CHECK(forward(p, cfg, ds) == forward(p, cfg, perm));
        CHECK(forward(p, cfg, ds) == forward(p, cfg, ds));
    }
}

TEST_CASE("meta graph construction") {
    MultilayerDataset ds;
    for (const char* g : {"A", "B", "C", "D"}) ds.catalog.intern(g);
    ds.layers.push_back(LayerGraph::build("z", {0, 1}, {{0, 1}}));
    ds.layers.push_back(LayerGraph::build("a", {0, 2}, {{0, 2}}));
    ds.layers.push_back(LayerGraph::build("m", {0}, {}));
    const MetaGraph mg = build_meta_graph(ds);
    CHECK(mg.incoming[0].size() == 3);
    CHECK(mg.incoming[1].size() == 1);
    CHECK(mg.incoming[3].empty());
    // copies come in layer-name order
    CHECK(mg.incoming[0][0].layer == 1);
    CHECK(mg.incoming[0][1].layer == 2);
    CHECK(mg.incoming[0][2].layer == 0);

    const PreparedGraphs pg = prepare_graphs(ds);
    CHECK(pg.meta.adj->row_end(0) - pg.meta.adj->row_begin(0) == 4);
    CHECK(pg.meta.adj->row_end(3) - pg.meta.adj->row_begin(3) == 1);
}

TEST_CASE("meta forward") {
    // K = 1: one message plus the projected self feature.
    MultilayerDataset ds;
    for (const char* g : {"A", "B", "C"}) ds.catalog.intern(g);
    ds.layers.push_back(LayerGraph::build("only", {0, 1}, {{0, 1}}));
    std::mt19937_64 rng(30);
    ds.features.values = oracle::random_tensor(rng, 3, 2);
    ds.features.names = {"f0", "f1"};
    ds.features.groups = {"G", "G"};
    const GnnConfig cfg = toy::small_config(Arch::gcn, 3);
    const ModelParams p = init_params(cfg, 2, 6);
    const auto h = encode_layers(p, cfg, ds);
    const Tensor meta = meta_forward(p, cfg, ds, h);
    const auto xp = oracle::matmul(oracle::from_tensor(ds.features.values), oracle::from_tensor(p.at("meta.projection")));
    const auto w = oracle::from_tensor(p.at("meta.0.weight"));
    const auto hd = oracle::from_tensor(h[0]);
    for (std::size_t j = 0; j < 2; ++j) {
        oracle::Dense agg = oracle::zeros(1, 3);
        for (std::size_t k = 0; k < 3; ++k) agg[0][k] = 0.5 * xp[j][k] + hd[j][k] / std::sqrt(2.0);
        const auto expected = oracle::matmul(agg, w);
        for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(meta(j, k) - expected[0][k]) < 1e-12);
    }
    // gene C is in no layer: self term only
    oracle::Dense self = {xp[2]};
    const auto expected_c = oracle::matmul(self, w);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(meta(2, k) - expected_c[0][k]) < 1e-12);

    // identical features and neighborhoods give identical rows
    MultilayerDataset twin;
    for (const char* g : {"A", "B", "C"}) twin.catalog.intern(g);
    twin.layers.push_back(LayerGraph::build("l", {0, 1, 2}, {{0, 2}, {1, 2}}));
    twin.features.values = Tensor{{1.0, 2.0}, {1.0, 2.0}, {0.5, 0.0}};
    twin.features.names = {"f0", "f1"};
    twin.features.groups = {"G", "G"};
    for (Arch arch : {Arch::gcn, Arch::gat}) {
        const GnnConfig c = toy::small_config(arch, 3);
        const ModelParams q = init_params(c, 2, 2);
        const Tensor m = meta_forward(q, c, twin, encode_layers(q, c, twin));
        CHECK(std::vector<double>(m.row(0).begin(), m.row(0).end()) ==
              std::vector<double>(m.row(1).begin(), m.row(1).end()));
    }

    CHECK_THROWS_AS(meta_forward(p, cfg, ds, {}), ConfigError);
}

TEST_CASE("prediction head") {
    const GnnConfig cfg = toy::small_config(Arch::gcn);
    ModelParams p = init_params(cfg, 3, 1);
    for (auto& t : p.tensors) t.value = Tensor(t.value.rows(), t.value.cols());
    for (double v : predict(p, cfg, Tensor(5, cfg.meta_hidden_dim, 1.0))) CHECK(v == 0.5);
    CHECK(sigmoid(4.0) == doctest::Approx(0.9820).epsilon(1e-4));
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(-800.0) >= 0.0);
    double prev = 0.0;
    for (double z = -10.0; z <= 10.0; z += 0.5) {
        CHECK(sigmoid(z) > prev);
        prev = sigmoid(z);
    }
    // output bias drives the logit directly
    p.tensors[param_layout(cfg).output_bias].value = Tensor{{4.0}};
    CHECK(predict(p, cfg, Tensor(1, cfg.meta_hidden_dim))[0] == doctest::Approx(0.9820).epsilon(1e-4));
}

TEST_CASE("locality of message passing") {
    // A path 0-1-2-3-4-5-6 in one layer; with two encoder layers, gene 0 sees genes 0..2.
    MultilayerDataset ds;
    std::vector<std::size_t> nodes;
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < 7; ++i) {
        ds.catalog.intern("p" + std::to_string(i));
        nodes.push_back(i);
        if (i > 0) edges.push_back({i - 1, i});
    }
    ds.layers.push_back(LayerGraph::build("path", nodes, edges));
    std::mt19937_64 rng(2);
    ds.features.values = oracle::random_tensor(rng, 7, 2);
    ds.features.names = {"a", "b"};
    ds.features.groups = {"G", "G"};
    for (Arch arch : {Arch::gcn, Arch::gat}) {
        const GnnConfig cfg = toy::small_config(arch);
        const ModelParams p = init_params(cfg, 2, 3);
        const auto base = forward(p, cfg, ds);
        MultilayerDataset far = ds;
        far.features.values(3, 0) += 5.0;
        CHECK(forward(p, cfg, far)[0] == base[0]);
        MultilayerDataset near = ds;
        near.features.values(2, 0) += 5.0;
        CHECK(forward(p, cfg, near)[0] != base[0]);

        // a layer without gene 0's neighborhood leaves it unchanged
        MultilayerDataset extra = ds;
        extra.layers.push_back(LayerGraph::build("other", {4, 5, 6}, {{4, 5}, {5, 6}}));
        CHECK(forward(p, cfg, extra)[0] == base[0]);
    }
}

TEST_CASE("parameter shapes and errors") {
    GnnConfig cfg = toy::small_config(Arch::gat);
    const ModelParams p = init_params(cfg, 5, 1);
    CHECK(p.tensors.size() == param_layout(cfg).count);
    CHECK(p.at("encoder.0.attention").rows() == 2 * cfg.hidden_dim);
    CHECK(init_params(cfg, 5, 1) == p);
    CHECK(init_params(cfg, 5, 2) != p);
    MultilayerDataset ds = toy::six_gene();
    CHECK_THROWS_AS(forward(p, cfg, ds), ConfigError);  // input dim 5 vs 3 features
    cfg.hidden_dim = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(arch_from_string("gat") == Arch::gat);
    CHECK_THROWS_AS(arch_from_string("gin"), ConfigError);
}
