#include <doctest.h>

#include <cmath>
#include <random>

#include "emgnn/error.hpp"
#include "emgnn/explain.hpp"
#include "emgnn/training.hpp"
#include "oracles.hpp"
#include "toy.hpp"

using namespace emgnn;
namespace ad = emgnn::ad;

namespace {

double completeness_gap(const AttributionMatrix& a) {
    const double diff = a.logit - a.baseline_logit;
    return std::abs(a.total() - diff) / std::abs(diff);
}

// Dataset with a path layer 0-1-...-6 and a second layer over a few genes.
MultilayerDataset path_dataset() {
    MultilayerDataset ds;
    std::vector<std::size_t> nodes;
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < 7; ++i) {
        ds.catalog.intern("p" + std::to_string(i));
        nodes.push_back(i);
        if (i > 0) edges.push_back({i - 1, i});
    }
    ds.layers.push_back(LayerGraph::build("path", nodes, edges));
    ds.layers.push_back(LayerGraph::build("side", {0, 1, 5}, {{0, 1}, {1, 5}}));
    std::mt19937_64 rng(5);
    ds.features.values = oracle::random_tensor(rng, 7, 3);
    ds.features.names = {"a", "b", "c"};
    ds.features.groups = {"X", "X", "Y"};
    return ds;
}

ModelParams trained_toy(const GnnConfig& cfg, const MultilayerDataset& ds) {
    SplitSpec split;
    for (const auto& [id, l] : ds.labels.labels) split.train_ids.push_back(id);
    TrainConfig tc;
    tc.epochs = 40;
    tc.adam.lr = 0.01;
    tc.seed = 3;
    return train(cfg, tc, ds, split).params;
}

}  // namespace

TEST_CASE("zero input gives zero attributions") {
    const MultilayerDataset ds = toy::six_gene();
    const GnnConfig cfg = toy::small_config(Arch::gcn);
    const PreparedGraphs g = prepare_graphs(ds);
    const auto a = ig_node_features(init_params(cfg, 3, 1), cfg, g, Tensor(6, 3), 0, 16);
    for (double v : a.values.values()) CHECK(v == 0.0);
    CHECK(a.logit == a.baseline_logit);
}

TEST_CASE("linear model attributions are exact at any step count") {
    // One encoder layer, one meta layer, and a head bias large enough that the
    // hidden ReLU never switches off along the path: the logit is affine in x.
    const MultilayerDataset ds = toy::six_gene();
    GnnConfig cfg = toy::small_config(Arch::gcn);
    cfg.encoder_layers = 1;
    ModelParams p = init_params(cfg, 3, 9);
    p.tensors[param_layout(cfg).head_bias].value = Tensor(1, cfg.head_hidden_dim, 100.0);
    const PreparedGraphs g = prepare_graphs(ds);

    ad::Tape tape;
    const auto vars = bind_params(tape, p, false);
    const ad::Var x = tape.variable(ds.features.values);
    const auto fv = forward_on_tape(cfg, vars, g, x);
    const Tensor w = tape.backward(ad::row_gather(fv.logits, {2})).of(x);

    for (std::size_t steps : {1u, 3u, 64u}) {
        const auto a = ig_node_features(p, cfg, g, ds.features.values, 2, steps);
        for (std::size_t i = 0; i < w.size(); ++i)
            CHECK(a.values[i] == doctest::Approx(ds.features.values[i] * w[i]).epsilon(1e-10).scale(1e-12));
        CHECK(completeness_gap(a) < 1e-9);
    }
}

TEST_CASE("completeness on trained toy models") {
    const MultilayerDataset ds = toy::six_gene();
    const PreparedGraphs g = prepare_graphs(ds);
    for (Arch arch : {Arch::gcn, Arch::gat}) {
        CAPTURE(to_string(arch));
        const GnnConfig cfg = toy::small_config(arch, 8);
        const ModelParams p = trained_toy(cfg, ds);
        for (std::size_t gene : {0u, 3u, 5u}) {
            const double e16 = completeness_gap(ig_node_features(p, cfg, g, ds.features.values, gene, 16));
            const auto a = ig_node_features(p, cfg, g, ds.features.values, gene, 256);
            const double e256 = completeness_gap(a);
            REQUIRE(a.logit != a.baseline_logit);
            CHECK(e256 <= 0.01);
            CHECK(e256 <= e16 + 1e-6);
            CHECK(a.meta_row() == std::vector<double>(a.values.row(gene).begin(), a.values.row(gene).end()));
        }
    }
}

TEST_CASE("attributions outside the receptive field are exactly zero") {
    const MultilayerDataset ds = path_dataset();
    const PreparedGraphs g = prepare_graphs(ds);
    for (Arch arch : {Arch::gcn, Arch::gat}) {
        const GnnConfig cfg = toy::small_config(arch);  // two encoder layers
        const auto a = ig_node_features(init_params(cfg, 3, 2), cfg, g, ds.features.values, 0, 8);
        // within two hops of gene 0: 0, 1, 2 (path) and 1, 5 (side)
        for (std::size_t i : {3u, 4u, 6u})
            for (double v : a.values.row(i)) CHECK(v == 0.0);
        double near = 0.0;
        for (std::size_t i : {1u, 2u, 5u})
            for (double v : a.values.row(i)) near += std::abs(v);
        CHECK(near > 0.0);
    }
}

TEST_CASE("meta-edge normalization") {
    CHECK(max_normalize({0.5, 0.25}) == std::vector<double>{1.0, 0.5});
    CHECK(max_normalize({0.0, 0.0}) == std::vector<double>{0.0, 0.0});
    CHECK(max_normalize({-0.4, 0.2}) == std::vector<double>{-1.0, 0.5});
    MetaEdgeAttribution m;
    m.normalized = {-1.0, 0.5};
    CHECK(m.display() == std::vector<double>{0.0, 0.5});
}

TEST_CASE("meta-edge attributions") {
    const MultilayerDataset ds = path_dataset();
    const PreparedGraphs g = prepare_graphs(ds);
    for (Arch arch : {Arch::gcn, Arch::gat}) {
        CAPTURE(to_string(arch));
        const GnnConfig cfg = toy::small_config(arch);
        const ModelParams p = init_params(cfg, 3, 4);

        const auto single = ig_meta_edges(p, cfg, g, ds.features.values, 3, 32);
        REQUIRE(single.raw.size() == 1);
        CHECK(std::abs(single.normalized[0]) == 1.0);

        const auto both = ig_meta_edges(p, cfg, g, ds.features.values, 1, 32);
        REQUIRE(both.raw.size() == 2);
        double mx = 0.0;
        for (double v : both.normalized) {
            CHECK(std::abs(v) <= 1.0);
            mx = std::max(mx, std::abs(v));
        }
        CHECK(mx == 1.0);
        CHECK(both.layers == std::vector<std::size_t>{0, 1});
        CHECK(ig_meta_edges(p, cfg, g, ds.features.values, 1, 32).raw == both.raw);

        const auto global = ig_meta_edges(p, cfg, g, ds.features.values, 1, 16, EdgeIgVariant::global);
        CHECK(global.raw.size() == 2);
        CHECK(global.variant == EdgeIgVariant::global);
    }

    // a gene in no layer gets an empty result
    MultilayerDataset lone = toy::six_gene();
    lone.catalog.intern("Z");
    lone.features.values = Tensor(7, 3, 0.5);
    const GnnConfig cfg = toy::small_config(Arch::gcn);
    const auto e = ig_meta_edges(init_params(cfg, 3, 1), cfg, prepare_graphs(lone), lone.features.values, 6);
    CHECK(e.empty);
    CHECK(e.raw.empty());
}

TEST_CASE("duplicate layers receive equal meta-edge attributions") {
    MultilayerDataset ds = toy::six_gene();
    ds.layers[1] = LayerGraph::build("b", ds.layers[0].node_ids(), ds.layers[0].edges());
    const PreparedGraphs g = prepare_graphs(ds);
    for (Arch arch : {Arch::gcn, Arch::gat}) {
        const GnnConfig cfg = toy::small_config(arch);
        const ModelParams p = init_params(cfg, 3, 6);
        for (std::size_t gene : {0u, 2u, 4u}) {
            const auto m = ig_meta_edges(p, cfg, g, ds.features.values, gene, 32);
            REQUIRE(m.raw.size() == 2);
            CHECK(std::abs(m.raw[0] - m.raw[1]) <= 1e-9);
        }
    }
}

TEST_CASE("neighbor importance") {
    AttributionMatrix a;
    a.values = Tensor{{0.2, -0.5, 0.1}, {0.0, 0.0, 0.0}, {0.3, 0.1, 0.0}, {0.7, 0.0, -1.0}, {0.3, 0.3, 0.3}};
    const auto r = neighbor_importance(a);
    REQUIRE(r.size() == 4);
    CHECK(r[0] == std::pair<std::size_t, double>{3, 0.7});
    CHECK(r[1] == std::pair<std::size_t, double>{2, 0.3});
    CHECK(r[2] == std::pair<std::size_t, double>{4, 0.3});
    CHECK(r[3] == std::pair<std::size_t, double>{0, 0.2});
}

TEST_CASE("explanations are deterministic and reject bad input") {
    const MultilayerDataset ds = toy::six_gene();
    const PreparedGraphs g = prepare_graphs(ds);
    const GnnConfig cfg = toy::small_config(Arch::gat);
    ModelParams p = init_params(cfg, 3, 2);
    const auto a = ig_node_features(p, cfg, g, ds.features.values, 1, 16);
    CHECK(ig_node_features(p, cfg, g, ds.features.values, 1, 16).values == a.values);
    CHECK_THROWS_AS(ig_node_features(p, cfg, g, ds.features.values, 1, 0), ConfigError);
    CHECK_THROWS_AS(ig_node_features(p, cfg, g, ds.features.values, 60, 4), Error);
    p.tensors[0].value[0] = std::nan("");
    CHECK_THROWS_AS(ig_node_features(p, cfg, g, ds.features.values, 1, 4), NumericError);
    CHECK(edge_variant_from_string("global") == EdgeIgVariant::global);
    CHECK_THROWS_AS(edge_variant_from_string("all"), ConfigError);
}
