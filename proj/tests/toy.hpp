#pragma once
// Small fixed datasets shared by several test files.

#include <random>

#include "emgnn/datamodel.hpp"
#include "emgnn/gnn.hpp"
#include "oracles.hpp"

namespace toy {

/// Six genes, two layers, three features. Gene 5 lives only in layer b.
inline emgnn::MultilayerDataset six_gene(std::uint64_t seed = 1) {
    emgnn::MultilayerDataset ds;
    for (const char* g : {"A", "B", "C", "D", "E", "F"}) ds.catalog.intern(g);
    ds.layers.push_back(emgnn::LayerGraph::build("a", {0, 1, 2, 3, 4}, {{0, 1}, {1, 2}, {2, 3}, {0, 4}}));
    ds.layers.push_back(emgnn::LayerGraph::build("b", {0, 1, 2, 3, 5}, {{0, 2}, {1, 3}, {3, 5}, {0, 1}}));
    std::mt19937_64 rng(seed);
    ds.features.values = oracle::random_tensor(rng, 6, 3);
    ds.features.names = {"MF_0", "CNA_0", "GE_0"};
    ds.features.groups = {"MF", "CNA", "GE"};
    ds.labels.labels = {{0, emgnn::Label::positive}, {1, emgnn::Label::negative}, {2, emgnn::Label::positive},
                        {3, emgnn::Label::negative}, {5, emgnn::Label::negative}};
    ds.validate();
    return ds;
}

inline emgnn::GnnConfig small_config(emgnn::Arch arch, std::size_t hidden = 4) {
    emgnn::GnnConfig cfg;
    cfg.arch = arch;
    cfg.encoder_layers = 2;
    cfg.hidden_dim = hidden;
    cfg.meta_layers = 1;
    cfg.meta_hidden_dim = hidden;
    cfg.head_hidden_dim = hidden;
    return cfg;
}

/// Random dataset over n genes and k Erdos-Renyi layers.
inline emgnn::MultilayerDataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t k, std::size_t d,
                                               double p) {
    emgnn::MultilayerDataset ds;
    for (std::size_t i = 0; i < n; ++i) ds.catalog.intern("g" + std::to_string(i));
    for (std::size_t l = 0; l < k; ++l) ds.layers.push_back(oracle::random_layer(rng, n, p, "L" + std::to_string(l)));
    ds.features.values = oracle::random_tensor(rng, n, d);
    for (std::size_t f = 0; f < d; ++f) {
        ds.features.names.push_back("f" + std::to_string(f));
        ds.features.groups.push_back("G");
    }
    for (std::size_t i = 0; i < n; ++i) ds.labels.labels[i] = i % 3 == 0 ? emgnn::Label::positive : emgnn::Label::negative;
    return ds;
}

}  // namespace toy
