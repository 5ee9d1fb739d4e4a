#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "emgnn/datamodel.hpp"
#include "emgnn/gnn.hpp"

namespace emgnn {

/// Disjoint labeled-gene partitions. Ids are catalog ids in ascending order.
struct SplitSpec {
    std::string test_layer;
    std::vector<std::size_t> test_ids;
    std::vector<std::size_t> train_ids;
    std::vector<std::size_t> val_ids;
    std::uint64_t seed = 0;
    friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

/// Labeled genes of `test_layer` are split per class (floor(test_frac * n_c)
/// to test). The remainder, pooled with labeled genes outside the test
/// layer, is split per class again with floor(val_frac * n_c) to validation.
SplitSpec stratified_split(const LabelSet& labels, const MultilayerDataset& dataset, const std::string& test_layer,
                           double test_frac, double val_frac, std::uint64_t seed);

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig hp;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::uint64_t t = 0;

    static AdamState for_params(const ModelParams& params, AdamConfig hp);
};

/// Bias-corrected Adam update of every parameter in place.
void adam_step(ModelParams& params, std::span<const Tensor> grads, AdamState& state);

/// Average precision: mean over positives of the precision at their rank.
/// Ranking is by descending score, ties by ascending id (`ids`, or position
/// when empty). Throws when there is no positive.
double auprc(std::span<const double> scores, std::span<const int> labels, std::span<const std::size_t> ids = {});

struct TrainConfig {
    std::size_t epochs = 2000;
    AdamConfig adam;
    double positive_weight = 1.0;
    std::uint64_t seed = 0;
};

struct TrainReport {
    std::vector<double> epoch_loss;
    std::vector<double> val_auprc;  // NaN when the validation set has no positive
    std::size_t best_epoch = 0;
    double best_val_auprc = 0.0;
    double test_auprc = 0.0;
    std::uint64_t seed = 0;
    GnnConfig model;
    TrainConfig training;
    double wall_seconds = 0.0;  // excluded from the JSON report
};

struct TrainResult {
    ModelParams params;
    TrainReport report;
};

/// Called once per epoch with the ids whose labels enter the loss.
using EpochObserver = std::function<void(std::size_t epoch, std::span<const std::size_t> loss_ids, double loss)>;

/// Full-batch training; returns the parameters of the best validation epoch.
TrainResult train(const GnnConfig& cfg, const TrainConfig& tcfg, const MultilayerDataset& dataset,
                  const SplitSpec& split, const EpochObserver& observer = {});

/// AUPRC of the model on `ids`, scored by logit.
double evaluate_auprc(const ModelParams& params, const GnnConfig& cfg, const PreparedGraphs& graphs,
                      const MultilayerDataset& dataset, std::span<const std::size_t> ids);

}  // namespace emgnn
