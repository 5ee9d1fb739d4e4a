#include "emgnn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "emgnn/error.hpp"
#include "emgnn/rng.hpp"

namespace emgnn {

SplitSpec stratified_split(const LabelSet& labels, const MultilayerDataset& dataset, const std::string& test_layer,
                           double test_frac, double val_frac, std::uint64_t seed) {
    const auto layer_idx = dataset.layer_index(test_layer);
    if (!layer_idx) throw ConfigError("split: test layer '" + test_layer + "' does not exist");
    if (!(test_frac >= 0.0 && test_frac < 1.0) || !(val_frac >= 0.0 && val_frac < 1.0)) {
        throw ConfigError("split: fractions must lie in [0, 1)");
    }
    const LayerGraph& layer = dataset.layers[*layer_idx];

    // Index 0 holds negatives, 1 positives; both in ascending id before shuffling.
    std::vector<std::size_t> in_layer[2];
    std::vector<std::size_t> elsewhere[2];
    for (const auto& [id, label] : labels.labels) {
        const int c = label == Label::positive ? 1 : 0;
        (layer.contains(id) ? in_layer[c] : elsewhere[c]).push_back(id);
    }
    for (int c = 0; c < 2; ++c) {
        if (in_layer[c].empty()) {
            throw DataError("split: test layer '" + test_layer + "' has no labeled " +
                            (c == 1 ? "positive" : "negative") + " genes");
        }
    }

    Rng rng(seed);
    SplitSpec split;
    split.test_layer = test_layer;
    split.seed = seed;
    std::vector<std::size_t> pool[2];
    for (int c = 0; c < 2; ++c) {
        auto& ids = in_layer[c];
        rng.shuffle(std::span<std::size_t>(ids));
        const auto n_test = static_cast<std::size_t>(std::floor(test_frac * static_cast<double>(ids.size())));
        split.test_ids.insert(split.test_ids.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
        pool[c].assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
        pool[c].insert(pool[c].end(), elsewhere[c].begin(), elsewhere[c].end());
        std::sort(pool[c].begin(), pool[c].end());
    }
    for (int c = 0; c < 2; ++c) {
        auto& ids = pool[c];
        rng.shuffle(std::span<std::size_t>(ids));
        const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(ids.size())));
        split.val_ids.insert(split.val_ids.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
        split.train_ids.insert(split.train_ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
    }
    std::sort(split.test_ids.begin(), split.test_ids.end());
    std::sort(split.val_ids.begin(), split.val_ids.end());
    std::sort(split.train_ids.begin(), split.train_ids.end());
    return split;
}

AdamState AdamState::for_params(const ModelParams& params, AdamConfig hp) {
    AdamState s;
    s.hp = hp;
    for (const auto& t : params.tensors) {
        s.m.emplace_back(t.value.rows(), t.value.cols());
        s.v.emplace_back(t.value.rows(), t.value.cols());
    }
    return s;
}

void adam_step(ModelParams& params, std::span<const Tensor> grads, AdamState& state) {
    if (grads.size() != params.tensors.size() || state.m.size() != params.tensors.size()) {
        throw ConfigError("adam_step: parameter, gradient and state counts differ");
    }
    ++state.t;
    const auto& hp = state.hp;
    const double t = static_cast<double>(state.t);
    const double bc1 = 1.0 - std::pow(hp.beta1, t);
    const double bc2 = 1.0 - std::pow(hp.beta2, t);
    for (std::size_t p = 0; p < grads.size(); ++p) {
        Tensor& w = params.tensors[p].value;
        const Tensor& g = grads[p];
        if (!g.same_shape(w)) throw ConfigError("adam_step: gradient shape mismatch for " + params.tensors[p].name);
        Tensor& m = state.m[p];
        Tensor& v = state.v[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
            v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            w[i] -= hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
        }
    }
}

double auprc(std::span<const double> scores, std::span<const int> labels, std::span<const std::size_t> ids) {
    if (scores.size() != labels.size() || (!ids.empty() && ids.size() != scores.size())) {
        throw ConfigError("auprc: scores, labels and ids must have equal length");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    auto id_of = [&](std::size_t i) { return ids.empty() ? i : ids[i]; };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return id_of(a) < id_of(b);
    });
    std::size_t positives = 0;
    for (int y : labels) positives += y == 1 ? 1 : 0;
    if (positives == 0) throw DataError("auprc: no positive labels");

    // Extended accumulator so short lists round like the exact rational value.
    long double precision_sum = 0.0L;
    std::size_t tp = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (labels[order[r]] == 1) {
            ++tp;
            precision_sum += static_cast<long double>(tp) / static_cast<long double>(r + 1);
        }
    }
    return static_cast<double>(precision_sum / static_cast<long double>(positives));
}

namespace {

std::vector<double> targets_for(const LabelSet& labels, std::span<const std::size_t> ids) {
    std::vector<double> t;
    t.reserve(ids.size());
    for (std::size_t id : ids) {
        const auto l = labels.find(id);
        if (!l) throw DataError("training: gene id " + std::to_string(id) + " has no label");
        t.push_back(*l == Label::positive ? 1.0 : 0.0);
    }
    return t;
}

std::vector<int> int_labels(const LabelSet& labels, std::span<const std::size_t> ids) {
    std::vector<int> out;
    for (double t : targets_for(labels, ids)) out.push_back(t == 1.0 ? 1 : 0);
    return out;
}

bool has_positive(const LabelSet& labels, std::span<const std::size_t> ids) {
    return std::any_of(ids.begin(), ids.end(), [&](std::size_t id) { return labels.find(id) == Label::positive; });
}

double auprc_at(std::span<const double> logits, const LabelSet& labels, std::span<const std::size_t> ids) {
    std::vector<double> s;
    s.reserve(ids.size());
    for (std::size_t id : ids) s.push_back(logits[id]);
    const auto y = int_labels(labels, ids);
    return auprc(s, y, ids);
}

}  // namespace

double evaluate_auprc(const ModelParams& params, const GnnConfig& cfg, const PreparedGraphs& graphs,
                      const MultilayerDataset& dataset, std::span<const std::size_t> ids) {
    const auto logits = forward_logits(params, cfg, graphs, dataset.features.values);
    return auprc_at(logits, dataset.labels, ids);
}

TrainResult train(const GnnConfig& cfg, const TrainConfig& tcfg, const MultilayerDataset& dataset,
                  const SplitSpec& split, const EpochObserver& observer) {
    const auto start = std::chrono::steady_clock::now();
    cfg.validate();
    dataset.validate();
    if (split.train_ids.empty()) throw DataError("training: empty training set");
    const std::vector<double> targets = targets_for(dataset.labels, split.train_ids);
    if (std::find(targets.begin(), targets.end(), 1.0) == targets.end() ||
        std::find(targets.begin(), targets.end(), 0.0) == targets.end()) {
        throw DataError("training: the training set needs at least one positive and one negative gene");
    }
    const bool select_on_val = has_positive(dataset.labels, split.val_ids);

    const PreparedGraphs graphs = prepare_graphs(dataset);
    TrainResult result;
    result.params = init_params(cfg, dataset.num_features(), tcfg.seed);
    AdamState state = AdamState::for_params(result.params, tcfg.adam);
    TrainReport& report = result.report;
    report.seed = tcfg.seed;
    report.model = cfg;
    report.training = tcfg;

    ModelParams best = result.params;
    double best_val = -std::numeric_limits<double>::infinity();
    std::size_t best_epoch = tcfg.epochs;

    for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        ad::Tape tape;
        std::vector<ad::Var> vars;
        ad::Var loss;
        try {
            vars = bind_params(tape, result.params, true);
            const ad::Var x = tape.constant(dataset.features.values);
            const ForwardVars fv = forward_on_tape(cfg, vars, graphs, x);
            loss = ad::cross_entropy_logits(ad::row_gather(fv.logits, split.train_ids), targets, tcfg.positive_weight);
            if (observer) observer(epoch, split.train_ids, loss.value()[0]);
            report.epoch_loss.push_back(loss.value()[0]);
            if (select_on_val) {
                const double val = auprc_at(fv.logits.value().values(), dataset.labels, split.val_ids);
                report.val_auprc.push_back(val);
                // Ties go to the later epoch: small validation sets saturate early.
                if (val >= best_val) {
                    best_val = val;
                    best = result.params;
                    best_epoch = epoch;
                }
            } else {
                report.val_auprc.push_back(std::numeric_limits<double>::quiet_NaN());
            }
        } catch (const NumericError& e) {
            throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        }
        const ad::Gradients grads = tape.backward(loss);
        std::vector<Tensor> g;
        g.reserve(vars.size());
        for (const ad::Var& v : vars) g.push_back(grads.of(v));
        adam_step(result.params, g, state);
        if (!result.params.all_finite()) {
            throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": non-finite parameters");
        }
    }

    if (select_on_val) {
        result.params = std::move(best);
        report.best_val_auprc = best_val;
    } else {
        report.best_val_auprc = std::numeric_limits<double>::quiet_NaN();
    }
    report.best_epoch = best_epoch;
    report.test_auprc = split.test_ids.empty() || !has_positive(dataset.labels, split.test_ids)
                            ? std::numeric_limits<double>::quiet_NaN()
                            : evaluate_auprc(result.params, cfg, graphs, dataset, split.test_ids);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace emgnn
