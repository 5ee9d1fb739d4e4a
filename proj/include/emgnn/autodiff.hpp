#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emgnn/sparse.hpp"
#include "emgnn/tensor.hpp"

// Reverse-mode automatic differentiation over dense tensors and
// edge-weighted sparse adjacencies.
//
// A Tape records every operation in creation order, which is a topological
// order; backward walks it once in reverse. Edge weights enter spmm as an
// ordinary nnz x 1 variable, so gradients with respect to them come for free.
namespace emgnn::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

/// Sparse adjacency pattern plus one weight per stored entry.
struct SparseWeighted {
    std::shared_ptr<const SparseStructure> structure;
    Tensor weights;  // nnz x 1
};

class GradSink;

using BackwardFn = std::function<void(const Tensor& grad_out, GradSink& sink)>;

class Gradients {
public:
    /// Gradient of the loss with respect to `v`; zeros if `v` was not reached.
    Tensor of(Var v) const;
    bool reached(Var v) const { return v.id < grads_.size() && grads_[v.id].has_value(); }

private:
    friend class Tape;
    std::vector<std::optional<Tensor>> grads_;
    std::vector<std::pair<std::size_t, std::size_t>> shapes_;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Differentiable input (weights, features, edge weights).
    Var variable(Tensor value);
    /// Input excluded from differentiation.
    Var constant(Tensor value);

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    std::size_t size() const noexcept { return nodes_.size(); }
    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

    /// Reverse accumulation from a 1x1 loss node.
    Gradients backward(Var loss) const;

    /// Appends an op node. `backward` is invoked only when the node is reached
    /// and at least one input requires a gradient.
    Var record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

private:
    struct Node {
        Tensor value;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
};

/// Accumulation target handed to backward functions.
class GradSink {
public:
    /// Zero-initialized on first use; nullptr when the input needs no gradient.
    Tensor* grad(std::size_t input_slot);

private:
    friend class Tape;
    GradSink(const Tape& tape, std::vector<std::optional<Tensor>>& grads,
             const std::vector<std::size_t>& inputs)
        : tape_(tape), grads_(grads), inputs_(inputs) {}
    const Tape& tape_;
    std::vector<std::optional<Tensor>>& grads_;
    const std::vector<std::size_t>& inputs_;
};

Var matmul(Var a, Var b);
/// out[u] = sum over row u entries k of w[k] * h[col(k)].
Var spmm(std::shared_ptr<const SparseStructure> structure, Var weights, Var h);
/// Softmax of per-entry logits within each row (destination group) of `structure`.
Var neighbor_softmax(std::shared_ptr<const SparseStructure> structure, Var logits);
Var relu(Var x);
Var leaky_relu(Var x, double slope);
Var add(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var x, double c);
/// x (n x c) plus bias (1 x c) added to every row.
Var add_row_bias(Var x, Var bias);
Var row_gather(Var x, std::vector<std::size_t> ids);
Var concat_rows(const std::vector<Var>& parts);
/// Sum of all entries as 1x1.
Var sum(Var x);
/// Mean binary cross-entropy of n x 1 logits against 0/1 targets. Positive
/// targets are weighted by `positive_weight`; the mean divides by n.
Var cross_entropy_logits(Var logits, std::vector<double> targets, double positive_weight = 1.0);

}  // namespace emgnn::ad
