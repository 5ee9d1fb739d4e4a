#include "emgnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "emgnn/error.hpp"
#include "emgnn/kernels.hpp"

namespace emgnn::ad {

const Tensor& Var::value() const { return tape->value(*this); }

Tensor Gradients::of(Var v) const {
    if (reached(v)) return *grads_[v.id];
    const auto [r, c] = shapes_.at(v.id);
    return Tensor(r, c);
}

Tensor* GradSink::grad(std::size_t input_slot) {
    const std::size_t id = inputs_[input_slot];
    if (!tape_.requires_grad(Var{nullptr, id})) return nullptr;
    auto& slot = grads_[id];
    if (!slot) {
        const Tensor& v = tape_.value(Var{nullptr, id});
        slot.emplace(v.rows(), v.cols());
    }
    return &*slot;
}

Var Tape::variable(Tensor value) {
    if (!value.all_finite()) throw NumericError("autodiff: non-finite variable");
    nodes_.push_back(Node{std::move(value), {}, {}, true});
    return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
    if (!value.all_finite()) throw NumericError("autodiff: non-finite constant");
    nodes_.push_back(Node{std::move(value), {}, {}, false});
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
    if (!value.all_finite()) {
        throw NumericError(std::string("autodiff: non-finite value produced by ") + op);
    }
    const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                   [&](std::size_t id) { return nodes_[id].requires_grad; });
    nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backward), needs});
    return Var{this, nodes_.size() - 1};
}

Gradients Tape::backward(Var loss) const {
    const Tensor& l = value(loss);
    if (l.rows() != 1 || l.cols() != 1) {
        throw ConfigError("backward: loss must be 1x1, got " + l.shape_string());
    }
    Gradients out;
    out.grads_.resize(nodes_.size());
    out.shapes_.reserve(nodes_.size());
    for (const auto& n : nodes_) out.shapes_.emplace_back(n.value.rows(), n.value.cols());
    if (!nodes_[loss.id].requires_grad) return out;

    out.grads_[loss.id].emplace(1, 1, 1.0);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        const Node& n = nodes_[i];
        if (!out.grads_[i] || !n.requires_grad || !n.backward) continue;
        GradSink sink(*this, out.grads_, n.inputs);
        n.backward(*out.grads_[i], sink);
    }
    // Intermediate nodes keep their gradients; callers ask only for what they need.
    return out;
}

namespace {

Tape& tape_of(Var a) {
    if (a.tape == nullptr) throw ConfigError("autodiff: variable is not attached to a tape");
    return *a.tape;
}

void same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw ConfigError("autodiff: variables belong to different tapes");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ConfigError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                          b.shape_string());
    }
}

void add_into(Tensor& dst, const Tensor& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Var matmul(Var a, Var b) {
    same_tape(a, b);
    Tape& t = tape_of(a);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.rows()) {
        throw ConfigError("matmul: shape mismatch " + av.shape_string() + " x " + bv.shape_string());
    }
    Tensor out;
    kernels::matmul(av, bv, out);
    const Tape* tp = &t;
    const std::size_t ia = a.id, ib = b.id;
    return t.record("matmul", std::move(out), {ia, ib}, [tp, ia, ib](const Tensor& g, GradSink& sink) {
        Tensor tmp;
        if (Tensor* da = sink.grad(0)) {
            kernels::matmul_nt(g, tp->value(Var{nullptr, ib}), tmp);
            add_into(*da, tmp);
        }
        if (Tensor* db = sink.grad(1)) {
            kernels::matmul_tn(tp->value(Var{nullptr, ia}), g, tmp);
            add_into(*db, tmp);
        }
    });
}

Var spmm(std::shared_ptr<const SparseStructure> structure, Var weights, Var h) {
    same_tape(weights, h);
    Tape& t = tape_of(h);
    const Tensor& wv = weights.value();
    const Tensor& hv = h.value();
    if (wv.cols() != 1 || wv.rows() != structure->nnz()) {
        throw ConfigError("spmm: weights must be " + std::to_string(structure->nnz()) + "x1, got " +
                          wv.shape_string());
    }
    if (hv.rows() != structure->cols()) {
        throw ConfigError("spmm: adjacency has " + std::to_string(structure->cols()) +
                          " columns but features have " + std::to_string(hv.rows()) + " rows");
    }
    Tensor out;
    kernels::spmm(*structure, wv.values(), hv, out);
    const Tape* tp = &t;
    const std::size_t iw = weights.id, ih = h.id;
    return t.record("spmm", std::move(out), {iw, ih},
                    [tp, iw, ih, s = std::move(structure)](const Tensor& g, GradSink& sink) {
                        if (Tensor* dw = sink.grad(0)) {
                            std::vector<double> tmp(s->nnz());
                            kernels::spmm_grad_w(*s, g, tp->value(Var{nullptr, ih}), tmp);
                            for (std::size_t k = 0; k < tmp.size(); ++k) (*dw)[k] += tmp[k];
                        }
                        if (Tensor* dh = sink.grad(1)) {
                            Tensor tmp;
                            kernels::spmm_grad_h(*s, tp->value(Var{nullptr, iw}).values(), g, tmp);
                            add_into(*dh, tmp);
                        }
                    });
}

Var neighbor_softmax(std::shared_ptr<const SparseStructure> structure, Var logits) {
    Tape& t = tape_of(logits);
    const Tensor& lv = logits.value();
    if (lv.cols() != 1 || lv.rows() != structure->nnz()) {
        throw ConfigError("neighbor_softmax: logits must be " + std::to_string(structure->nnz()) +
                          "x1, got " + lv.shape_string());
    }
    Tensor out(lv.rows(), 1);
    for (std::size_t r = 0; r < structure->rows(); ++r) {
        const std::size_t b = structure->row_begin(r), e = structure->row_end(r);
        if (b == e) continue;
        double m = lv[b];
        for (std::size_t k = b + 1; k < e; ++k) m = std::max(m, lv[k]);
        double total = 0.0;
        for (std::size_t k = b; k < e; ++k) {
            out[k] = std::exp(lv[k] - m);
            total += out[k];
        }
        for (std::size_t k = b; k < e; ++k) out[k] /= total;
    }
    const Tape* tp = &t;
    const std::size_t il = logits.id;
    const std::size_t self = t.size();
    return t.record("neighbor_softmax", std::move(out), {il},
                    [tp, self, s = std::move(structure)](const Tensor& g, GradSink& sink) {
                        Tensor* dl = sink.grad(0);
                        if (!dl) return;
                        const Tensor& y = tp->value(Var{nullptr, self});
                        for (std::size_t r = 0; r < s->rows(); ++r) {
                            const std::size_t b = s->row_begin(r), e = s->row_end(r);
                            double dot = 0.0;
                            for (std::size_t k = b; k < e; ++k) dot += y[k] * g[k];
                            for (std::size_t k = b; k < e; ++k) (*dl)[k] += y[k] * (g[k] - dot);
                        }
                    });
}

Var relu(Var x) {
    Tape& t = tape_of(x);
    Tensor out = x.value();
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    const Tape* tp = &t;
    const std::size_t ix = x.id;
    return t.record("relu", std::move(out), {ix}, [tp, ix](const Tensor& g, GradSink& sink) {
        Tensor* dx = sink.grad(0);
        if (!dx) return;
        const Tensor& xv = tp->value(Var{nullptr, ix});
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (xv[i] > 0.0) (*dx)[i] += g[i];
        }
    });
}

Var leaky_relu(Var x, double slope) {
    Tape& t = tape_of(x);
    Tensor out = x.value();
    for (double& v : out.values()) v = v > 0.0 ? v : slope * v;
    const Tape* tp = &t;
    const std::size_t ix = x.id;
    return t.record("leaky_relu", std::move(out), {ix}, [tp, ix, slope](const Tensor& g, GradSink& sink) {
        Tensor* dx = sink.grad(0);
        if (!dx) return;
        const Tensor& xv = tp->value(Var{nullptr, ix});
        for (std::size_t i = 0; i < g.size(); ++i) (*dx)[i] += xv[i] > 0.0 ? g[i] : slope * g[i];
    });
}

Var add(Var a, Var b) {
    same_tape(a, b);
    Tape& t = tape_of(a);
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return t.record("add", std::move(out), {a.id, b.id}, [](const Tensor& g, GradSink& sink) {
        if (Tensor* da = sink.grad(0)) add_into(*da, g);
        if (Tensor* db = sink.grad(1)) add_into(*db, g);
    });
}

Var hadamard(Var a, Var b) {
    same_tape(a, b);
    Tape& t = tape_of(a);
    require_same_shape(a.value(), b.value(), "hadamard");
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    const Tape* tp = &t;
    const std::size_t ia = a.id, ib = b.id;
    return t.record("hadamard", std::move(out), {ia, ib}, [tp, ia, ib](const Tensor& g, GradSink& sink) {
        if (Tensor* da = sink.grad(0)) {
            const Tensor& bv = tp->value(Var{nullptr, ib});
            for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i] * bv[i];
        }
        if (Tensor* db = sink.grad(1)) {
            const Tensor& av = tp->value(Var{nullptr, ia});
            for (std::size_t i = 0; i < g.size(); ++i) (*db)[i] += g[i] * av[i];
        }
    });
}

Var scale(Var x, double c) {
    Tape& t = tape_of(x);
    Tensor out = x.value();
    for (double& v : out.values()) v *= c;
    return t.record("scale", std::move(out), {x.id}, [c](const Tensor& g, GradSink& sink) {
        Tensor* dx = sink.grad(0);
        if (!dx) return;
        for (std::size_t i = 0; i < g.size(); ++i) (*dx)[i] += c * g[i];
    });
}

Var add_row_bias(Var x, Var bias) {
    same_tape(x, bias);
    Tape& t = tape_of(x);
    const Tensor& bv = bias.value();
    if (bv.rows() != 1 || bv.cols() != x.cols()) {
        throw ConfigError("add_row_bias: bias must be 1x" + std::to_string(x.cols()) + ", got " +
                          bv.shape_string());
    }
    Tensor out = x.value();
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv[c];
    }
    return t.record("add_row_bias", std::move(out), {x.id, bias.id}, [](const Tensor& g, GradSink& sink) {
        if (Tensor* dx = sink.grad(0)) add_into(*dx, g);
        if (Tensor* db = sink.grad(1)) {
            for (std::size_t r = 0; r < g.rows(); ++r) {
                for (std::size_t c = 0; c < g.cols(); ++c) (*db)[c] += g(r, c);
            }
        }
    });
}

Var row_gather(Var x, std::vector<std::size_t> ids) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    Tensor out(ids.size(), xv.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= xv.rows()) {
            throw ConfigError("row_gather: id " + std::to_string(ids[i]) + " out of range for " +
                              std::to_string(xv.rows()) + " rows");
        }
        std::copy_n(xv.row(ids[i]).data(), xv.cols(), out.row(i).data());
    }
    return t.record("row_gather", std::move(out), {x.id}, [ids = std::move(ids)](const Tensor& g, GradSink& sink) {
        Tensor* dx = sink.grad(0);
        if (!dx) return;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            auto src = g.row(i);
            auto dst = dx->row(ids[i]);
            for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ConfigError("concat_rows: no inputs");
    Tape& t = tape_of(parts.front());
    const std::size_t cols = parts.front().cols();
    std::size_t rows = 0;
    std::vector<std::size_t> inputs;
    for (Var p : parts) {
        same_tape(parts.front(), p);
        if (p.cols() != cols) throw ConfigError("concat_rows: column count mismatch");
        rows += p.rows();
        inputs.push_back(p.id);
    }
    Tensor out(rows, cols);
    std::vector<std::size_t> sizes;
    std::size_t offset = 0;
    for (Var p : parts) {
        std::copy(p.value().values().begin(), p.value().values().end(), out.data() + offset);
        offset += p.value().size();
        sizes.push_back(p.value().size());
    }
    return t.record("concat_rows", std::move(out), std::move(inputs),
                    [sizes = std::move(sizes)](const Tensor& g, GradSink& sink) {
                        std::size_t offset = 0;
                        for (std::size_t slot = 0; slot < sizes.size(); ++slot) {
                            if (Tensor* d = sink.grad(slot)) {
                                for (std::size_t i = 0; i < sizes[slot]; ++i) (*d)[i] += g[offset + i];
                            }
                            offset += sizes[slot];
                        }
                    });
}

Var sum(Var x) {
    Tape& t = tape_of(x);
    double acc = 0.0;
    for (double v : x.value().values()) acc += v;
    return t.record("sum", Tensor(1, 1, acc), {x.id}, [](const Tensor& g, GradSink& sink) {
        Tensor* dx = sink.grad(0);
        if (!dx) return;
        for (double& v : dx->values()) v += g[0];
    });
}

Var cross_entropy_logits(Var logits, std::vector<double> targets, double positive_weight) {
    Tape& t = tape_of(logits);
    const Tensor& z = logits.value();
    if (z.cols() != 1 || z.rows() != targets.size()) {
        throw ConfigError("cross_entropy_logits: logits " + z.shape_string() + " vs " +
                          std::to_string(targets.size()) + " targets");
    }
    if (targets.empty()) throw ConfigError("cross_entropy_logits: empty batch");
    for (double y : targets) {
        if (y != 0.0 && y != 1.0) throw ConfigError("cross_entropy_logits: targets must be 0 or 1");
    }
    // softplus(v) = log(1 + e^v), evaluated without overflow.
    auto softplus = [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); };
    const double n = static_cast<double>(targets.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        acc += targets[i] == 1.0 ? positive_weight * softplus(-z[i]) : softplus(z[i]);
    }
    const Tape* tp = &t;
    const std::size_t iz = logits.id;
    return t.record("cross_entropy_logits", Tensor(1, 1, acc / n), {iz},
                    [tp, iz, n, positive_weight, targets = std::move(targets)](const Tensor& g, GradSink& sink) {
                        Tensor* dz = sink.grad(0);
                        if (!dz) return;
                        const Tensor& zv = tp->value(Var{nullptr, iz});
                        for (std::size_t i = 0; i < targets.size(); ++i) {
                            const double p = 1.0 / (1.0 + std::exp(-zv[i]));
                            const double d = targets[i] == 1.0 ? positive_weight * (p - 1.0) : p;
                            (*dz)[i] += g[0] * d / n;
                        }
                    });
}

}  // namespace emgnn::ad
