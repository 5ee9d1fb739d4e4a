#include <doctest.h>

#include <cmath>
#include <random>

#include "emgnn/autodiff.hpp"
#include "emgnn/error.hpp"
#include "emgnn/gnn.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace emgnn;
namespace ad = emgnn::ad;


TEST_CASE("matmul examples") {
    ad::Tape tape;
    const ad::Var a = tape.variable(Tensor{{2.0}});
    const ad::Var b = tape.variable(Tensor{{5.0}});
    const ad::Var c = ad::matmul(a, b);
    CHECK(c.value()[0] == 10.0);
    const auto g = tape.backward(c);
    CHECK(g.of(a)[0] == 5.0);
    CHECK(g.of(b)[0] == 2.0);

    const ad::Var eye = tape.constant(Tensor{{1.0, 0.0}, {0.0, 1.0}});
    const ad::Var v = tape.constant(Tensor{{3.0}, {4.0}});
    CHECK(ad::matmul(eye, v).value() == Tensor{{3.0}, {4.0}});
    CHECK_THROWS_AS(ad::matmul(v, v), ConfigError);
}

TEST_CASE("every op matches central finite differences at 10 random points") {
    std::mt19937_64 rng(42);
    for (int point = 0; point < 10; ++point) {
        for (const auto& c : gradcheck::all_ops(rng)) {
            CAPTURE(point);
            CAPTURE(c.op);
            CHECK(c.error < 1e-5);
        }
    }
}

TEST_CASE("spmm examples") {
    ad::Tape tape;
    auto empty = std::make_shared<const SparseStructure>(1, std::vector<std::vector<std::size_t>>{{}});
    const ad::Var out = ad::spmm(empty, tape.constant(Tensor(0, 1)), tape.constant(Tensor{{7.0, 8.0}}));
    CHECK(out.value() == Tensor{{0.0, 0.0}});

    auto single = std::make_shared<const SparseStructure>(2, std::vector<std::vector<std::size_t>>{{1}, {}});
    const ad::Var w = tape.variable(Tensor{{1.0}});
    const ad::Var h = tape.variable(Tensor{{0.0, 0.0}, {2.0, 3.0}});
    const ad::Var m = ad::spmm(single, w, h);
    CHECK(m.value() == Tensor{{2.0, 3.0}, {0.0, 0.0}});
    const auto g = tape.backward(ad::sum(m));
    CHECK(g.of(w)[0] == 5.0);
    CHECK_THROWS_AS(ad::spmm(single, w, tape.constant(Tensor(3, 2))), ConfigError);
}

TEST_CASE("neighbor softmax examples") {
    ad::Tape tape;
    auto s = std::make_shared<const SparseStructure>(
        3, std::vector<std::vector<std::size_t>>{{0}, {0, 1, 2}, {1, 2}});
    const ad::Var out = ad::neighbor_softmax(s, tape.constant(Tensor{{5.0}, {0.0}, {0.0}, {0.0}, {1000.0}, {0.0}}));
    const Tensor& v = out.value();
    CHECK(v[0] == 1.0);
    CHECK(v[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(std::abs(v[1] + v[2] + v[3] - 1.0) < 1e-12);
    CHECK(v[4] == doctest::Approx(1.0));
    CHECK(v[5] < 1e-300);
    CHECK(v.all_finite());
}

TEST_CASE("elementwise and selection examples") {
    ad::Tape tape;
    CHECK(ad::relu(tape.constant(Tensor{{-1.0, 2.0}})).value() == Tensor{{0.0, 2.0}});
    CHECK(ad::leaky_relu(tape.constant(Tensor{{-2.0}}), 0.2).value()[0] == doctest::Approx(-0.4).epsilon(1e-15));
    const ad::Var eye = tape.constant(Tensor{{1.0, 0.0}, {0.0, 1.0}});
    CHECK(ad::row_gather(eye, {0}).value() == Tensor{{1.0, 0.0}});
    CHECK_THROWS_AS(ad::row_gather(eye, {2}), ConfigError);
    CHECK_THROWS_AS(ad::add(eye, tape.constant(Tensor(1, 2))), ConfigError);

    // relu subgradient at exactly 0 is 0
    const ad::Var z = tape.variable(Tensor{{0.0}});
    CHECK(tape.backward(ad::sum(ad::relu(z))).of(z)[0] == 0.0);
}

TEST_CASE("cross entropy examples") {
    ad::Tape tape;
    CHECK(ad::cross_entropy_logits(tape.constant(Tensor{{0.0}}), {1.0}).value()[0] ==
          doctest::Approx(std::log(2.0)).epsilon(1e-15));
    const double saturated = ad::cross_entropy_logits(tape.constant(Tensor{{20.0}}), {1.0}).value()[0];
    CHECK(saturated < 1e-8);
    CHECK(saturated >= 0.0);
    CHECK(std::isfinite(ad::cross_entropy_logits(tape.constant(Tensor{{-800.0}}), {1.0}).value()[0]));
    const ad::Var l = tape.variable(Tensor{{0.3}, {-1.2}});
    const auto g = tape.backward(ad::cross_entropy_logits(l, {1.0, 0.0}));
    CHECK(g.of(l)[0] == doctest::Approx((1.0 / (1.0 + std::exp(-0.3)) - 1.0) / 2.0));
    CHECK(g.of(l)[1] == doctest::Approx((1.0 / (1.0 + std::exp(1.2))) / 2.0));
}

TEST_CASE("backward base cases and errors") {
    ad::Tape tape;
    const ad::Var x = tape.variable(Tensor{{3.0}});
    CHECK(tape.backward(x).of(x)[0] == 1.0);
    CHECK(tape.backward(ad::relu(ad::scale(x, -1.0))).of(x)[0] == 0.0);

    const ad::Var unused = tape.variable(Tensor{{1.0, 2.0}});
    const auto g = tape.backward(x);
    CHECK_FALSE(g.reached(unused));
    CHECK(g.of(unused) == Tensor{{0.0, 0.0}});

    CHECK_THROWS_AS(tape.backward(unused), ConfigError);
}

TEST_CASE("non-finite values raise a numeric error") {
    ad::Tape tape;
    const ad::Var big = tape.constant(Tensor{{1e308}});
    CHECK_THROWS_AS(ad::scale(big, 10.0), NumericError);
    CHECK_THROWS_AS(tape.variable(Tensor{{std::nan("")}}), NumericError);
}

TEST_CASE("backward is linear in the loss") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        ad::Tape tape;
        const ad::Var a = tape.variable(oracle::random_tensor(rng, 3, 4));
        const ad::Var b = tape.variable(oracle::random_tensor(rng, 4, 2));
        const ad::Var h = ad::relu(ad::matmul(a, b));
        const ad::Var l1 = ad::sum(h);
        const ad::Var l2 = ad::sum(ad::hadamard(h, h));
        const ad::Var both = ad::add(l1, l2);
        const auto g1 = tape.backward(l1), g2 = tape.backward(l2), g = tape.backward(both);
        for (const ad::Var v : {a, b}) {
            const Tensor s = g.of(v), p = g1.of(v), q = g2.of(v);
            for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == doctest::Approx(p[i] + q[i]).epsilon(1e-13));
        }
    }
}

TEST_CASE("rerunning an identical tape is bit-identical") {
    auto run = [] {
        std::mt19937_64 rng(9);
        ad::Tape tape;
        const ad::Var a = tape.variable(oracle::random_tensor(rng, 5, 5));
        const ad::Var b = tape.variable(oracle::random_tensor(rng, 5, 3));
        const ad::Var l = ad::sum(ad::leaky_relu(ad::matmul(a, b), 0.2));
        const auto g = tape.backward(l);
        return std::make_pair(g.of(a), g.of(b));
    };
    CHECK(run() == run());
}

TEST_CASE("full forward pass gradients match finite differences") {
    CHECK(gradcheck::full_forward_error(Arch::gcn) < 1e-4);
    CHECK(gradcheck::full_forward_error(Arch::gat) < 1e-4);
}
