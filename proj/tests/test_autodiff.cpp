#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "flatgcd/autodiff.hpp"
#include "flatgcd/rng.hpp"

using namespace flatgcd;

TEST_CASE("forward values match textbook definitions") {
    Tape tape;
    const Var a = tape.constant(Tensor({2, 2}, {1, 2, 3, 4}));
    const Var b = tape.constant(Tensor({2, 1}, {1, 1}));
    const Tensor& c = tape.value(tape.matmul(a, b));
    CHECK(c[0] == 3.0);
    CHECK(c[1] == 7.0);

    const Var v = tape.constant(Tensor({1, 2}, {3, 4}));
    const Tensor& n = tape.value(tape.l2norm_rows(v));
    CHECK(n[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(n[1] == doctest::Approx(0.8).epsilon(1e-12));

    const Var z = tape.constant(Tensor({1, 3}, {0, 0, 0}));
    const Tensor& p = tape.value(tape.softmax_rows(z, 1.0));
    for (size_t i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("shape mismatches raise dimension errors") {
    Tape tape;
    const Var a = tape.constant(Tensor({2, 3}));
    const Var b = tape.constant(Tensor({2, 3}));
    CHECK_THROWS_AS(tape.matmul(a, b), DimError);
    CHECK_THROWS_AS(tape.add(a, tape.constant(Tensor({3, 2}))), DimError);
}

TEST_CASE("non-finite forward values raise numeric errors") {
    Tape tape;
    const Var a = tape.constant(Tensor({1, 2}, {-1.0, 2.0}));
    CHECK_THROWS_AS(tape.log(a), NumericError);
}

TEST_CASE("backward of a square: d(theta^2)/dtheta = 2 theta") {
    Tape tape;
    const Var theta = tape.leaf(Tensor::scalar(3.0));
    const Var loss = tape.mul(theta, theta);
    tape.backward(loss);
    CHECK(tape.grad(theta)[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("backward rejects non-scalar outputs") {
    Tape tape;
    const Var a = tape.leaf(Tensor({1, 2}, {1, 2}));
    CHECK_THROWS_AS(tape.backward(a), ContractError);
}

TEST_CASE("softmax cross-entropy gradient equals p - onehot") {
    // L = -log softmax(logits)[0] with logits [1, 0]
    const ScalarFn fn = [](Tape& tape, const std::vector<Var>& vars) {
        const Var p = tape.softmax_rows(vars[0], 1.0);
        const Var picked = tape.rowsum(tape.mul(p, tape.constant(Tensor({1, 2}, {1, 0}))));
        return tape.scale(tape.sum(tape.log(picked)), -1.0);
    };
    std::vector<Tensor> params = {Tensor({1, 2}, {1.0, 0.0})};

    std::vector<Tensor> grads;
    eval_with_grads(fn, params, grads);
    const double p0 = std::exp(1.0) / (std::exp(1.0) + 1.0);
    CHECK(grads[0][0] == doctest::Approx(p0 - 1.0).epsilon(1e-10));
    CHECK(grads[0][1] == doctest::Approx(1.0 - p0).epsilon(1e-10));

    const GradCheckReport r = grad_check(fn, params, 1e-5, 1e-4);
    CHECK(r.pass);
}

TEST_CASE("sum of row-normalized vector against weights matches finite differences") {
    Rng rng(11);
    Tensor v = Tensor::zeros(1, 5), w = Tensor::zeros(1, 5);
    for (auto& x : v.values()) x = rng.normal();
    for (auto& x : w.values()) x = rng.normal();

    const ScalarFn fn = [&](Tape& tape, const std::vector<Var>& vars) {
        return tape.dot(tape.l2norm_rows(vars[0]), tape.constant(w));
    };
    const GradCheckReport r = grad_check(fn, {v}, 1e-5, 1e-4);
    CHECK(r.pass);
    CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("gradient check is near-exact on a quadratic") {
    const Tensor a({3, 3}, {2, 0.5, 0, 0.5, 3, 0.1, 0, 0.1, 1});
    const ScalarFn fn = [&](Tape& tape, const std::vector<Var>& vars) {
        const Var av = tape.matmul(tape.constant(a), vars[0]);
        return tape.scale(tape.dot(vars[0], av), 0.5);
    };
    const GradCheckReport r = grad_check(fn, {Tensor({3, 1}, {1.0, -2.0, 0.5})}, 1e-5, 1e-8);
    CHECK(r.pass);
    CHECK(r.max_rel_err < 1e-8);
}

namespace {

// One randomized scalar graph touching the op under test.
ScalarFn graph_for_op(int op, const Tensor& aux) {
    return [op, aux](Tape& tape, const std::vector<Var>& vars) -> Var {
        const Var x = vars[0];
        switch (op) {
        case 0: return tape.mean(tape.matmul(x, tape.constant(aux)));
        case 1: return tape.mean(tape.matmul_nt(x, tape.constant(aux)));
        case 2: return tape.mean(tape.add(x, vars[1]));
        case 3: return tape.mean(tape.add_rowvec(x, vars[2]));
        case 4: return tape.mean(tape.add_colvec(x, vars[3]));
        case 5: return tape.mean(tape.mul(x, vars[1]));
        case 6: return tape.mean(tape.scale(x, -2.5));
        case 7: return tape.mean(tape.relu(x));
        case 8: return tape.mean(tape.l2norm_rows(x));
        case 9: return tape.mean(tape.softmax_rows(x, 0.25));
        case 10: return tape.mean(tape.log(tape.softmax_rows(x, 1.0)));
        case 11: return tape.mean(tape.exp(tape.scale(x, 0.3)));
        case 12: return tape.sum(tape.mul(x, vars[1]));
        case 13: return tape.mean(tape.rowsum(tape.mul(x, x)));
        case 14: return tape.dot(x, vars[1]);
        default: return tape.mean(tape.concat_rows(x, vars[1]));
        }
    };
}

} // namespace

TEST_CASE("every differentiable op passes finite-difference checks on random instances") {
    size_t instances = 0;
    for (int op = 0; op <= 15; ++op) {
        for (uint64_t seed = 0; seed < 7; ++seed) {
            Rng rng(1000 * op + seed);
            const size_t r = 2 + rng.below(3), c = 2 + rng.below(3);
            Tensor x = Tensor::zeros(r, c), y = Tensor::zeros(r, c);
            Tensor rowv = Tensor::zeros(1, c), colv = Tensor::zeros(r, 1), aux = Tensor::zeros(c, c);
            for (auto& v : x.values()) v = rng.normal();
            for (auto& v : y.values()) v = rng.normal();
            for (auto& v : rowv.values()) v = rng.normal();
            for (auto& v : colv.values()) v = rng.normal();
            for (auto& v : aux.values()) v = rng.normal();
            if (op == 7) // keep relu away from its kink
                for (auto& v : x.values())
                    if (std::abs(v) < 1e-2) v += 0.1;

            const GradCheckReport rep = grad_check(graph_for_op(op, aux), {x, y, rowv, colv}, 1e-5, 1e-4);
            CHECK_MESSAGE(rep.pass, "op ", op, " seed ", seed, " err ", rep.max_rel_err);
            ++instances;
        }
    }
    CHECK(instances >= 100);
}

TEST_CASE("backward is linear: grad(L1 + L2) = grad(L1) + grad(L2)") {
    Rng rng(21);
    Tensor x = Tensor::zeros(3, 3);
    for (auto& v : x.values()) v = rng.normal();

    const ScalarFn f1 = [](Tape& t, const std::vector<Var>& v) { return t.mean(t.exp(t.scale(v[0], 0.5))); };
    const ScalarFn f2 = [](Tape& t, const std::vector<Var>& v) { return t.sum(t.mul(v[0], v[0])); };
    const ScalarFn fsum = [&](Tape& t, const std::vector<Var>& v) { return t.add(f1(t, v), f2(t, v)); };

    std::vector<Tensor> g1, g2, gs;
    eval_with_grads(f1, {x}, g1);
    eval_with_grads(f2, {x}, g2);
    eval_with_grads(fsum, {x}, gs);
    for (size_t i = 0; i < x.numel(); ++i)
        CHECK(std::abs(gs[0][i] - (g1[0][i] + g2[0][i])) < 1e-12);
}

TEST_CASE("forward+backward is bit-identical across reruns") {
    auto run = [](std::vector<double>& out) {
        Rng rng(99);
        Tensor x = Tensor::zeros(4, 4);
        for (auto& v : x.values()) v = rng.normal();
        Tape tape;
        const Var leaf = tape.leaf(x);
        const Var loss = tape.mean(tape.log(tape.softmax_rows(tape.matmul_nt(leaf, leaf), 0.5)));
        tape.backward(loss);
        out.assign(tape.grad(leaf).values().begin(), tape.grad(leaf).values().end());
        out.push_back(tape.value(loss)[0]);
    };
    std::vector<double> a, b;
    run(a);
    run(b);
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}
