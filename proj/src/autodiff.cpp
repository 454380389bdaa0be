#include "flatgcd/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "flatgcd/kernels.hpp"

namespace flatgcd {

namespace {

constexpr double kNormEps = 1e-12; // added inside the sqrt of row normalization

void require(bool cond, const char* msg) {
    if (!cond) throw DimError(msg);
}

} // namespace

int Tape::check(Var v) const {
    if (v.id < 0 || static_cast<size_t>(v.id) >= nodes_.size())
        throw ContractError("Tape: variable does not belong to this tape");
    return v.id;
}

Var Tape::push(Node n, const char* what) {
    if (!n.value.all_finite())
        throw NumericError(std::string("non-finite values produced by ") + what);
    nodes_.push_back(std::move(n));
    grads_ready_ = false;
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor value) {
    Node n = node(OpKind::Leaf);
    n.needs_grad = true;
    n.value = std::move(value);
    return push(std::move(n), "leaf");
}

Var Tape::constant(Tensor value) {
    Node n = node(OpKind::Constant);
    n.needs_grad = false;
    n.value = std::move(value);
    return push(std::move(n), "constant");
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& ta = nodes_[check(a)].value;
    const Tensor& tb = nodes_[check(b)].value;
    require(ta.cols() == tb.rows(), "matmul: inner dimensions differ");
    Node n = node(OpKind::MatMul, a.id, b.id);
    n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
    n.value = Tensor::zeros(ta.rows(), tb.cols());
    kern::matmul(n.value.data(), ta.data(), tb.data(), ta.rows(), ta.cols(), tb.cols());
    return push(std::move(n), "matmul");
}

Var Tape::matmul_nt(Var a, Var b) {
    const Tensor& ta = nodes_[check(a)].value;
    const Tensor& tb = nodes_[check(b)].value;
    require(ta.cols() == tb.cols(), "matmul_nt: inner dimensions differ");
    Node n = node(OpKind::MatMulNT, a.id, b.id);
    n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
    n.value = Tensor::zeros(ta.rows(), tb.rows());
    kern::matmul_nt(n.value.data(), ta.data(), tb.data(), ta.rows(), ta.cols(), tb.rows());
    return push(std::move(n), "matmul_nt");
}

Var Tape::add(Var a, Var b) {
    const Tensor& ta = nodes_[check(a)].value;
    const Tensor& tb = nodes_[check(b)].value;
    require(ta.same_shape(tb), "add: shapes differ");
    Node n = node(OpKind::Add, a.id, b.id);
    n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
    n.value = ta;
    for (size_t i = 0; i < tb.numel(); ++i) n.value[i] += tb[i];
    return push(std::move(n), "add");
}

Var Tape::add_rowvec(Var a, Var b) {
    const Tensor& ta = nodes_[check(a)].value;
    const Tensor& tb = nodes_[check(b)].value;
    require(tb.rows() == 1 && tb.cols() == ta.cols(), "add_rowvec: vector shape mismatch");
    Node n = node(OpKind::AddRowVec, a.id, b.id);
    n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
    n.value = ta;
    for (size_t i = 0; i < ta.rows(); ++i)
        for (size_t j = 0; j < ta.cols(); ++j) n.value.at(i, j) += tb[j];
    return push(std::move(n), "add_rowvec");
}

Var Tape::add_colvec(Var a, Var b) {
    const Tensor& ta = nodes_[check(a)].value;
    const Tensor& tb = nodes_[check(b)].value;
    require(tb.cols() == 1 && tb.rows() == ta.rows(), "add_colvec: vector shape mismatch");
    Node n = node(OpKind::AddColVec, a.id, b.id);
    n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
    n.value = ta;
    for (size_t i = 0; i < ta.rows(); ++i)
        for (size_t j = 0; j < ta.cols(); ++j) n.value.at(i, j) += tb[i];
    return push(std::move(n), "add_colvec");
}

Var Tape::mul(Var a, Var b) {
    const Tensor& ta = nodes_[check(a)].value;
    const Tensor& tb = nodes_[check(b)].value;
    require(ta.same_shape(tb), "mul: shapes differ");
    Node n = node(OpKind::Mul, a.id, b.id);
    n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
    n.value = ta;
    for (size_t i = 0; i < tb.numel(); ++i) n.value[i] *= tb[i];
    return push(std::move(n), "mul");
}

Var Tape::scale(Var a, double s) {
    Node n = node(OpKind::Scale, check(a));
    n.param = s;
    n.needs_grad = nodes_[a.id].needs_grad;
    n.value = nodes_[a.id].value;
    for (auto& v : n.value.values()) v *= s;
    return push(std::move(n), "scale");
}

Var Tape::relu(Var a) {
    Node n = node(OpKind::Relu, check(a));
    n.needs_grad = nodes_[a.id].needs_grad;
    n.value = nodes_[a.id].value;
    for (auto& v : n.value.values()) v = v > 0.0 ? v : 0.0;
    return push(std::move(n), "relu");
}

Var Tape::l2norm_rows(Var a) {
    const Tensor& ta = nodes_[check(a)].value;
    Node n = node(OpKind::L2NormRows, a.id);
    n.needs_grad = nodes_[a.id].needs_grad;
    n.value = ta;
    for (size_t i = 0; i < ta.rows(); ++i) {
        double ss = 0.0;
        for (size_t j = 0; j < ta.cols(); ++j) ss += ta.at(i, j) * ta.at(i, j);
        const double inv = 1.0 / std::sqrt(ss + kNormEps);
        for (size_t j = 0; j < ta.cols(); ++j) n.value.at(i, j) = ta.at(i, j) * inv;
    }
    return push(std::move(n), "l2norm_rows");
}

Var Tape::softmax_rows(Var a, double temperature) {
    if (temperature <= 0.0) throw ConfigError("softmax_rows: temperature must be > 0");
    const Tensor& ta = nodes_[check(a)].value;
    Node n = node(OpKind::SoftmaxRows, a.id);
    n.param = temperature;
    n.needs_grad = nodes_[a.id].needs_grad;
    n.value = ta;
    for (size_t i = 0; i < ta.rows(); ++i) {
        double mx = -1e300;
        for (size_t j = 0; j < ta.cols(); ++j) mx = std::max(mx, ta.at(i, j) / temperature);
        double denom = 0.0;
        for (size_t j = 0; j < ta.cols(); ++j) {
            const double e = std::exp(ta.at(i, j) / temperature - mx);
            n.value.at(i, j) = e;
            denom += e;
        }
        for (size_t j = 0; j < ta.cols(); ++j) n.value.at(i, j) /= denom;
    }
    return push(std::move(n), "softmax_rows");
}

Var Tape::log(Var a) {
    Node n = node(OpKind::Log, check(a));
    n.needs_grad = nodes_[a.id].needs_grad;
    n.value = nodes_[a.id].value;
    for (auto& v : n.value.values()) v = std::log(v);
    return push(std::move(n), "log");
}

Var Tape::exp(Var a) {
    Node n = node(OpKind::Exp, check(a));
    n.needs_grad = nodes_[a.id].needs_grad;
    n.value = nodes_[a.id].value;
    for (auto& v : n.value.values()) v = std::exp(v);
    return push(std::move(n), "exp");
}

Var Tape::sum(Var a) {
    Node n = node(OpKind::Sum, check(a));
    n.needs_grad = nodes_[a.id].needs_grad;
    double acc = 0.0;
    for (double v : nodes_[a.id].value.values()) acc += v;
    n.value = Tensor::scalar(acc);
    return push(std::move(n), "sum");
}

Var Tape::mean(Var a) {
    Node n = node(OpKind::Mean, check(a));
    n.needs_grad = nodes_[a.id].needs_grad;
    const Tensor& ta = nodes_[a.id].value;
    if (ta.numel() == 0) throw ContractError("mean: empty tensor");
    double acc = 0.0;
    for (double v : ta.values()) acc += v;
    n.value = Tensor::scalar(acc / static_cast<double>(ta.numel()));
    return push(std::move(n), "mean");
}

Var Tape::rowsum(Var a) {
    const Tensor& ta = nodes_[check(a)].value;
    Node n = node(OpKind::RowSum, a.id);
    n.needs_grad = nodes_[a.id].needs_grad;
    n.value = Tensor::zeros(ta.rows(), 1);
    for (size_t i = 0; i < ta.rows(); ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < ta.cols(); ++j) acc += ta.at(i, j);
        n.value.at(i, 0) = acc;
    }
    return push(std::move(n), "rowsum");
}

Var Tape::dot(Var a, Var b) {
    const Tensor& ta = nodes_[check(a)].value;
    const Tensor& tb = nodes_[check(b)].value;
    require(ta.numel() == tb.numel(), "dot: element counts differ");
    Node n = node(OpKind::Dot, a.id, b.id);
    n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
    double acc = 0.0;
    for (size_t i = 0; i < ta.numel(); ++i) acc += ta[i] * tb[i];
    n.value = Tensor::scalar(acc);
    return push(std::move(n), "dot");
}

Var Tape::concat_rows(Var a, Var b) {
    const Tensor& ta = nodes_[check(a)].value;
    const Tensor& tb = nodes_[check(b)].value;
    require(ta.cols() == tb.cols(), "concat_rows: column counts differ");
    Node n = node(OpKind::ConcatRows, a.id, b.id);
    n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
    n.value = Tensor::zeros(ta.rows() + tb.rows(), ta.cols());
    std::copy(ta.values().begin(), ta.values().end(), n.value.values().begin());
    std::copy(tb.values().begin(), tb.values().end(), n.value.values().begin() + ta.numel());
    return push(std::move(n), "concat_rows");
}

void Tape::accumulate(int node, const Tensor& g) {
    Node& n = nodes_[node];
    if (!n.needs_grad) return;
    if (n.grad.numel() == 0) n.grad = Tensor(n.value.shape());
    for (size_t i = 0; i < g.numel(); ++i) n.grad[i] += g[i];
}

const Tensor& Tape::grad(Var v) const {
    const Node& n = nodes_[check(v)];
    if (!grads_ready_) throw ContractError("Tape::grad: backward has not run");
    return n.grad;
}

void Tape::backward(Var output) {
    const int out = check(output);
    if (!nodes_[out].value.is_scalar())
        throw ContractError("Tape::backward: output must be scalar");

    for (auto& n : nodes_) n.grad = Tensor();
    nodes_[out].grad = Tensor::scalar(1.0);

    for (int idx = out; idx >= 0; --idx) {
        Node& n = nodes_[idx];
        if (!n.needs_grad || n.grad.numel() == 0) continue;
        const Tensor& g = n.grad;
        switch (n.kind) {
        case OpKind::Leaf:
        case OpKind::Constant:
            break;
        case OpKind::MatMul: {
            const Tensor& a = nodes_[n.a].value;
            const Tensor& b = nodes_[n.b].value;
            if (nodes_[n.a].needs_grad) {
                Tensor ga = Tensor::zeros(a.rows(), a.cols());
                kern::matmul_nt(ga.data(), g.data(), b.data(), g.rows(), g.cols(), b.rows());
                accumulate(n.a, ga);
            }
            if (nodes_[n.b].needs_grad) {
                Tensor gb = Tensor::zeros(b.rows(), b.cols());
                kern::matmul_tn(gb.data(), a.data(), g.data(), a.rows(), a.cols(), g.cols());
                accumulate(n.b, gb);
            }
            break;
        }
        case OpKind::MatMulNT: {
            const Tensor& a = nodes_[n.a].value;
            const Tensor& b = nodes_[n.b].value;
            if (nodes_[n.a].needs_grad) {
                Tensor ga = Tensor::zeros(a.rows(), a.cols());
                kern::matmul(ga.data(), g.data(), b.data(), g.rows(), g.cols(), b.cols());
                accumulate(n.a, ga);
            }
            if (nodes_[n.b].needs_grad) {
                Tensor gb = Tensor::zeros(b.rows(), b.cols());
                kern::matmul_tn(gb.data(), g.data(), a.data(), g.rows(), g.cols(), a.cols());
                accumulate(n.b, gb);
            }
            break;
        }
        case OpKind::Add:
            accumulate(n.a, g);
            accumulate(n.b, g);
            break;
        case OpKind::AddRowVec: {
            accumulate(n.a, g);
            if (nodes_[n.b].needs_grad) {
                Tensor gb = Tensor::zeros(1, g.cols());
                for (size_t i = 0; i < g.rows(); ++i)
                    for (size_t j = 0; j < g.cols(); ++j) gb[j] += g.at(i, j);
                accumulate(n.b, gb);
            }
            break;
        }
        case OpKind::AddColVec: {
            accumulate(n.a, g);
            if (nodes_[n.b].needs_grad) {
                Tensor gb = Tensor::zeros(g.rows(), 1);
                for (size_t i = 0; i < g.rows(); ++i)
                    for (size_t j = 0; j < g.cols(); ++j) gb.at(i, 0) += g.at(i, j);
                accumulate(n.b, gb);
            }
            break;
        }
        case OpKind::Mul: {
            if (nodes_[n.a].needs_grad) {
                Tensor ga = g;
                for (size_t i = 0; i < ga.numel(); ++i) ga[i] *= nodes_[n.b].value[i];
                accumulate(n.a, ga);
            }
            if (nodes_[n.b].needs_grad) {
                Tensor gb = g;
                for (size_t i = 0; i < gb.numel(); ++i) gb[i] *= nodes_[n.a].value[i];
                accumulate(n.b, gb);
            }
            break;
        }
        case OpKind::Scale: {
            Tensor ga = g;
            for (auto& v : ga.values()) v *= n.param;
            accumulate(n.a, ga);
            break;
        }
        case OpKind::Relu: {
            Tensor ga = g;
            const Tensor& a = nodes_[n.a].value;
            for (size_t i = 0; i < ga.numel(); ++i)
                if (a[i] <= 0.0) ga[i] = 0.0;
            accumulate(n.a, ga);
            break;
        }
        case OpKind::L2NormRows: {
            const Tensor& a = nodes_[n.a].value;
            Tensor ga = Tensor::zeros(a.rows(), a.cols());
            for (size_t i = 0; i < a.rows(); ++i) {
                double ss = 0.0, xg = 0.0;
                for (size_t j = 0; j < a.cols(); ++j) {
                    ss += a.at(i, j) * a.at(i, j);
                    xg += a.at(i, j) * g.at(i, j);
                }
                const double norm = std::sqrt(ss + kNormEps);
                const double inv = 1.0 / norm;
                const double inv3 = inv * inv * inv;
                for (size_t j = 0; j < a.cols(); ++j)
                    ga.at(i, j) = g.at(i, j) * inv - a.at(i, j) * xg * inv3;
            }
            accumulate(n.a, ga);
            break;
        }
        case OpKind::SoftmaxRows: {
            const Tensor& p = n.value;
            Tensor ga = Tensor::zeros(p.rows(), p.cols());
            for (size_t i = 0; i < p.rows(); ++i) {
                double gp = 0.0;
                for (size_t j = 0; j < p.cols(); ++j) gp += g.at(i, j) * p.at(i, j);
                for (size_t j = 0; j < p.cols(); ++j)
                    ga.at(i, j) = p.at(i, j) * (g.at(i, j) - gp) / n.param;
            }
            accumulate(n.a, ga);
            break;
        }
        case OpKind::Log: {
            Tensor ga = g;
            const Tensor& a = nodes_[n.a].value;
            for (size_t i = 0; i < ga.numel(); ++i) ga[i] /= a[i];
            accumulate(n.a, ga);
            break;
        }
        case OpKind::Exp: {
            Tensor ga = g;
            for (size_t i = 0; i < ga.numel(); ++i) ga[i] *= n.value[i];
            accumulate(n.a, ga);
            break;
        }
        case OpKind::Sum: {
            const Tensor& a = nodes_[n.a].value;
            accumulate(n.a, Tensor(a.shape(), std::vector<double>(a.numel(), g[0])));
            break;
        }
        case OpKind::Mean: {
            const Tensor& a = nodes_[n.a].value;
            accumulate(n.a, Tensor(a.shape(), std::vector<double>(a.numel(), g[0] / static_cast<double>(a.numel()))));
            break;
        }
        case OpKind::RowSum: {
            const Tensor& a = nodes_[n.a].value;
            Tensor ga = Tensor::zeros(a.rows(), a.cols());
            for (size_t i = 0; i < a.rows(); ++i)
                for (size_t j = 0; j < a.cols(); ++j) ga.at(i, j) = g.at(i, 0);
            accumulate(n.a, ga);
            break;
        }
        case OpKind::Dot: {
            if (nodes_[n.a].needs_grad) {
                Tensor ga = nodes_[n.b].value;
                for (auto& v : ga.values()) v *= g[0];
                accumulate(n.a, Tensor(nodes_[n.a].value.shape(), ga.values()));
            }
            if (nodes_[n.b].needs_grad) {
                Tensor gb = nodes_[n.a].value;
                for (auto& v : gb.values()) v *= g[0];
                accumulate(n.b, Tensor(nodes_[n.b].value.shape(), gb.values()));
            }
            break;
        }
        case OpKind::ConcatRows: {
            const Tensor& a = nodes_[n.a].value;
            const Tensor& b = nodes_[n.b].value;
            if (nodes_[n.a].needs_grad) {
                Tensor ga(a.shape());
                std::copy(g.values().begin(), g.values().begin() + a.numel(), ga.values().begin());
                accumulate(n.a, ga);
            }
            if (nodes_[n.b].needs_grad) {
                Tensor gb(b.shape());
                std::copy(g.values().begin() + a.numel(), g.values().end(), gb.values().begin());
                accumulate(n.b, gb);
            }
            break;
        }
        }
    }
    grads_ready_ = true;
}

double eval_scalar(const ScalarFn& fn, const std::vector<Tensor>& params) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const auto& p : params) vars.push_back(tape.leaf(p));
    return tape.value(fn(tape, vars)).item();
}

double eval_with_grads(const ScalarFn& fn, const std::vector<Tensor>& params, std::vector<Tensor>& grads) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const auto& p : params) vars.push_back(tape.leaf(p));
    const Var out = fn(tape, vars);
    tape.backward(out);
    grads.clear();
    grads.reserve(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        const Tensor& g = tape.grad(vars[i]);
        grads.push_back(g.numel() == 0 ? Tensor(params[i].shape()) : g);
    }
    return tape.value(out).item();
}

GradCheckReport grad_check(const ScalarFn& fn, const std::vector<Tensor>& params, double h, double tol) {
    if (h <= 0.0) throw ConfigError("grad_check: h must be > 0");
    std::vector<Tensor> analytic;
    eval_with_grads(fn, params, analytic);

    GradCheckReport report;
    std::vector<Tensor> probe = params;
    for (size_t p = 0; p < params.size(); ++p) {
        for (size_t i = 0; i < params[p].numel(); ++i) {
            const double orig = probe[p][i];
            probe[p][i] = orig + h;
            const double fp = eval_scalar(fn, probe);
            probe[p][i] = orig - h;
            const double fm = eval_scalar(fn, probe);
            probe[p][i] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[p][i];
            const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = p;
                report.worst_coord = i;
            }
        }
    }
    report.pass = report.max_rel_err < tol;
    return report;
}

} // namespace flatgcd
