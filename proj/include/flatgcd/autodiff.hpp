#pragma once

#include <functional>
#include <string>
#include <vector>

#include "flatgcd/tensor.hpp"

namespace flatgcd {

// Reverse-mode automatic differentiation on a flat tape of dense tensors.
//
// A Tape owns every node of one computation. Leaves are trainable
// parameters, constants are data (no gradient is propagated into them).
// Ops append a node holding the forward value; backward() walks the records
// once in reverse topological order (which is construction order) and
// accumulates exact vector-Jacobian products. Every forward op validates
// its output is finite and throws NumericError otherwise.
//
// The op set is the minimum needed for an MLP encoder, normalized heads and
// the loss stack: matrix products, broadcast adds, elementwise relu/log/exp/
// product, row l2-normalization, temperature softmax, reductions, scalar
// scaling, dot products and row concatenation.

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

enum class OpKind {
    Leaf,
    Constant,
    MatMul,     // (m,k)*(k,n)
    MatMulNT,   // (m,k)*(n,k)^T
    Add,        // same shape
    AddRowVec,  // (r,c) + (1,c)
    AddColVec,  // (r,c) + (r,1)
    Mul,        // elementwise, same shape
    Scale,      // x * param
    Relu,
    L2NormRows, // rows scaled to unit l2 norm (1e-12 inside the sqrt)
    SoftmaxRows, // softmax(x / param) per row, max-subtracted
    Log,
    Exp,
    Sum,  // all elements -> {1}
    Mean, // all elements -> {1}
    RowSum, // (r,c) -> (r,1)
    Dot,    // flattened inner product -> {1}
    ConcatRows,
};

class Tape {
public:
    // -- graph construction ------------------------------------------------
    Var leaf(Tensor value);
    Var constant(Tensor value);

    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b);
    Var add(Var a, Var b);
    Var add_rowvec(Var a, Var b);
    Var add_colvec(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var relu(Var a);
    Var l2norm_rows(Var a);
    Var softmax_rows(Var a, double temperature);
    Var log(Var a);
    Var exp(Var a);
    Var sum(Var a);
    Var mean(Var a);
    Var rowsum(Var a);
    Var dot(Var a, Var b);
    Var concat_rows(Var a, Var b);

    Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

    // -- execution ---------------------------------------------------------
    // Seeds d(output)=1 and accumulates gradients for every node that leads
    // to a leaf. `output` must be scalar.
    void backward(Var output);

    const Tensor& value(Var v) const { return nodes_[check(v)].value; }
    const Tensor& grad(Var v) const;
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        OpKind kind = OpKind::Constant;
        int a = -1;
        int b = -1;
        double param = 0.0;
        bool needs_grad = false;
        Tensor value;
        Tensor grad;
    };

    static Node node(OpKind kind, int a = -1, int b = -1) {
        Node n;
        n.kind = kind;
        n.a = a;
        n.b = b;
        return n;
    }

    int check(Var v) const;
    Var push(Node n, const char* what);
    void accumulate(int node, const Tensor& g);

    std::vector<Node> nodes_;
    bool grads_ready_ = false;
};

// Gradient-check report: analytic backward vs. central finite differences,
// coordinate by coordinate over every parameter tensor.
struct GradCheckReport {
    double max_rel_err = 0.0;
    size_t worst_param = 0;
    size_t worst_coord = 0;
    bool pass = false;
};

// `fn` rebuilds the scalar computation from scratch on the given tape with
// the supplied parameter leaves (one Var per tensor, in order).
using ScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Compares the analytic gradient of fn to central differences with step h.
// Relative error per coordinate is |a - n| / max(1, |a|, |n|); the unit
// floor keeps finite-difference noise on near-zero entries from dominating.
GradCheckReport grad_check(const ScalarFn& fn, const std::vector<Tensor>& params, double h, double tol);

// Evaluate fn (value only) at the given parameters.
double eval_scalar(const ScalarFn& fn, const std::vector<Tensor>& params);

// Evaluate fn and return (value, gradient per parameter tensor).
double eval_with_grads(const ScalarFn& fn, const std::vector<Tensor>& params, std::vector<Tensor>& grads);

} // namespace flatgcd
