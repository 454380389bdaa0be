#pragma once

#include <functional>
#include <string>
#include <vector>

#include "flatgcd/rng.hpp"
#include "flatgcd/tensor.hpp"

namespace flatgcd {

// Loss-surface flatness diagnostics: the largest Hessian eigenvalue by power
// iteration and the trace by Hutchinson's estimator, both driven by
// finite-difference Hessian-vector products so the autodiff core stays
// first-order.

// Gradient of the diagnosed objective at the given parameter values.
using GradFn = std::function<void(const std::vector<Tensor>& params, std::vector<Tensor>& grads)>;

// H*v by central differences of gradients: (g(p + h v) - g(p - h v)) / 2h
// with h = 1e-4 / ||v||. A zero direction returns zeros.
std::vector<Tensor> hvp(const GradFn& grad_fn, const std::vector<Tensor>& params,
                        const std::vector<Tensor>& v);

struct FlatnessReport {
    double lambda_max = 0.0;
    double trace = 0.0;
    size_t power_iterations = 0;
    size_t probes = 0;
    double residual = 0.0; // last Rayleigh-quotient change
    bool converged = false;
    uint64_t probe_seed = 0;

    std::string to_text() const;
};

// Power iteration on |H|; returns the Rayleigh quotient of the dominant
// eigendirection. Stops when successive quotients differ by less than tol;
// a non-converged run still reports its best estimate, flagged.
double lambda_max(const GradFn& grad_fn, const std::vector<Tensor>& params, size_t max_iters,
                  double tol, Rng& rng, FlatnessReport* report = nullptr);

// Hutchinson estimator: mean of v^T H v over Rademacher probes.
double hessian_trace(const GradFn& grad_fn, const std::vector<Tensor>& params, size_t probes,
                     Rng& rng);

FlatnessReport flatness_report(const GradFn& grad_fn, const std::vector<Tensor>& params,
                               size_t power_iters, double power_tol, size_t probes, uint64_t seed);

} // namespace flatgcd
