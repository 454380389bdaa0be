#include "flatgcd/hessian.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace flatgcd {

namespace {

double dot_all(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < a[i].numel(); ++j) acc += a[i][j] * b[i][j];
    return acc;
}

void axpy(std::vector<Tensor>& y, double alpha, const std::vector<Tensor>& x) {
    for (size_t i = 0; i < y.size(); ++i)
        for (size_t j = 0; j < y[i].numel(); ++j) y[i][j] += alpha * x[i][j];
}

std::vector<Tensor> zeros_like(const std::vector<Tensor>& ts) {
    std::vector<Tensor> out;
    out.reserve(ts.size());
    for (const auto& t : ts) out.emplace_back(t.shape());
    return out;
}

} // namespace

std::vector<Tensor> hvp(const GradFn& grad_fn, const std::vector<Tensor>& params,
                        const std::vector<Tensor>& v) {
    if (v.size() != params.size()) throw DimError("hvp: direction/parameter count mismatch");
    for (size_t i = 0; i < v.size(); ++i)
        if (!v[i].same_shape(params[i])) throw DimError("hvp: direction shape mismatch");

    const double vnorm = global_norm(v);
    if (vnorm == 0.0) return zeros_like(params);
    const double h = 1e-4 / vnorm;

    std::vector<Tensor> plus = params;
    axpy(plus, h, v);
    std::vector<Tensor> g_plus;
    grad_fn(plus, g_plus);

    std::vector<Tensor> minus = params;
    axpy(minus, -h, v);
    std::vector<Tensor> g_minus;
    grad_fn(minus, g_minus);

    std::vector<Tensor> out = zeros_like(params);
    for (size_t i = 0; i < out.size(); ++i)
        for (size_t j = 0; j < out[i].numel(); ++j) {
            out[i][j] = (g_plus[i][j] - g_minus[i][j]) / (2.0 * h);
            if (!std::isfinite(out[i][j])) throw NumericError("hvp: non-finite gradient difference");
        }
    return out;
}

double lambda_max(const GradFn& grad_fn, const std::vector<Tensor>& params, size_t max_iters,
                  double tol, Rng& rng, FlatnessReport* report) {
    if (max_iters < 1) throw ConfigError("lambda_max: need at least one iteration");

    std::vector<Tensor> v = zeros_like(params);
    for (auto& t : v)
        for (auto& x : t.values()) x = rng.normal();
    const double n0 = global_norm(v);
    for (auto& t : v)
        for (auto& x : t.values()) x /= n0;

    double rayleigh = 0.0;
    double residual = 0.0;
    bool converged = false;
    size_t iters = 0;
    for (size_t it = 0; it < max_iters; ++it) {
        ++iters;
        std::vector<Tensor> w = hvp(grad_fn, params, v);
        const double next = dot_all(v, w); // v is unit norm
        residual = std::abs(next - rayleigh);
        rayleigh = next;
        const double wnorm = global_norm(w);
        if (wnorm == 0.0) { // H v = 0: flat in every explored direction
            rayleigh = 0.0;
            converged = true;
            break;
        }
        for (size_t i = 0; i < v.size(); ++i)
            for (size_t j = 0; j < v[i].numel(); ++j) v[i][j] = w[i][j] / wnorm;
        if (it > 0 && residual < tol) {
            converged = true;
            break;
        }
    }
    if (report) {
        report->lambda_max = rayleigh;
        report->power_iterations = iters;
        report->residual = residual;
        report->converged = converged;
    }
    return rayleigh;
}

double hessian_trace(const GradFn& grad_fn, const std::vector<Tensor>& params, size_t probes,
                     Rng& rng) {
    if (probes < 1) throw ConfigError("hessian_trace: need at least one probe");
    double acc = 0.0;
    for (size_t p = 0; p < probes; ++p) {
        std::vector<Tensor> v = zeros_like(params);
        for (auto& t : v)
            for (auto& x : t.values()) x = rng.rademacher();
        const std::vector<Tensor> w = hvp(grad_fn, params, v);
        acc += dot_all(v, w);
    }
    return acc / static_cast<double>(probes);
}

FlatnessReport flatness_report(const GradFn& grad_fn, const std::vector<Tensor>& params,
                               size_t power_iters, double power_tol, size_t probes, uint64_t seed) {
    FlatnessReport report;
    report.probe_seed = seed;
    report.probes = probes;
    Rng rng(seed);
    lambda_max(grad_fn, params, power_iters, power_tol, rng, &report);
    report.trace = hessian_trace(grad_fn, params, probes, rng);
    return report;
}

std::string FlatnessReport::to_text() const {
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", lambda_max);
    os << "lambda_max = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", trace);
    os << "trace = " << buf << "\n";
    os << "power_iterations = " << power_iterations << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", residual);
    os << "residual = " << buf << "\n";
    os << "converged = " << (converged ? 1 : 0) << "\n";
    os << "probes = " << probes << "\n";
    os << "probe_seed = " << probe_seed << "\n";
    return os.str();
}

} // namespace flatgcd
