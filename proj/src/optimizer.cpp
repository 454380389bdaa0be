#include "flatgcd/optimizer.hpp"

#include <cmath>

namespace flatgcd {

void LspConfig::validate() const {
    if (rho < 0.0) throw ConfigError("LspConfig: rho must be >= 0");
    if (delta_initial <= 0.0 || delta_final <= 0.0)
        throw ConfigError("LspConfig: learning rates must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("LspConfig: momentum must lie in [0,1)");
}

double cosine_lr(const LspConfig& cfg, size_t epoch, size_t total_epochs) {
    if (total_epochs <= 1) return cfg.delta_initial;
    const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
    return cfg.delta_final +
           (cfg.delta_initial - cfg.delta_final) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
}

Perturbation compute_perturbation(const std::vector<Tensor>& grads, double rho) {
    Perturbation p;
    const double norm = global_norm(grads);
    p.offsets.reserve(grads.size());
    if (norm == 0.0) {
        p.skipped = true;
        for (const auto& g : grads) p.offsets.emplace_back(g.shape());
        return p;
    }
    const double scale = rho / norm;
    for (const auto& g : grads) {
        Tensor o = g;
        for (auto& v : o.values()) v *= scale;
        p.offsets.push_back(std::move(o));
    }
    return p;
}

Optimizer::Optimizer(std::vector<Tensor*> params, LspConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    velocity_.reserve(params_.size());
    for (const Tensor* t : params_) velocity_.emplace_back(t->shape());
}

void Optimizer::descend(const std::vector<Tensor>& grads, double delta) {
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = *params_[i];
        const Tensor& g = grads[i];
        if (cfg_.momentum > 0.0) {
            Tensor& v = velocity_[i];
            for (size_t j = 0; j < p.numel(); ++j) {
                v[j] = cfg_.momentum * v[j] + g[j];
                p[j] -= delta * v[j];
            }
        } else {
            for (size_t j = 0; j < p.numel(); ++j) p[j] -= delta * g[j];
        }
    }
}

StepReport Optimizer::lsp_step(const LossGradFn& fn, double delta, const std::function<void()>& post_step) {
    if (!cfg_.enabled) throw ContractError("lsp_step: optimizer configured with LSP disabled");

    StepReport report;
    report.delta = delta;

    std::vector<Tensor> grads;
    report.loss_at_origin = fn(grads);
    if (grads.size() != params_.size()) throw ContractError("lsp_step: gradient count mismatch");
    report.grad_norm = global_norm(grads);

    const Perturbation pert = compute_perturbation(grads, cfg_.rho);
    report.perturbation_skipped = pert.skipped;

    // Save originals, move to the worst-case point, re-evaluate, restore.
    std::vector<Tensor> saved;
    saved.reserve(params_.size());
    for (Tensor* p : params_) saved.push_back(*p);
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = *params_[i];
        for (size_t j = 0; j < p.numel(); ++j) p[j] += pert.offsets[i][j];
    }

    std::vector<Tensor> grads_pert;
    try {
        report.loss_at_perturbed = fn(grads_pert);
    } catch (...) {
        for (size_t i = 0; i < params_.size(); ++i) *params_[i] = saved[i];
        throw;
    }
    for (size_t i = 0; i < params_.size(); ++i) *params_[i] = saved[i];

    descend(grads_pert, delta);
    if (post_step) post_step();
    return report;
}

StepReport Optimizer::sgd_step(const LossGradFn& fn, double delta, const std::function<void()>& post_step) {
    StepReport report;
    report.delta = delta;

    std::vector<Tensor> grads;
    report.loss_at_origin = fn(grads);
    if (grads.size() != params_.size()) throw ContractError("sgd_step: gradient count mismatch");
    report.grad_norm = global_norm(grads);
    report.loss_at_perturbed = report.loss_at_origin;

    descend(grads, delta);
    if (post_step) post_step();
    return report;
}

} // namespace flatgcd
