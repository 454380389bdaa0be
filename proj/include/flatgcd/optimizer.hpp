#pragma once

#include <functional>
#include <vector>

#include "flatgcd/tensor.hpp"

namespace flatgcd {

// Two-pass sharpness-penalized descent: climb rho along the normalized
// gradient to the locally worst nearby weights, evaluate the gradient there
// on the same batch, restore, and descend with that gradient. A plain SGD
// step with the same restore/renormalize discipline is kept as the baseline.

struct LspConfig {
    double rho = 0.05;          // perturbation radius
    double delta_initial = 0.1; // learning rate schedule endpoints
    double delta_final = 0.0001;
    double momentum = 0.0;
    bool enabled = true;

    void validate() const;
};

// Cosine decay from delta_initial to delta_final across total_epochs.
double cosine_lr(const LspConfig& cfg, size_t epoch, size_t total_epochs);

struct Perturbation {
    std::vector<Tensor> offsets; // aligned with the parameter list
    bool skipped = false;        // all-zero gradient
};

// offsets = rho * g / ||g||2 with the norm over the concatenated gradient
// vector. An all-zero gradient yields zero offsets, flagged.
Perturbation compute_perturbation(const std::vector<Tensor>& grads, double rho);

struct StepReport {
    double loss_at_origin = 0.0;
    double loss_at_perturbed = 0.0; // equals loss_at_origin for sgd_step
    double grad_norm = 0.0;
    double delta = 0.0;
    bool perturbation_skipped = false;
};

// Evaluates the objective at the parameters' current values and fills
// `grads` (aligned with the optimizer's parameter list). Throws NumericError
// on a non-finite loss or gradient.
using LossGradFn = std::function<double(std::vector<Tensor>& grads)>;

// Owns momentum state across steps for a fixed parameter list.
class Optimizer {
public:
    Optimizer(std::vector<Tensor*> params, LspConfig cfg);

    // (1) gradient at theta, (2) theta += rho*g/||g||, (3) gradient at the
    // perturbed point on the same batch, (4) restore, (5) descend with the
    // perturbed gradient. On a non-finite loss at either pass the original
    // parameters are restored before the error propagates.
    StepReport lsp_step(const LossGradFn& fn, double delta, const std::function<void()>& post_step = {});

    // Single-pass descent; identical restore and post-step discipline.
    StepReport sgd_step(const LossGradFn& fn, double delta, const std::function<void()>& post_step = {});

    const LspConfig& config() const { return cfg_; }

private:
    void descend(const std::vector<Tensor>& grads, double delta);

    std::vector<Tensor*> params_;
    LspConfig cfg_;
    std::vector<Tensor> velocity_;
};

} // namespace flatgcd
