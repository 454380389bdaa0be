#pragma once

#include <string>
#include <vector>

#include "flatgcd/autodiff.hpp"
#include "flatgcd/rng.hpp"
#include "flatgcd/tensor.hpp"

namespace flatgcd {

// Encoder / projection head / classifier triple, desk scale: a ReLU MLP
// encoder, one linear projection layer whose output is row-normalized, and a
// prototype matrix classifier producing cosine logits.

struct ModelConfig {
    size_t input_dim = 16;
    std::vector<size_t> encoder_hidden = {64, 64};
    size_t feature_dim = 32;
    size_t projection_dim = 16;
    size_t num_classes = 10; // |Y_u|
    // Train only the final encoder layer (heads always train).
    bool freeze_all_but_last = false;
};

struct DenseLayer {
    Tensor weight; // (out, in)
    Tensor bias;   // (1, out)
};

struct ModelParams {
    ModelConfig cfg;
    std::vector<DenseLayer> encoder; // hidden layers + final linear to feature_dim
    DenseLayer projection;
    Tensor prototypes; // (num_classes, feature_dim), rows kept unit-norm

    // Trainable tensors in declaration order, honoring the freeze flag.
    std::vector<Tensor*> trainable();
    // Scale prototype rows back to unit l2 norm (idempotent).
    void renormalize_prototypes();
};

// Uniform fan-in init for layers, normalized Gaussian rows for prototypes.
ModelParams init_model(const ModelConfig& cfg, uint64_t seed);

// Tape bindings. Frozen tensors enter the graph as constants so no gradient
// is spent on them.
struct ModelVars {
    std::vector<Var> enc_w, enc_b;
    Var proj_w, proj_b;
    Var prototypes;
    // Flattened trainable vars, aligned with ModelParams::trainable().
    std::vector<Var> trainable;
};

ModelVars bind_model(Tape& tape, ModelParams& params);

// Assemble bindings from externally created leaves, ordered exactly like
// ModelParams::trainable(); frozen tensors enter as constants. Lets callers
// (gradient checks) own the leaf tensors.
ModelVars assemble_model_vars(Tape& tape, const ModelParams& params, const std::vector<Var>& trainable_vars);

// Graph-building forward passes.
Var encode(Tape& tape, const ModelVars& m, Var batch);
Var project(Tape& tape, const ModelVars& m, Var features);
struct ClassifyOut {
    Var logits; // cosine similarities, rows in [-1, 1]
    Var probs;  // softmax(logits / temperature)
};
ClassifyOut classify(Tape& tape, const ModelVars& m, Var features, double temperature);

// Value-only forwards for evaluation paths.
Tensor encode(ModelParams& params, const Tensor& batch);
Tensor project(ModelParams& params, const Tensor& features);
std::pair<Tensor, Tensor> classify(ModelParams& params, const Tensor& features, double temperature);

// Two augmented views of a batch: additive Gaussian noise followed by
// independent coordinate dropout.
Tensor augment(const Tensor& batch, Rng& rng, double noise_sigma = 0.1, double dropout_p = 0.1);

// Checkpoint format: magic "GCDM", u32 version, layer shape table, then all
// values as little-endian 64-bit floats in declaration order.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

} // namespace flatgcd
