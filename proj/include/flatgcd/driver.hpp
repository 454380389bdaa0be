#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flatgcd/anchors.hpp"
#include "flatgcd/cluster_eval.hpp"
#include "flatgcd/dataset.hpp"
#include "flatgcd/hessian.hpp"
#include "flatgcd/losses.hpp"
#include "flatgcd/model.hpp"
#include "flatgcd/optimizer.hpp"

namespace flatgcd {

// Experiment orchestration: an initial training phase produces the first
// cluster assignment, anchors are bootstrapped from it, alpha epochs run on
// those fixed anchors, and every later epoch re-selects anchors before its
// first gradient step.

enum class Method { Baseline, Lsp, Das, LspDas };

Method method_from_string(const std::string& s);
std::string method_to_string(Method m);
bool method_uses_lsp(Method m);
bool method_uses_das(Method m);

struct ExperimentConfig {
    SynthConfig data;
    // When set, load exported embeddings instead of generating.
    std::string features_path;
    std::string labels_path;
    std::vector<int64_t> old_classes;

    Method method = Method::LspDas;
    LossConfig loss;
    LspConfig lsp;
    DasConfig das;
    ModelConfig model; // input_dim / num_classes are overwritten from the data

    size_t epochs = 50; // per phase
    size_t batch_size = 128;
    uint64_t seed = 0;
    std::string out_dir; // empty = no files written
    bool dump_anchors = false;

    void validate() const;
};

struct EpochMetrics {
    size_t epoch = 0;          // global epoch counter across both phases
    std::string phase;         // "initial" or "anchor"
    double unsup_con = 0.0, sup_con = 0.0, ce_sup = 0.0, distill = 0.0, total = 0.0;
    double acc_all = 0.0, acc_old = 0.0, acc_new = 0.0;
    size_t anchor_count = 0;
    double anchor_purity = 0.0;
    size_t eta = 0;
    double t_tru = 0.0;
};

struct StepMetrics {
    std::string phase;
    size_t epoch = 0;
    size_t step = 0;
    double loss = 0.0;
    double loss_perturbed = 0.0;
    double grad_norm = 0.0;
    double delta = 0.0;
    double unsup_con = 0.0, sup_con = 0.0, ce_sup = 0.0, distill = 0.0;
};

struct RunResult {
    ModelParams model;
    ClusterState cluster_state; // over the unlabeled set, final parameters
    EvalReport final_eval;
    std::vector<EpochMetrics> metrics;
    std::vector<StepMetrics> steps;
    size_t aborted_steps = 0;
    size_t total_steps = 0;
};

GcdDataset load_experiment_data(const ExperimentConfig& cfg);

// Phase 1: `epochs` passes over the data with the method's optimizer and the
// base labeled set only, then a clean forward pass for the initial cluster
// assignment. metrics/steps are appended to `result`.
void run_initial_phase(const ExperimentConfig& cfg, const GcdDataset& data, RunResult& result);

// Phase 2: anchors fixed for the first alpha epochs, re-selected at the
// start of every later epoch (before that epoch's first gradient step).
// Methods without the anchor pipeline train identically minus anchors.
void run_anchor_phase(const ExperimentConfig& cfg, const GcdDataset& data, RunResult& result);

// Both phases plus output files (metrics.csv, steps.csv, model.ckpt,
// anchors_epoch_*.csv when enabled) under cfg.out_dir.
RunResult run_experiment(const ExperimentConfig& cfg, const GcdDataset& data);

// Fixed probe batch for flatness diagnostics: seeded sample choice and
// views, labels from the base labeled set.
TrainBatch make_probe_batch(const GcdDataset& data, size_t batch_size, uint64_t seed);

// Gradient of the full objective on a fixed batch as a function of the
// trainable parameters. Operates on a private copy of the model, so probing
// never disturbs the caller's weights.
GradFn make_probe_grad_fn(const ModelParams& model, TrainBatch batch, LossConfig loss,
                          double tau_teacher);

// Finite-difference gradient checks of the loss stack (each component and
// the composition) on randomly seeded small batches.
struct GradCheckRunReport {
    size_t batches = 0;
    size_t checks = 0;
    double max_rel_err = 0.0;
    bool pass = false;
};
GradCheckRunReport run_loss_gradcheck(uint64_t seed, size_t num_batches, double h, double tol);

// Serialization helpers shared by the CLI.
std::string metrics_csv(const std::vector<EpochMetrics>& rows);
std::string steps_csv(const std::vector<StepMetrics>& rows);
std::string anchor_dump_csv(const ClusterState& state, const AnchorSet& anchors);
void write_text_file(const std::string& path, const std::string& content);

} // namespace flatgcd
