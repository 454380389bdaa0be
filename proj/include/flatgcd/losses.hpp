#pragma once

#include <cstdint>
#include <vector>

#include "flatgcd/autodiff.hpp"
#include "flatgcd/model.hpp"

namespace flatgcd {

// The training objective: contrastive representation losses plus the
// classification losses (supervised cross-entropy and self-distillation with
// mean-entropy regularization), combined with the balance weight lambda.

struct LossConfig {
    double tau_u = 0.07;       // unsupervised contrastive temperature
    double tau_s_sup = 1.0;    // supervised contrastive temperature
    double tau_student = 0.1;  // classification softmax temperature
    double tau_teacher_initial = 0.07;
    double tau_teacher_final = 0.04;
    size_t teacher_warmup_epochs = 30;
    double lambda = 0.35;      // balance between unsupervised and supervised terms
    double entropy_weight = 1.0;

    void validate() const;
};

// Teacher temperature at a given epoch: cosine warm from the initial value
// to the final one over the warmup window, constant afterwards.
double teacher_temperature(const LossConfig& cfg, size_t epoch);

// Contrastive loss over two views. Anchors are the rows of `z`; the positive
// for anchor i is row i of `z_other`; the denominator runs over every other
// projection in the concatenated two-view pool (2B-1 terms, the positive
// included). Rows must be unit-norm.
Var unsup_contrastive(Tape& tape, Var z, Var z_other, double tau);

struct SupConResult {
    Var loss;
    bool no_positives = false; // every anchor had an empty positive set
};

// Supervised contrastive loss over an arbitrary stack of labeled rows.
// Positives of anchor i are the other rows sharing its label; anchors
// without positives are skipped; the denominator runs over all other rows.
SupConResult sup_contrastive(Tape& tape, Var z_rows, const std::vector<int64_t>& labels, double tau);

// Mean of -log probs[i][labels[i]] over rows with labels[i] >= 0.
// Rows with label -1 are skipped; an all-negative label vector yields 0.
Var ce_supervised(Tape& tape, Var probs, const std::vector<int64_t>& labels);

// Self-distillation: mean cross-entropy between the sharpened teacher
// targets softmax(logits_teacher / tau_teacher) and the student rows, minus
// entropy_weight * H(mean student row). The teacher logits are plain values,
// so no gradient flows through the teacher branch.
Var self_distill(Tape& tape, Var probs_student, const Tensor& logits_teacher, double tau_teacher,
                 double entropy_weight);

// One training batch: two views plus per-sample label-or-hole (-1 means
// unlabeled). Anchored samples carry their pseudo-label like a real one.
struct TrainBatch {
    Tensor view1;
    Tensor view2;
    std::vector<int64_t> labels;
};

struct LossBreakdown {
    Var total;
    double total_value = 0.0;
    // Unweighted component values; the lambda-weighted combination below
    // recomposes total_value exactly.
    double unsup_con = 0.0;
    double sup_con = 0.0;
    double ce_sup = 0.0;
    double distill = 0.0;
    bool sup_empty = false; // batch had no labeled/anchored member
};

// Builds the full objective on the tape:
//   (1-lambda)*unsup_con + lambda*sup_con + (1-lambda)*distill + lambda*ce_sup
// Both views feed the classification terms (stacked rows); teacher targets
// for each view come from the other view's logits, detached.
LossBreakdown total_loss(Tape& tape, const ModelVars& model, const TrainBatch& batch,
                         const LossConfig& cfg, double tau_teacher);

} // namespace flatgcd
