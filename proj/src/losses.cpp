#include "flatgcd/losses.hpp"

#include <algorithm>
#include <cmath>

namespace flatgcd {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Row maxima of a tensor, negated, as a detached (r,1) column. Subtracting a
// constant inside the exp leaves both value and gradient of the
// log-sum-exp unchanged while preventing overflow at sharp temperatures.
Tensor neg_rowmax(const Tensor& s) {
    Tensor m = Tensor::zeros(s.rows(), 1);
    for (size_t i = 0; i < s.rows(); ++i) {
        double mx = s.at(i, 0);
        for (size_t j = 1; j < s.cols(); ++j) mx = std::max(mx, s.at(i, j));
        m.at(i, 0) = -mx;
    }
    return m;
}

} // namespace

void LossConfig::validate() const {
    if (tau_u <= 0.0 || tau_s_sup <= 0.0 || tau_student <= 0.0 || tau_teacher_initial <= 0.0 ||
        tau_teacher_final <= 0.0)
        throw ConfigError("LossConfig: temperatures must be > 0");
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("LossConfig: lambda must lie in [0,1]");
    if (entropy_weight < 0.0) throw ConfigError("LossConfig: entropy_weight must be >= 0");
}

double teacher_temperature(const LossConfig& cfg, size_t epoch) {
    if (cfg.teacher_warmup_epochs == 0 || epoch >= cfg.teacher_warmup_epochs) return cfg.tau_teacher_final;
    const double t = static_cast<double>(epoch) / static_cast<double>(cfg.teacher_warmup_epochs);
    return cfg.tau_teacher_final +
           (cfg.tau_teacher_initial - cfg.tau_teacher_final) * 0.5 * (1.0 + std::cos(kPi * t));
}

Var unsup_contrastive(Tape& tape, Var z, Var z_other, double tau) {
    if (tau <= 0.0) throw ConfigError("unsup_contrastive: temperature must be > 0");
    const size_t b = tape.value(z).rows();
    if (b < 2) throw ContractError("unsup_contrastive: batch size must be >= 2");
    if (!tape.value(z).same_shape(tape.value(z_other)))
        throw DimError("unsup_contrastive: view shapes differ");

    const Var pool = tape.concat_rows(z, z_other);                   // 2B x d
    const Var sims = tape.scale(tape.matmul_nt(z, pool), 1.0 / tau); // B x 2B

    const Tensor neg_m = neg_rowmax(tape.value(sims));
    Tensor self_mask = Tensor::full(b, 2 * b, 1.0); // excludes only the anchor itself
    Tensor pos_mask = Tensor::zeros(b, 2 * b);
    for (size_t i = 0; i < b; ++i) {
        self_mask.at(i, i) = 0.0;
        pos_mask.at(i, b + i) = 1.0;
    }

    const Var shifted = tape.exp(tape.add_colvec(sims, tape.constant(neg_m)));
    const Var denom = tape.rowsum(tape.mul(shifted, tape.constant(self_mask)));
    const Var lse = tape.sub(tape.log(denom), tape.constant(neg_m)); // log-sum-exp per anchor
    const Var pos = tape.rowsum(tape.mul(sims, tape.constant(pos_mask)));
    return tape.mean(tape.sub(lse, pos));
}

SupConResult sup_contrastive(Tape& tape, Var z_rows, const std::vector<int64_t>& labels, double tau) {
    if (tau <= 0.0) throw ConfigError("sup_contrastive: temperature must be > 0");
    const Tensor& z = tape.value(z_rows);
    const size_t n = z.rows();
    if (labels.size() != n) throw DimError("sup_contrastive: label count does not match rows");

    Tensor pos_weights = Tensor::zeros(n, n);
    Tensor anchor_w = Tensor::zeros(n, 1);
    size_t n_anchors = 0;
    for (size_t i = 0; i < n; ++i) {
        size_t count = 0;
        for (size_t j = 0; j < n; ++j)
            if (j != i && labels[j] == labels[i]) ++count;
        if (count == 0) continue;
        ++n_anchors;
        anchor_w.at(i, 0) = 1.0;
        for (size_t j = 0; j < n; ++j)
            if (j != i && labels[j] == labels[i]) pos_weights.at(i, j) = 1.0 / static_cast<double>(count);
    }
    if (n_anchors == 0) return SupConResult{tape.constant(Tensor::scalar(0.0)), true};
    for (auto& w : anchor_w.values()) w /= static_cast<double>(n_anchors);

    const Var sims = tape.scale(tape.matmul_nt(z_rows, z_rows), 1.0 / tau); // n x n
    const Tensor neg_m = neg_rowmax(tape.value(sims));
    Tensor offdiag = Tensor::full(n, n, 1.0);
    for (size_t i = 0; i < n; ++i) offdiag.at(i, i) = 0.0;

    const Var shifted = tape.exp(tape.add_colvec(sims, tape.constant(neg_m)));
    const Var denom = tape.rowsum(tape.mul(shifted, tape.constant(offdiag)));
    const Var lse = tape.sub(tape.log(denom), tape.constant(neg_m));
    const Var pos_term = tape.rowsum(tape.mul(sims, tape.constant(pos_weights)));
    const Var per_anchor = tape.sub(lse, pos_term);
    return SupConResult{tape.dot(per_anchor, tape.constant(anchor_w)), false};
}

Var ce_supervised(Tape& tape, Var probs, const std::vector<int64_t>& labels) {
    const Tensor& p = tape.value(probs);
    if (labels.size() != p.rows()) throw DimError("ce_supervised: label count does not match rows");
    const int64_t classes = static_cast<int64_t>(p.cols());

    size_t n_valid = 0;
    for (const int64_t y : labels) {
        if (y >= classes) throw ContractError("ce_supervised: label out of range");
        if (y >= 0) ++n_valid;
    }
    if (n_valid == 0) return tape.constant(Tensor::scalar(0.0));

    // Select p[i][y_i] for valid rows via a gather matrix, so log never
    // touches entries outside the picked ones.
    Tensor gather = Tensor::zeros(n_valid, p.rows());
    Tensor onehot = Tensor::zeros(n_valid, p.cols());
    size_t row = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) continue;
        gather.at(row, i) = 1.0;
        onehot.at(row, static_cast<size_t>(labels[i])) = 1.0;
        ++row;
    }
    const Var picked = tape.rowsum(tape.mul(tape.matmul(tape.constant(gather), probs), tape.constant(onehot)));
    return tape.scale(tape.sum(tape.log(picked)), -1.0 / static_cast<double>(n_valid));
}

Var self_distill(Tape& tape, Var probs_student, const Tensor& logits_teacher, double tau_teacher,
                 double entropy_weight) {
    if (tau_teacher <= 0.0) throw ConfigError("self_distill: teacher temperature must be > 0");
    const Tensor& p = tape.value(probs_student);
    if (p.rows() != logits_teacher.rows() || p.cols() != logits_teacher.cols())
        throw DimError("self_distill: teacher/student shapes differ");
    const size_t n = p.rows();

    // Sharpened teacher targets, computed from detached logit values.
    Tensor targets = Tensor::zeros(n, p.cols());
    for (size_t i = 0; i < n; ++i) {
        double mx = -1e300;
        for (size_t j = 0; j < p.cols(); ++j) mx = std::max(mx, logits_teacher.at(i, j) / tau_teacher);
        double denom = 0.0;
        for (size_t j = 0; j < p.cols(); ++j) {
            const double e = std::exp(logits_teacher.at(i, j) / tau_teacher - mx);
            targets.at(i, j) = e;
            denom += e;
        }
        for (size_t j = 0; j < p.cols(); ++j) targets.at(i, j) /= denom;
    }

    const Var ce = tape.scale(tape.sum(tape.mul(tape.log(probs_student), tape.constant(targets))),
                              -1.0 / static_cast<double>(n));

    Tensor avg_w = Tensor::full(1, n, 1.0 / static_cast<double>(n));
    const Var p_avg = tape.matmul(tape.constant(avg_w), probs_student); // 1 x C
    const Var entropy = tape.scale(tape.sum(tape.mul(p_avg, tape.log(p_avg))), -1.0);
    return tape.add(ce, tape.scale(entropy, -entropy_weight));
}

LossBreakdown total_loss(Tape& tape, const ModelVars& model, const TrainBatch& batch,
                         const LossConfig& cfg, double tau_teacher) {
    cfg.validate();
    const size_t b = batch.view1.rows();
    if (b < 2) throw ContractError("total_loss: batch size must be >= 2");
    if (!batch.view1.same_shape(batch.view2)) throw DimError("total_loss: view shapes differ");
    if (batch.labels.size() != b) throw DimError("total_loss: label count does not match batch");

    const Var x1 = tape.constant(batch.view1);
    const Var x2 = tape.constant(batch.view2);
    const Var f1 = encode(tape, model, x1);
    const Var f2 = encode(tape, model, x2);
    const Var z1 = project(tape, model, f1);
    const Var z2 = project(tape, model, f2);
    const ClassifyOut c1 = classify(tape, model, f1, cfg.tau_student);
    const ClassifyOut c2 = classify(tape, model, f2, cfg.tau_student);

    // Representation terms.
    const Var l_unsup = unsup_contrastive(tape, z1, z2, cfg.tau_u);

    std::vector<size_t> labeled;
    for (size_t i = 0; i < b; ++i)
        if (batch.labels[i] >= 0) labeled.push_back(i);

    Var l_sup;
    bool sup_empty = false;
    if (labeled.size() >= 2) {
        Tensor gather = Tensor::zeros(labeled.size(), b);
        std::vector<int64_t> sup_labels;
        for (size_t r = 0; r < labeled.size(); ++r) {
            gather.at(r, labeled[r]) = 1.0;
            sup_labels.push_back(batch.labels[labeled[r]]);
        }
        const Var g = tape.constant(gather);
        const Var z_sup = tape.concat_rows(tape.matmul(g, z1), tape.matmul(g, z2));
        std::vector<int64_t> stacked(sup_labels);
        stacked.insert(stacked.end(), sup_labels.begin(), sup_labels.end());
        const SupConResult r = sup_contrastive(tape, z_sup, stacked, cfg.tau_s_sup);
        l_sup = r.loss;
        sup_empty = r.no_positives;
    } else {
        l_sup = tape.constant(Tensor::scalar(0.0));
        sup_empty = true;
    }

    // Classification terms on both views stacked; each view's teacher is the
    // other view's detached logits.
    const Var p_both = tape.concat_rows(c1.probs, c2.probs);
    std::vector<int64_t> labels_both(batch.labels);
    labels_both.insert(labels_both.end(), batch.labels.begin(), batch.labels.end());
    const Var l_ce = ce_supervised(tape, p_both, labels_both);

    const Tensor& l1 = tape.value(c1.logits);
    const Tensor& l2 = tape.value(c2.logits);
    Tensor teacher_logits = Tensor::zeros(2 * b, l1.cols());
    std::copy(l2.values().begin(), l2.values().end(), teacher_logits.values().begin());
    std::copy(l1.values().begin(), l1.values().end(), teacher_logits.values().begin() + l2.numel());
    const Var l_distill = self_distill(tape, p_both, teacher_logits, tau_teacher, cfg.entropy_weight);

    const Var rep = tape.add(tape.scale(l_unsup, 1.0 - cfg.lambda), tape.scale(l_sup, cfg.lambda));
    const Var cls = tape.add(tape.scale(l_distill, 1.0 - cfg.lambda), tape.scale(l_ce, cfg.lambda));

    LossBreakdown out;
    out.total = tape.add(rep, cls);
    out.total_value = tape.value(out.total).item();
    out.unsup_con = tape.value(l_unsup).item();
    out.sup_con = tape.value(l_sup).item();
    out.ce_sup = tape.value(l_ce).item();
    out.distill = tape.value(l_distill).item();
    out.sup_empty = sup_empty;
    return out;
}

} // namespace flatgcd
