#include "flatgcd/driver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace flatgcd {

namespace {

uint64_t splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stream seeds independent of call order.
uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b) {
    return splitmix(splitmix(seed ^ (a * 0xd1342543de82ef95ULL)) ^ b);
}

const char* kPhaseInitial = "initial";
const char* kPhaseAnchor = "anchor";

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// One phase's training state shared between epochs.
class Trainer {
public:
    Trainer(const ExperimentConfig& cfg, const GcdDataset& data, RunResult& result, int phase_index,
            const char* phase_name)
        : cfg_(cfg), data_(data), result_(result), phase_index_(phase_index), phase_name_(phase_name),
          optimizer_(result.model.trainable(), cfg.lsp) {}

    // Runs one epoch of gradient steps with the given effective labels and
    // returns the per-step-averaged loss components.
    EpochMetrics train_epoch(size_t epoch_in_phase, size_t global_epoch,
                             const std::vector<int64_t>& labels) {
        const double delta = cosine_lr(cfg_.lsp, epoch_in_phase, cfg_.epochs);
        const double tau_t = teacher_temperature(cfg_.loss, epoch_in_phase);
        Rng rng(derive_seed(cfg_.seed, static_cast<uint64_t>(phase_index_), epoch_in_phase + 1));

        std::vector<size_t> order(data_.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);

        EpochMetrics row;
        row.epoch = global_epoch;
        row.phase = phase_name_;
        size_t steps_this_epoch = 0;

        for (size_t start = 0; start < order.size(); start += cfg_.batch_size) {
            const size_t count = std::min(cfg_.batch_size, order.size() - start);
            if (count < 2) break; // a single sample cannot form a contrastive batch

            Tensor raw = Tensor::zeros(count, data_.dim());
            TrainBatch batch;
            batch.labels.resize(count);
            for (size_t r = 0; r < count; ++r) {
                const size_t idx = order[start + r];
                for (size_t c = 0; c < data_.dim(); ++c) raw.at(r, c) = data_.samples.at(idx, c);
                batch.labels[r] = labels[idx];
            }
            batch.view1 = augment(raw, rng);
            batch.view2 = augment(raw, rng);

            LossBreakdown first_pass{};
            bool captured = false;
            const LossGradFn fn = [&](std::vector<Tensor>& grads) {
                Tape tape;
                ModelVars mv = bind_model(tape, result_.model);
                LossBreakdown bd = total_loss(tape, mv, batch, cfg_.loss, tau_t);
                tape.backward(bd.total);
                grads.clear();
                for (const Var v : mv.trainable) {
                    const Tensor& g = tape.grad(v);
                    grads.push_back(g.numel() == 0 ? Tensor(tape.value(v).shape()) : g);
                }
                if (!captured) {
                    first_pass = bd;
                    captured = true;
                }
                return bd.total_value;
            };

            ++result_.total_steps;
            StepReport report;
            try {
                const auto renorm = [this] { result_.model.renormalize_prototypes(); };
                report = method_uses_lsp(cfg_.method) ? optimizer_.lsp_step(fn, delta, renorm)
                                                      : optimizer_.sgd_step(fn, delta, renorm);
            } catch (const NumericError&) {
                ++result_.aborted_steps;
                continue;
            }

            StepMetrics sm;
            sm.phase = phase_name_;
            sm.epoch = global_epoch;
            sm.step = steps_this_epoch;
            sm.loss = report.loss_at_origin;
            sm.loss_perturbed = report.loss_at_perturbed;
            sm.grad_norm = report.grad_norm;
            sm.delta = report.delta;
            sm.unsup_con = first_pass.unsup_con;
            sm.sup_con = first_pass.sup_con;
            sm.ce_sup = first_pass.ce_sup;
            sm.distill = first_pass.distill;
            result_.steps.push_back(sm);

            row.unsup_con += first_pass.unsup_con;
            row.sup_con += first_pass.sup_con;
            row.ce_sup += first_pass.ce_sup;
            row.distill += first_pass.distill;
            row.total += first_pass.total_value;
            ++steps_this_epoch;
        }

        if (steps_this_epoch > 0) {
            const double inv = 1.0 / static_cast<double>(steps_this_epoch);
            row.unsup_con *= inv;
            row.sup_con *= inv;
            row.ce_sup *= inv;
            row.distill *= inv;
            row.total *= inv;
        }
        return row;
    }

private:
    const ExperimentConfig& cfg_;
    const GcdDataset& data_;
    RunResult& result_;
    int phase_index_;
    const char* phase_name_;
    Optimizer optimizer_;
};

// Clean forward pass and evaluation against held-out truth.
void refresh_evaluation(const ExperimentConfig& cfg, const GcdDataset& data, RunResult& result) {
    result.cluster_state = compute_cluster_state(result.model, data, cfg.loss.tau_student);
    std::vector<int64_t> truth;
    truth.reserve(result.cluster_state.sample_indices.size());
    for (size_t idx : result.cluster_state.sample_indices) truth.push_back(data.truth[idx]);
    result.final_eval =
        cluster_acc(result.cluster_state.assignments, truth, data.num_classes, data.num_old_classes);
}

void check_abort_budget(const RunResult& result) {
    if (result.total_steps == 0) return;
    const double frac =
        static_cast<double>(result.aborted_steps) / static_cast<double>(result.total_steps);
    if (frac > 0.01)
        throw NumericError("training run failed: " + std::to_string(result.aborted_steps) + " of " +
                           std::to_string(result.total_steps) + " steps aborted");
}

void maybe_dump_anchors(const ExperimentConfig& cfg, const RunResult& result, const AnchorSet& anchors,
                        size_t global_epoch) {
    if (!cfg.dump_anchors || cfg.out_dir.empty()) return;
    write_text_file(cfg.out_dir + "/anchors_epoch_" + std::to_string(global_epoch) + ".csv",
                    anchor_dump_csv(result.cluster_state, anchors));
}

} // namespace

Method method_from_string(const std::string& s) {
    if (s == "baseline") return Method::Baseline;
    if (s == "lsp") return Method::Lsp;
    if (s == "das") return Method::Das;
    if (s == "lsp+das") return Method::LspDas;
    throw ConfigError("unknown method: " + s + " (expected baseline|lsp|das|lsp+das)");
}

std::string method_to_string(Method m) {
    switch (m) {
    case Method::Baseline: return "baseline";
    case Method::Lsp: return "lsp";
    case Method::Das: return "das";
    case Method::LspDas: return "lsp+das";
    }
    return "?";
}

bool method_uses_lsp(Method m) { return m == Method::Lsp || m == Method::LspDas; }
bool method_uses_das(Method m) { return m == Method::Das || m == Method::LspDas; }

void ExperimentConfig::validate() const {
    if (batch_size < 2) throw ConfigError("ExperimentConfig: batch size must be >= 2");
    loss.validate();
    lsp.validate();
    das.validate();
}

GcdDataset load_experiment_data(const ExperimentConfig& cfg) {
    if (!cfg.features_path.empty())
        return load_embeddings(cfg.features_path, cfg.labels_path, cfg.old_classes, cfg.seed);
    return synth_gmm(cfg.data);
}

void run_initial_phase(const ExperimentConfig& cfg, const GcdDataset& data, RunResult& result) {
    cfg.validate();
    ModelConfig mc = cfg.model;
    mc.input_dim = data.dim();
    mc.num_classes = data.num_classes;
    result.model = init_model(mc, derive_seed(cfg.seed, 0, 0));

    const std::vector<int64_t> labels = update_labeled_set(data, AnchorSet{});
    Trainer trainer(cfg, data, result, 1, kPhaseInitial);
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        EpochMetrics row = trainer.train_epoch(epoch, epoch, labels);
        refresh_evaluation(cfg, data, result);
        row.acc_all = result.final_eval.acc_all;
        row.acc_old = result.final_eval.acc_old;
        row.acc_new = result.final_eval.acc_new;
        result.metrics.push_back(std::move(row));
    }
    if (cfg.epochs == 0) refresh_evaluation(cfg, data, result);
    check_abort_budget(result);
}

void run_anchor_phase(const ExperimentConfig& cfg, const GcdDataset& data, RunResult& result) {
    cfg.validate();
    const bool das_on = method_uses_das(cfg.method);

    AnchorSet anchors;
    double current_t_tru = 0.0;
    size_t current_eta = 0;
    double purity = 0.0;

    Trainer trainer(cfg, data, result, 2, kPhaseAnchor);
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const size_t global_epoch = cfg.epochs + epoch;
        const size_t t = epoch + 1; // 1-based epoch within this phase

        if (das_on && (t == 1 || t > cfg.das.alpha)) {
            // Replaces the previous selection wholesale; epochs 2..alpha keep
            // the initial anchors.
            const SelectionResult sel =
                select_anchors(result.cluster_state, cfg.das, data.num_old_classes, data.num_classes);
            if (!sel.skipped) {
                anchors = sel.anchors;
                anchors.selection_epoch = global_epoch;
                current_t_tru = sel.t_tru;
                current_eta = sel.eta;
                purity = anchor_purity(anchors, data, result.final_eval.permutation);
                maybe_dump_anchors(cfg, result, anchors, global_epoch);
            }
        }

        const std::vector<int64_t> labels = update_labeled_set(data, das_on ? anchors : AnchorSet{});
        EpochMetrics row = trainer.train_epoch(epoch, global_epoch, labels);
        refresh_evaluation(cfg, data, result);
        row.acc_all = result.final_eval.acc_all;
        row.acc_old = result.final_eval.acc_old;
        row.acc_new = result.final_eval.acc_new;
        row.anchor_count = das_on ? anchors.total() : 0;
        row.anchor_purity = das_on ? purity : 0.0;
        row.eta = das_on ? current_eta : 0;
        row.t_tru = das_on ? current_t_tru : 0.0;
        result.metrics.push_back(std::move(row));
    }
    check_abort_budget(result);
}

RunResult run_experiment(const ExperimentConfig& cfg, const GcdDataset& data) {
    RunResult result;
    run_initial_phase(cfg, data, result);
    run_anchor_phase(cfg, data, result);

    if (!cfg.out_dir.empty()) {
        write_text_file(cfg.out_dir + "/metrics.csv", metrics_csv(result.metrics));
        write_text_file(cfg.out_dir + "/steps.csv", steps_csv(result.steps));
        save_checkpoint(result.model, cfg.out_dir + "/model.ckpt");
    }
    return result;
}

TrainBatch make_probe_batch(const GcdDataset& data, size_t batch_size, uint64_t seed) {
    Rng rng(derive_seed(seed, 7, 0));
    std::vector<size_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const size_t count = std::min(batch_size, data.size());
    if (count < 2) throw ContractError("make_probe_batch: need at least 2 samples");

    Tensor raw = Tensor::zeros(count, data.dim());
    TrainBatch batch;
    batch.labels.resize(count);
    for (size_t r = 0; r < count; ++r) {
        const size_t idx = order[r];
        for (size_t c = 0; c < data.dim(); ++c) raw.at(r, c) = data.samples.at(idx, c);
        batch.labels[r] = data.labeled[idx] ? data.truth[idx] : -1;
    }
    batch.view1 = augment(raw, rng);
    batch.view2 = augment(raw, rng);
    return batch;
}

GradFn make_probe_grad_fn(const ModelParams& model, TrainBatch batch, LossConfig loss,
                          double tau_teacher) {
    auto snapshot = std::make_shared<ModelParams>(model);
    return [snapshot, batch = std::move(batch), loss, tau_teacher](const std::vector<Tensor>& params,
                                                                   std::vector<Tensor>& grads) {
        const std::vector<Tensor*> slots = snapshot->trainable();
        if (params.size() != slots.size())
            throw ContractError("probe_grad_fn: parameter count mismatch");
        for (size_t i = 0; i < slots.size(); ++i) *slots[i] = params[i];

        Tape tape;
        ModelVars mv = bind_model(tape, *snapshot);
        const LossBreakdown bd = total_loss(tape, mv, batch, loss, tau_teacher);
        tape.backward(bd.total);
        grads.clear();
        for (const Var v : mv.trainable) {
            const Tensor& g = tape.grad(v);
            grads.push_back(g.numel() == 0 ? Tensor(tape.value(v).shape()) : g);
        }
    };
}

GradCheckRunReport run_loss_gradcheck(uint64_t seed, size_t num_batches, double h, double tol) {
    GradCheckRunReport report;
    report.batches = num_batches;
    report.pass = true;

    ModelConfig mc;
    mc.input_dim = 6;
    mc.encoder_hidden = {8};
    mc.feature_dim = 5;
    mc.projection_dim = 4;
    mc.num_classes = 4;

    LossConfig loss;

    for (size_t b = 0; b < num_batches; ++b) {
        const uint64_t batch_seed = derive_seed(seed, 11, b);
        Rng rng(batch_seed);
        ModelParams model = init_model(mc, rng.next_u64());

        const size_t batch_size = 4 + (b % 3) * 2; // 4, 6 or 8 samples
        TrainBatch batch;
        batch.view1 = Tensor::zeros(batch_size, mc.input_dim);
        batch.view2 = Tensor::zeros(batch_size, mc.input_dim);
        for (auto& v : batch.view1.values()) v = rng.normal();
        for (auto& v : batch.view2.values()) v = rng.normal();
        batch.labels.resize(batch_size);
        for (auto& y : batch.labels) // mix of labeled (old classes) and holes
            y = rng.uniform() < 0.5 ? static_cast<int64_t>(rng.below(2)) : -1;
        batch.labels[0] = 0;
        batch.labels[1] = 0; // a positive pair always exists
        const double tau_t = teacher_temperature(loss, b % 40);

        std::vector<Tensor> params;
        for (Tensor* t : model.trainable()) params.push_back(*t);

        // Each component and the lambda-weighted composition.
        for (int which = 0; which < 5; ++which) {
            const ScalarFn fn = [&](Tape& tape, const std::vector<Var>& vars) -> Var {
                const ModelVars mv = assemble_model_vars(tape, model, vars);
                switch (which) {
                case 0: {
                    const Var x1 = tape.constant(batch.view1);
                    const Var x2 = tape.constant(batch.view2);
                    return unsup_contrastive(tape, project(tape, mv, encode(tape, mv, x1)),
                                             project(tape, mv, encode(tape, mv, x2)), loss.tau_u);
                }
                case 1: {
                    const Var z = project(tape, mv, encode(tape, mv, tape.constant(batch.view1)));
                    std::vector<int64_t> lab(batch.labels);
                    for (auto& y : lab)
                        if (y < 0) y = 3; // treat holes as one extra class
                    return sup_contrastive(tape, z, lab, loss.tau_s_sup).loss;
                }
                case 2: {
                    const Var f = encode(tape, mv, tape.constant(batch.view1));
                    return ce_supervised(tape, classify(tape, mv, f, loss.tau_student).probs,
                                         batch.labels);
                }
                case 3: {
                    const Var f1 = encode(tape, mv, tape.constant(batch.view1));
                    Tensor teacher;
                    {
                        // Detached teacher logits from the second view.
                        Tape scratch;
                        ModelParams copy = model;
                        ModelVars smv = bind_model(scratch, copy);
                        const Var f2 = encode(scratch, smv, scratch.constant(batch.view2));
                        teacher = scratch.value(classify(scratch, smv, f2, loss.tau_student).logits);
                    }
                    return self_distill(tape, classify(tape, mv, f1, loss.tau_student).probs, teacher,
                                        tau_t, loss.entropy_weight);
                }
                default:
                    return total_loss(tape, mv, batch, loss, tau_t).total;
                }
            };
            const GradCheckReport r = grad_check(fn, params, h, tol);
            ++report.checks;
            report.max_rel_err = std::max(report.max_rel_err, r.max_rel_err);
            report.pass = report.pass && r.pass;
        }
    }
    return report;
}

std::string metrics_csv(const std::vector<EpochMetrics>& rows) {
    std::ostringstream os;
    os << "epoch,phase,unsup_con,sup_con,ce_sup,distill,total,acc_all,acc_old,acc_new,"
          "anchor_count,anchor_purity,eta,t_tru\n";
    for (const auto& r : rows) {
        os << r.epoch << "," << r.phase << "," << fmt(r.unsup_con) << "," << fmt(r.sup_con) << ","
           << fmt(r.ce_sup) << "," << fmt(r.distill) << "," << fmt(r.total) << "," << fmt(r.acc_all)
           << "," << fmt(r.acc_old) << "," << fmt(r.acc_new) << "," << r.anchor_count << ","
           << fmt(r.anchor_purity) << "," << r.eta << "," << fmt(r.t_tru) << "\n";
    }
    return os.str();
}

std::string steps_csv(const std::vector<StepMetrics>& rows) {
    std::ostringstream os;
    os << "phase,epoch,step,loss,loss_perturbed,grad_norm,delta,unsup_con,sup_con,ce_sup,distill\n";
    for (const auto& r : rows) {
        os << r.phase << "," << r.epoch << "," << r.step << "," << fmt(r.loss) << ","
           << fmt(r.loss_perturbed) << "," << fmt(r.grad_norm) << "," << fmt(r.delta) << ","
           << fmt(r.unsup_con) << "," << fmt(r.sup_con) << "," << fmt(r.ce_sup) << ","
           << fmt(r.distill) << "\n";
    }
    return os.str();
}

std::string anchor_dump_csv(const ClusterState& state, const AnchorSet& anchors) {
    std::vector<uint8_t> is_anchor(state.sample_indices.empty() ? 0 : state.sample_indices.back() + 1, 0);
    for (const auto& cls : anchors.per_class)
        for (size_t idx : cls)
            if (idx < is_anchor.size()) is_anchor[idx] = 1;

    std::ostringstream os;
    os << "sample_index,assigned_class,max_prob,is_anchor\n";
    for (size_t t = 0; t < state.sample_indices.size(); ++t) {
        double mx = state.probs.at(t, 0);
        for (size_t c = 1; c < state.probs.cols(); ++c) mx = std::max(mx, state.probs.at(t, c));
        const size_t idx = state.sample_indices[t];
        os << idx << "," << state.assignments[t] << "," << fmt(mx) << ","
           << static_cast<int>(is_anchor[idx]) << "\n";
    }
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << content;
    if (!os) throw IoError("write failure: " + path);
}

} // namespace flatgcd
