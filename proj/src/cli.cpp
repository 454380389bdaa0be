#include "flatgcd/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "flatgcd/driver.hpp"

namespace flatgcd {

namespace {

struct DatasetDirMeta {
    size_t classes = 0;
    size_t old_classes = 0;
    uint64_t seed = 0;
    bool csv = false;
};

void write_meta(const std::string& dir, const GcdDataset& ds, bool csv) {
    std::ostringstream os;
    os << "n=" << ds.size() << "\n";
    os << "d=" << ds.dim() << "\n";
    os << "classes=" << ds.num_classes << "\n";
    os << "old=" << ds.num_old_classes << "\n";
    os << "seed=" << ds.seed << "\n";
    os << "format=" << (csv ? "csv" : "binary") << "\n";
    write_text_file(dir + "/meta.txt", os.str());
}

DatasetDirMeta read_meta(const std::string& dir) {
    std::ifstream is(dir + "/meta.txt");
    if (!is) throw IoError("cannot open: " + dir + "/meta.txt");
    DatasetDirMeta meta;
    std::string line;
    std::map<std::string, std::string> kv;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    try {
        meta.classes = std::stoull(kv.at("classes"));
        meta.old_classes = std::stoull(kv.at("old"));
        meta.seed = std::stoull(kv.at("seed"));
        meta.csv = kv.count("format") && kv.at("format") == "csv";
    } catch (const std::exception&) {
        throw IoError("malformed meta.txt in " + dir);
    }
    return meta;
}

GcdDataset load_dataset_dir(const std::string& dir) {
    const DatasetDirMeta meta = read_meta(dir);
    std::vector<int64_t> old_ids(meta.old_classes);
    for (size_t i = 0; i < meta.old_classes; ++i) old_ids[i] = static_cast<int64_t>(i);
    const std::string ext = meta.csv ? ".csv" : ".bin";
    const std::string labels = meta.csv ? dir + "/labels.txt" : dir + "/labels.bin";
    return load_embeddings(dir + "/features" + ext, labels, old_ids, meta.seed);
}

void save_dataset_dir(const GcdDataset& ds, const std::string& dir, bool csv) {
    if (csv) {
        save_embeddings_csv(ds.samples, dir + "/features.csv");
        std::ostringstream os;
        for (int64_t y : ds.truth) os << y << "\n";
        write_text_file(dir + "/labels.txt", os.str());
    } else {
        save_embeddings_binary(ds.samples, dir + "/features.bin");
        save_labels_binary(ds.truth, dir + "/labels.bin");
    }
    write_meta(dir, ds, csv);
}

// Shared experiment options wired onto a subcommand.
void add_experiment_options(CLI::App* cmd, ExperimentConfig& cfg, std::string& method) {
    cmd->add_option("--method", method, "baseline|lsp|das|lsp+das");
    cmd->add_option("--epochs", cfg.epochs, "epochs per phase");
    cmd->add_option("--batch", cfg.batch_size, "mini-batch size");
    cmd->add_option("--seed", cfg.seed, "experiment seed");

    cmd->add_option("--lambda", cfg.loss.lambda, "supervised/unsupervised balance");
    cmd->add_option("--tau-u", cfg.loss.tau_u, "unsupervised contrastive temperature");
    cmd->add_option("--tau-s-sup", cfg.loss.tau_s_sup, "supervised contrastive temperature");
    cmd->add_option("--tau-student", cfg.loss.tau_student, "student softmax temperature");
    cmd->add_option("--tau-teacher-initial", cfg.loss.tau_teacher_initial, "teacher temperature, epoch 0");
    cmd->add_option("--tau-teacher-final", cfg.loss.tau_teacher_final, "teacher temperature after warmup");
    cmd->add_option("--teacher-warmup", cfg.loss.teacher_warmup_epochs, "teacher warmup epochs");
    cmd->add_option("--entropy-weight", cfg.loss.entropy_weight, "mean-entropy regularization weight");

    cmd->add_option("--rho", cfg.lsp.rho, "perturbation radius");
    cmd->add_option("--lr", cfg.lsp.delta_initial, "initial learning rate");
    cmd->add_option("--lr-final", cfg.lsp.delta_final, "final learning rate");
    cmd->add_option("--momentum", cfg.lsp.momentum, "SGD momentum");

    cmd->add_option("--omega", cfg.das.omega, "truncation threshold weight");
    cmd->add_option("--gamma", cfg.das.gamma, "anchor budget quantile");
    cmd->add_option("--beta", cfg.das.beta, "candidate fraction");
    cmd->add_option("--k-fraction", cfg.das.k_fraction, "KNN neighbor fraction");
    cmd->add_option("--k", cfg.das.k_override, "fixed KNN neighbor count (overrides fraction)");
    cmd->add_option("--alpha", cfg.das.alpha, "epochs on the initial anchors");
    cmd->add_option("--eta", cfg.das.eta_override, "fixed per-class anchor count");

    cmd->add_option("--hidden", cfg.model.encoder_hidden, "encoder hidden widths");
    cmd->add_option("--feature-dim", cfg.model.feature_dim, "encoder output dimension");
    cmd->add_option("--proj-dim", cfg.model.projection_dim, "projection head dimension");
    cmd->add_flag("--freeze-all-but-last", cfg.model.freeze_all_but_last,
                  "train only the final encoder layer");
}

void add_synth_options(CLI::App* cmd, SynthConfig& cfg) {
    cmd->add_option("--classes", cfg.num_classes, "total classes");
    cmd->add_option("--old", cfg.num_old_classes, "old (labeled) classes");
    cmd->add_option("--per-class", cfg.samples_per_class, "samples per class");
    cmd->add_option("--dim", cfg.input_dim, "input dimension");
    cmd->add_option("--std", cfg.cluster_std, "cluster standard deviation");
    cmd->add_option("--separation", cfg.separation, "minimum center separation");
    cmd->add_option("--longtail", cfg.longtail_decay, "geometric class-size decay (1 = balanced)");
    cmd->add_option("--data-seed", cfg.seed, "dataset seed");
}

// Default anchor budget: labeled-set size over old-class count.
void default_eta(ExperimentConfig& cfg, const GcdDataset& data) {
    if (cfg.das.eta_override > 0) return;
    const double n_over_yl =
        static_cast<double>(data.labeled_count()) / static_cast<double>(data.num_old_classes);
    cfg.das.eta_override = std::max<size_t>(1, static_cast<size_t>(std::llround(n_over_yl)));
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"category-discovery training engine: sharpness-penalized "
                 "optimization with density-peak anchor pseudo-labeling"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a Gaussian-mixture dataset");
    synth->set_config("--config");
    SynthConfig synth_cfg;
    std::string synth_out;
    bool synth_csv = false;
    add_synth_options(synth, synth_cfg);
    synth->add_option("--seed", synth_cfg.seed, "dataset seed");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_flag("--csv", synth_csv, "write CSV instead of binary");

    // ---- train ----
    auto* train = app.add_subcommand("train", "run a full experiment");
    train->set_config("--config");
    ExperimentConfig train_cfg;
    std::string train_method = "lsp+das";
    std::string train_data_dir;
    bool train_dump_anchors = false;
    bool train_auto_eta = true;
    add_synth_options(train, train_cfg.data);
    add_experiment_options(train, train_cfg, train_method);
    train->add_option("--data", train_data_dir, "dataset directory from `synth`");
    train->add_option("--out", train_cfg.out_dir, "output directory")->required();
    train->add_flag("--dump-anchors", train_dump_anchors, "write anchors_epoch_*.csv");
    train->add_flag("!--no-auto-eta", train_auto_eta, "disable the N/|Y_l| anchor budget default");

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval->set_config("--config");
    std::string eval_ckpt, eval_data;
    double eval_tau_student = 0.1;
    eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--tau-student", eval_tau_student, "student softmax temperature");

    // ---- select-anchors ----
    auto* sel = app.add_subcommand("select-anchors", "run one anchor selection and dump it");
    sel->set_config("--config");
    std::string sel_ckpt, sel_data, sel_out;
    ExperimentConfig sel_cfg;
    bool sel_auto_eta = true;
    sel->add_option("--checkpoint", sel_ckpt, "model checkpoint")->required();
    sel->add_option("--data", sel_data, "dataset directory")->required();
    sel->add_option("--out", sel_out, "dump file (default stdout)");
    sel->add_option("--omega", sel_cfg.das.omega, "truncation threshold weight");
    sel->add_option("--gamma", sel_cfg.das.gamma, "anchor budget quantile");
    sel->add_option("--beta", sel_cfg.das.beta, "candidate fraction");
    sel->add_option("--k-fraction", sel_cfg.das.k_fraction, "KNN neighbor fraction");
    sel->add_option("--k", sel_cfg.das.k_override, "fixed KNN neighbor count");
    sel->add_option("--eta", sel_cfg.das.eta_override, "fixed per-class anchor count");
    sel->add_option("--tau-student", sel_cfg.loss.tau_student, "student softmax temperature");
    sel->add_flag("!--no-auto-eta", sel_auto_eta, "disable the N/|Y_l| anchor budget default");

    // ---- diag-hessian ----
    auto* diag = app.add_subcommand("diag-hessian", "flatness diagnostics at a checkpoint");
    diag->set_config("--config");
    std::string diag_ckpt, diag_data, diag_out;
    size_t diag_iters = 100, diag_probes = 200, diag_batch = 128;
    double diag_tol = 1e-6;
    uint64_t diag_seed = 0;
    diag->add_option("--checkpoint", diag_ckpt, "model checkpoint")->required();
    diag->add_option("--data", diag_data, "dataset directory")->required();
    diag->add_option("--out", diag_out, "write flatness report here (default stdout)");
    diag->add_option("--iters", diag_iters, "max power iterations");
    diag->add_option("--tol", diag_tol, "power iteration tolerance");
    diag->add_option("--probes", diag_probes, "Hutchinson probes");
    diag->add_option("--probe-batch", diag_batch, "probe batch size");
    diag->add_option("--probe-seed", diag_seed, "probe batch / direction seed");

    // ---- gradcheck ----
    auto* gc = app.add_subcommand("gradcheck", "finite-difference checks of the loss stack");
    gc->set_config("--config");
    uint64_t gc_seed = 0;
    size_t gc_batches = 20;
    double gc_h = 1e-5, gc_tol = 1e-4;
    gc->add_option("--seed", gc_seed, "seed");
    gc->add_option("--batches", gc_batches, "number of random batches");
    gc->add_option("--fd-step", gc_h, "finite-difference step");
    gc->add_option("--tol", gc_tol, "relative error tolerance");

    try {
        app.parse(argc, argv);

        if (app.got_subcommand(synth)) {
            const GcdDataset ds = synth_gmm(synth_cfg);
            std::filesystem::create_directories(synth_out);
            save_dataset_dir(ds, synth_out, synth_csv);
            std::cout << "wrote " << ds.size() << " samples (" << ds.labeled_count()
                      << " labeled) to " << synth_out << "\n";
        } else if (app.got_subcommand(train)) {
            train_cfg.method = method_from_string(train_method);
            train_cfg.dump_anchors = train_dump_anchors;
            const GcdDataset data =
                train_data_dir.empty() ? synth_gmm(train_cfg.data) : load_dataset_dir(train_data_dir);
            if (train_auto_eta) default_eta(train_cfg, data);
            std::filesystem::create_directories(train_cfg.out_dir);
            const RunResult result = run_experiment(train_cfg, data);
            std::cout << "acc_all=" << result.final_eval.acc_all
                      << " acc_old=" << result.final_eval.acc_old
                      << " acc_new=" << result.final_eval.acc_new << "\n";
        } else if (app.got_subcommand(eval)) {
            ModelParams model = load_checkpoint(eval_ckpt);
            const GcdDataset data = load_dataset_dir(eval_data);
            const ClusterState state = compute_cluster_state(model, data, eval_tau_student);
            std::vector<int64_t> truth;
            for (size_t idx : state.sample_indices) truth.push_back(data.truth[idx]);
            const EvalReport report =
                cluster_acc(state.assignments, truth, data.num_classes, data.num_old_classes);
            char buf[160];
            std::snprintf(buf, sizeof buf, "acc_all,acc_old,acc_new\n%.6f,%.6f,%.6f\n",
                          report.acc_all, report.acc_old, report.acc_new);
            std::cout << buf;
        } else if (app.got_subcommand(sel)) {
            ModelParams model = load_checkpoint(sel_ckpt);
            const GcdDataset data = load_dataset_dir(sel_data);
            if (sel_auto_eta) default_eta(sel_cfg, data);
            const ClusterState state = compute_cluster_state(model, data, sel_cfg.loss.tau_student);
            const SelectionResult result =
                select_anchors(state, sel_cfg.das, data.num_old_classes, data.num_classes);
            if (result.skipped)
                std::cerr << "note: no samples assigned to new classes; empty selection\n";
            const std::string dump = anchor_dump_csv(state, result.anchors);
            if (sel_out.empty())
                std::cout << dump;
            else
                write_text_file(sel_out, dump);
        } else if (app.got_subcommand(diag)) {
            ModelParams model = load_checkpoint(diag_ckpt);
            const GcdDataset data = load_dataset_dir(diag_data);
            LossConfig loss;
            const TrainBatch probe = make_probe_batch(data, diag_batch, diag_seed);
            const GradFn grad_fn =
                make_probe_grad_fn(model, probe, loss, loss.tau_teacher_final);
            std::vector<Tensor> params;
            for (Tensor* t : model.trainable()) params.push_back(*t);
            const FlatnessReport report =
                flatness_report(grad_fn, params, diag_iters, diag_tol, diag_probes, diag_seed);
            if (diag_out.empty())
                std::cout << report.to_text();
            else
                write_text_file(diag_out, report.to_text());
        } else if (app.got_subcommand(gc)) {
            const auto t0 = std::chrono::steady_clock::now();
            const GradCheckRunReport report = run_loss_gradcheck(gc_seed, gc_batches, gc_h, gc_tol);
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "checks=%zu batches=%zu max_rel_err=%.3e time=%.2fs -> %s\n", report.checks,
                          report.batches, report.max_rel_err, secs, report.pass ? "PASS" : "FAIL");
            std::cout << buf;
            return report.pass ? 0 : 1;
        }
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // prints help, returns 0
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace flatgcd
