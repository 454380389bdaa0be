#include "flatgcd/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace flatgcd {

namespace {

DenseLayer init_layer(size_t out, size_t in, Rng& rng) {
    DenseLayer layer;
    layer.weight = Tensor::zeros(out, in);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& w : layer.weight.values()) w = rng.uniform(-bound, bound);
    layer.bias = Tensor::zeros(1, out);
    return layer;
}

} // namespace

std::vector<Tensor*> ModelParams::trainable() {
    std::vector<Tensor*> out;
    for (size_t i = 0; i < encoder.size(); ++i) {
        if (cfg.freeze_all_but_last && i + 1 < encoder.size()) continue;
        out.push_back(&encoder[i].weight);
        out.push_back(&encoder[i].bias);
    }
    out.push_back(&projection.weight);
    out.push_back(&projection.bias);
    out.push_back(&prototypes);
    return out;
}

void ModelParams::renormalize_prototypes() {
    for (size_t i = 0; i < prototypes.rows(); ++i) {
        double ss = 0.0;
        for (size_t j = 0; j < prototypes.cols(); ++j) ss += prototypes.at(i, j) * prototypes.at(i, j);
        const double inv = 1.0 / std::sqrt(ss + 1e-12);
        for (size_t j = 0; j < prototypes.cols(); ++j) prototypes.at(i, j) *= inv;
    }
}

ModelParams init_model(const ModelConfig& cfg, uint64_t seed) {
    if (cfg.input_dim == 0 || cfg.feature_dim == 0 || cfg.projection_dim == 0 || cfg.num_classes == 0)
        throw ConfigError("init_model: all dimensions must be positive");
    Rng rng(seed);
    ModelParams p;
    p.cfg = cfg;
    size_t in = cfg.input_dim;
    for (size_t h : cfg.encoder_hidden) {
        p.encoder.push_back(init_layer(h, in, rng));
        in = h;
    }
    p.encoder.push_back(init_layer(cfg.feature_dim, in, rng));
    p.projection = init_layer(cfg.projection_dim, cfg.feature_dim, rng);
    p.prototypes = Tensor::zeros(cfg.num_classes, cfg.feature_dim);
    for (auto& v : p.prototypes.values()) v = rng.normal();
    p.renormalize_prototypes();
    return p;
}

ModelVars bind_model(Tape& tape, ModelParams& params) {
    std::vector<Var> leaves;
    for (Tensor* t : params.trainable()) leaves.push_back(tape.leaf(*t));
    return assemble_model_vars(tape, params, leaves);
}

ModelVars assemble_model_vars(Tape& tape, const ModelParams& params,
                              const std::vector<Var>& trainable_vars) {
    ModelVars m;
    size_t next = 0;
    auto take = [&]() {
        if (next >= trainable_vars.size())
            throw ContractError("assemble_model_vars: too few trainable vars");
        return trainable_vars[next++];
    };
    for (size_t i = 0; i < params.encoder.size(); ++i) {
        const bool frozen = params.cfg.freeze_all_but_last && i + 1 < params.encoder.size();
        if (frozen) {
            m.enc_w.push_back(tape.constant(params.encoder[i].weight));
            m.enc_b.push_back(tape.constant(params.encoder[i].bias));
        } else {
            m.enc_w.push_back(take());
            m.enc_b.push_back(take());
            m.trainable.push_back(m.enc_w.back());
            m.trainable.push_back(m.enc_b.back());
        }
    }
    m.proj_w = take();
    m.proj_b = take();
    m.prototypes = take();
    m.trainable.push_back(m.proj_w);
    m.trainable.push_back(m.proj_b);
    m.trainable.push_back(m.prototypes);
    if (next != trainable_vars.size())
        throw ContractError("assemble_model_vars: too many trainable vars");
    return m;
}

Var encode(Tape& tape, const ModelVars& m, Var batch) {
    Var x = batch;
    for (size_t i = 0; i < m.enc_w.size(); ++i) {
        x = tape.add_rowvec(tape.matmul_nt(x, m.enc_w[i]), m.enc_b[i]);
        if (i + 1 < m.enc_w.size()) x = tape.relu(x); // final encoder layer stays linear
    }
    return x;
}

Var project(Tape& tape, const ModelVars& m, Var features) {
    return tape.l2norm_rows(tape.add_rowvec(tape.matmul_nt(features, m.proj_w), m.proj_b));
}

ClassifyOut classify(Tape& tape, const ModelVars& m, Var features, double temperature) {
    if (temperature <= 0.0) throw ConfigError("classify: temperature must be > 0");
    const Var logits = tape.matmul_nt(tape.l2norm_rows(features), m.prototypes);
    return ClassifyOut{logits, tape.softmax_rows(logits, temperature)};
}

Tensor encode(ModelParams& params, const Tensor& batch) {
    Tape tape;
    ModelVars m = bind_model(tape, params);
    return tape.value(encode(tape, m, tape.constant(batch)));
}

Tensor project(ModelParams& params, const Tensor& features) {
    Tape tape;
    ModelVars m = bind_model(tape, params);
    return tape.value(project(tape, m, tape.constant(features)));
}

std::pair<Tensor, Tensor> classify(ModelParams& params, const Tensor& features, double temperature) {
    Tape tape;
    ModelVars m = bind_model(tape, params);
    const ClassifyOut out = classify(tape, m, tape.constant(features), temperature);
    return {tape.value(out.logits), tape.value(out.probs)};
}

Tensor augment(const Tensor& batch, Rng& rng, double noise_sigma, double dropout_p) {
    Tensor view = batch;
    for (auto& v : view.values()) v += noise_sigma * rng.normal();
    for (auto& v : view.values())
        if (rng.uniform() < dropout_p) v = 0.0;
    return view;
}

namespace {

void write_u32(std::ofstream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ofstream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ofstream& os, double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64(os, bits);
}

uint32_t read_u32(std::ifstream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated checkpoint: " + path);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

uint64_t read_u64(std::ifstream& is, const std::string& path) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated checkpoint: " + path);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

double read_f64(std::ifstream& is, const std::string& path) {
    const uint64_t bits = read_u64(is, path);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

void write_tensor(std::ofstream& os, const Tensor& t) {
    for (double v : t.values()) write_f64(os, v);
}

void read_tensor(std::ifstream& is, Tensor& t, const std::string& path) {
    for (auto& v : t.values()) v = read_f64(is, path);
}

constexpr char kMagic[4] = {'G', 'C', 'D', 'M'};
constexpr uint32_t kVersion = 1;

} // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, static_cast<uint32_t>(params.encoder.size()));
    write_u32(os, params.cfg.freeze_all_but_last ? 1u : 0u);
    for (const auto& layer : params.encoder) {
        write_u64(os, layer.weight.rows());
        write_u64(os, layer.weight.cols());
    }
    write_u64(os, params.projection.weight.rows());
    write_u64(os, params.projection.weight.cols());
    write_u64(os, params.prototypes.rows());
    write_u64(os, params.prototypes.cols());
    for (const auto& layer : params.encoder) {
        write_tensor(os, layer.weight);
        write_tensor(os, layer.bias);
    }
    write_tensor(os, params.projection.weight);
    write_tensor(os, params.projection.bias);
    write_tensor(os, params.prototypes);
    if (!os) throw IoError("write failure: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("bad checkpoint magic: " + path);
    const uint32_t version = read_u32(is, path);
    if (version != kVersion) throw IoError("unsupported checkpoint version: " + path);
    const uint32_t n_enc = read_u32(is, path);
    const uint32_t freeze = read_u32(is, path);

    ModelParams p;
    p.cfg.freeze_all_but_last = freeze != 0;
    std::vector<std::pair<uint64_t, uint64_t>> enc_shapes;
    for (uint32_t i = 0; i < n_enc; ++i) {
        const uint64_t out = read_u64(is, path);
        const uint64_t in = read_u64(is, path);
        enc_shapes.emplace_back(out, in);
    }
    const uint64_t proj_out = read_u64(is, path);
    const uint64_t proj_in = read_u64(is, path);
    const uint64_t proto_rows = read_u64(is, path);
    const uint64_t proto_cols = read_u64(is, path);

    p.cfg.input_dim = enc_shapes.empty() ? 0 : enc_shapes.front().second;
    for (size_t i = 0; i + 1 < enc_shapes.size(); ++i) p.cfg.encoder_hidden.push_back(enc_shapes[i].first);
    p.cfg.feature_dim = enc_shapes.empty() ? 0 : enc_shapes.back().first;
    p.cfg.projection_dim = proj_out;
    p.cfg.num_classes = proto_rows;

    for (auto [out, in] : enc_shapes) {
        DenseLayer layer;
        layer.weight = Tensor::zeros(out, in);
        layer.bias = Tensor::zeros(1, out);
        p.encoder.push_back(std::move(layer));
    }
    p.projection.weight = Tensor::zeros(proj_out, proj_in);
    p.projection.bias = Tensor::zeros(1, proj_out);
    p.prototypes = Tensor::zeros(proto_rows, proto_cols);

    for (auto& layer : p.encoder) {
        read_tensor(is, layer.weight, path);
        read_tensor(is, layer.bias, path);
    }
    read_tensor(is, p.projection.weight, path);
    read_tensor(is, p.projection.bias, path);
    read_tensor(is, p.prototypes, path);
    return p;
}

} // namespace flatgcd
