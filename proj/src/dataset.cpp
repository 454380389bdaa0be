#include "flatgcd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "flatgcd/rng.hpp"

namespace flatgcd {

size_t GcdDataset::labeled_count() const {
    size_t n = 0;
    for (uint8_t b : labeled) n += b;
    return n;
}

std::vector<size_t> GcdDataset::labeled_indices() const {
    std::vector<size_t> out;
    for (size_t i = 0; i < labeled.size(); ++i)
        if (labeled[i]) out.push_back(i);
    return out;
}

std::vector<size_t> GcdDataset::unlabeled_indices() const {
    std::vector<size_t> out;
    for (size_t i = 0; i < labeled.size(); ++i)
        if (!labeled[i]) out.push_back(i);
    return out;
}

void apply_labeled_split(GcdDataset& ds) {
    ds.labeled.assign(ds.size(), 0);
    Rng rng(ds.seed ^ 0x5eedb0d5a11ce5ULL);
    for (size_t c = 0; c < ds.num_old_classes; ++c) {
        std::vector<size_t> members;
        for (size_t i = 0; i < ds.size(); ++i)
            if (ds.truth[i] == static_cast<int64_t>(c)) members.push_back(i);
        rng.shuffle(members);
        const size_t take = members.size() / 2; // floor of 50%
        for (size_t i = 0; i < take; ++i) ds.labeled[members[i]] = 1;
    }
}

GcdDataset synth_gmm(const SynthConfig& cfg) {
    if (cfg.num_old_classes > cfg.num_classes)
        throw ConfigError("synth_gmm: old classes exceed total classes");
    if (cfg.num_classes == 0 || cfg.samples_per_class == 0 || cfg.input_dim == 0)
        throw ConfigError("synth_gmm: counts and dimension must be positive");
    if (cfg.separation <= 0.0 || cfg.cluster_std <= 0.0)
        throw ConfigError("synth_gmm: separation and std must be positive");
    if (cfg.longtail_decay <= 0.0 || cfg.longtail_decay > 1.0)
        throw ConfigError("synth_gmm: longtail decay must lie in (0,1]");

    Rng rng(cfg.seed);

    // Centers on a sphere sized so the separation is typically met; resample
    // offending centers, give up after 1000 retries.
    const double radius = cfg.separation;
    std::vector<std::vector<double>> centers;
    auto draw_center = [&] {
        std::vector<double> c(cfg.input_dim);
        double ss = 0.0;
        for (auto& v : c) {
            v = rng.normal();
            ss += v * v;
        }
        const double scale = radius / std::sqrt(ss + 1e-300);
        for (auto& v : c) v *= scale;
        return c;
    };
    size_t retries = 0;
    while (centers.size() < cfg.num_classes) {
        std::vector<double> cand = draw_center();
        bool ok = true;
        for (const auto& c : centers) {
            double ss = 0.0;
            for (size_t t = 0; t < cfg.input_dim; ++t) ss += (cand[t] - c[t]) * (cand[t] - c[t]);
            if (std::sqrt(ss) < cfg.separation) {
                ok = false;
                break;
            }
        }
        if (ok) {
            centers.push_back(std::move(cand));
        } else if (++retries > 1000) {
            throw ConfigError("synth_gmm: could not place centers at the requested separation");
        }
    }

    std::vector<size_t> class_sizes(cfg.num_classes);
    for (size_t c = 0; c < cfg.num_classes; ++c) {
        const double raw = static_cast<double>(cfg.samples_per_class) *
                           std::pow(cfg.longtail_decay, static_cast<double>(c));
        class_sizes[c] = std::max<size_t>(1, static_cast<size_t>(std::llround(raw)));
    }

    size_t total = 0;
    for (size_t s : class_sizes) total += s;

    GcdDataset ds;
    ds.num_classes = cfg.num_classes;
    ds.num_old_classes = cfg.num_old_classes;
    ds.seed = cfg.seed;
    ds.samples = Tensor::zeros(total, cfg.input_dim);
    ds.truth.resize(total);

    // Draw class by class, then shuffle the global order.
    std::vector<size_t> order(total);
    size_t row = 0;
    for (size_t c = 0; c < cfg.num_classes; ++c) {
        for (size_t s = 0; s < class_sizes[c]; ++s, ++row) {
            ds.truth[row] = static_cast<int64_t>(c);
            for (size_t t = 0; t < cfg.input_dim; ++t)
                ds.samples.at(row, t) = centers[c][t] + cfg.cluster_std * rng.normal();
        }
    }
    for (size_t i = 0; i < total; ++i) order[i] = i;
    rng.shuffle(order);
    Tensor shuffled = Tensor::zeros(total, cfg.input_dim);
    std::vector<int64_t> shuffled_truth(total);
    for (size_t i = 0; i < total; ++i) {
        shuffled_truth[i] = ds.truth[order[i]];
        for (size_t t = 0; t < cfg.input_dim; ++t) shuffled.at(i, t) = ds.samples.at(order[i], t);
    }
    ds.samples = std::move(shuffled);
    ds.truth = std::move(shuffled_truth);

    apply_labeled_split(ds);
    return ds;
}

namespace {

constexpr char kMagic[4] = {'G', 'C', 'D', 'E'};
constexpr uint32_t kVersion = 1;

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

uint32_t read_u32(std::ifstream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated file: " + path);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

uint64_t read_u64(std::ifstream& is, const std::string& path) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated file: " + path);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

} // namespace

void save_embeddings_binary(const Tensor& features, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u64(os, features.rows());
    write_u64(os, features.cols());
    for (double d : features.values()) {
        uint64_t bits;
        std::memcpy(&bits, &d, 8);
        write_u64(os, bits);
    }
    if (!os) throw IoError("write failure: " + path);
}

Tensor load_embeddings_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("malformed header (bad magic): " + path);
    if (read_u32(is, path) != kVersion) throw IoError("unsupported version: " + path);
    const uint64_t n = read_u64(is, path);
    const uint64_t d = read_u64(is, path);
    Tensor out = Tensor::zeros(n, d);
    for (auto& v : out.values()) {
        const uint64_t bits = read_u64(is, path);
        std::memcpy(&v, &bits, 8);
    }
    if (!out.all_finite()) throw IoError("non-finite values in " + path);
    return out;
}

void save_labels_binary(const std::vector<int64_t>& labels, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    for (int64_t v : labels) write_u64(os, static_cast<uint64_t>(v));
    if (!os) throw IoError("write failure: " + path);
}

std::vector<int64_t> load_labels_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    std::vector<int64_t> out;
    while (true) {
        unsigned char b[8];
        if (!is.read(reinterpret_cast<char*>(b), 8)) break;
        uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        out.push_back(static_cast<int64_t>(v));
    }
    return out;
}

void save_embeddings_csv(const Tensor& features, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << features.rows() << "," << features.cols() << "\n";
    char buf[64];
    for (size_t i = 0; i < features.rows(); ++i) {
        for (size_t j = 0; j < features.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", features.at(i, j));
            os << buf << (j + 1 < features.cols() ? "," : "\n");
        }
    }
    if (!os) throw IoError("write failure: " + path);
}

Tensor load_embeddings_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(is, line)) throw IoError("malformed header (empty file): " + path);
    size_t n = 0, d = 0;
    {
        std::istringstream header(line);
        char comma = 0;
        if (!(header >> n >> comma >> d) || comma != ',')
            throw IoError("malformed header (expected \"n,d\"): " + path);
    }
    Tensor out = Tensor::zeros(n, d);
    for (size_t i = 0; i < n; ++i) {
        if (!std::getline(is, line)) throw IoError("row count mismatch in " + path);
        std::istringstream row(line);
        std::string cell;
        for (size_t j = 0; j < d; ++j) {
            if (!std::getline(row, cell, ',')) throw IoError("short row in " + path);
            try {
                out.at(i, j) = std::stod(cell);
            } catch (const std::exception&) {
                throw IoError("unparsable value in " + path);
            }
        }
    }
    if (!out.all_finite()) throw IoError("non-finite values in " + path);
    return out;
}

GcdDataset load_embeddings(const std::string& features_path, const std::string& labels_path,
                           const std::vector<int64_t>& old_classes, uint64_t seed) {
    // Sniff the magic to pick the feature format; labels follow suit
    // (binary int64 stream vs one integer per text line).
    Tensor features;
    std::vector<int64_t> raw_labels;
    {
        std::ifstream probe(features_path, std::ios::binary);
        if (!probe) throw IoError("cannot open: " + features_path);
        char magic[4] = {0, 0, 0, 0};
        probe.read(magic, 4);
        const bool binary = std::memcmp(magic, kMagic, 4) == 0;
        probe.close();
        if (binary) {
            features = load_embeddings_binary(features_path);
            raw_labels = load_labels_binary(labels_path);
        } else {
            features = load_embeddings_csv(features_path);
            std::ifstream ls(labels_path);
            if (!ls) throw IoError("cannot open: " + labels_path);
            std::string line;
            while (std::getline(ls, line)) {
                if (line.empty()) continue;
                try {
                    raw_labels.push_back(std::stoll(line));
                } catch (const std::exception&) {
                    throw IoError("unparsable label in " + labels_path);
                }
            }
        }
    }
    if (raw_labels.size() != features.rows())
        throw IoError("row count mismatch between " + features_path + " and " + labels_path);

    // Remap: old classes take ids [0, |old|) in list order, remaining
    // distinct labels follow in sorted order.
    std::map<int64_t, int64_t> remap;
    for (size_t i = 0; i < old_classes.size(); ++i) {
        if (remap.count(old_classes[i])) throw ConfigError("load_embeddings: duplicate old class id");
        remap[old_classes[i]] = static_cast<int64_t>(i);
    }
    std::map<int64_t, int64_t> extras;
    for (int64_t y : raw_labels)
        if (!remap.count(y)) extras[y] = 0;
    int64_t next = static_cast<int64_t>(old_classes.size());
    for (auto& [y, id] : extras) {
        id = next++;
        remap[y] = id;
    }

    GcdDataset ds;
    ds.samples = std::move(features);
    ds.truth.reserve(raw_labels.size());
    for (int64_t y : raw_labels) ds.truth.push_back(remap.at(y));
    ds.num_classes = static_cast<size_t>(next);
    ds.num_old_classes = old_classes.size();
    ds.seed = seed;
    apply_labeled_split(ds);
    return ds;
}

} // namespace flatgcd
