#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flatgcd/tensor.hpp"

namespace flatgcd {

// Category-discovery datasets: a labeled subset covering the old classes
// (half of each old class's samples) and an unlabeled remainder spanning old
// and new classes. Ground-truth labels ride along for evaluation only.

struct GcdDataset {
    Tensor samples;                    // (n, d)
    std::vector<int64_t> truth;        // held out, evaluation only
    std::vector<uint8_t> labeled;      // 1 = member of the labeled set
    size_t num_classes = 0;            // |Y_u|
    size_t num_old_classes = 0;        // |Y_l|; old classes are ids [0, num_old_classes)
    uint64_t seed = 0;

    size_t size() const { return samples.rows(); }
    size_t dim() const { return samples.cols(); }
    size_t num_new_classes() const { return num_classes - num_old_classes; }
    bool is_old_class(int64_t c) const { return c >= 0 && c < static_cast<int64_t>(num_old_classes); }
    size_t labeled_count() const;
    std::vector<size_t> labeled_indices() const;
    std::vector<size_t> unlabeled_indices() const;
};

struct SynthConfig {
    size_t num_classes = 10;
    size_t num_old_classes = 5;
    size_t samples_per_class = 100;
    size_t input_dim = 16;
    double cluster_std = 1.0;
    double separation = 6.0;  // minimum pairwise center distance
    double longtail_decay = 1.0; // geometric class-size decay; 1 = balanced
    uint64_t seed = 0;
};

// Gaussian-mixture dataset: class centers drawn on a sphere and resampled
// until all pairwise distances reach the separation, isotropic Gaussian
// samples, then the half-per-old-class labeled split. Deterministic per seed.
GcdDataset synth_gmm(const SynthConfig& cfg);

// Binary embedding format: magic "GCDE", u32 version, u64 n, u64 d, then
// n*d little-endian 64-bit floats. Labels are a separate file of n
// little-endian int64.
void save_embeddings_binary(const Tensor& features, const std::string& path);
Tensor load_embeddings_binary(const std::string& path);
void save_labels_binary(const std::vector<int64_t>& labels, const std::string& path);
std::vector<int64_t> load_labels_binary(const std::string& path);

// CSV format: first line "n,d", then one row per sample, 17 significant
// digits so values round-trip.
void save_embeddings_csv(const Tensor& features, const std::string& path);
Tensor load_embeddings_csv(const std::string& path);

// Assemble a dataset from exported features/labels; classes listed in
// old_classes get the seeded half-labeled split. Class ids are remapped so
// old classes occupy [0, |old|).
GcdDataset load_embeddings(const std::string& features_path, const std::string& labels_path,
                           const std::vector<int64_t>& old_classes, uint64_t seed);

// Shared split logic: marks half of each old class's samples as labeled,
// choosing the half with a seeded shuffle.
void apply_labeled_split(GcdDataset& ds);

} // namespace flatgcd
