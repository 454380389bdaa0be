#pragma once

#include <cstdint>
#include <vector>

#include "flatgcd/dataset.hpp"
#include "flatgcd/model.hpp"
#include "flatgcd/tensor.hpp"

namespace flatgcd {

// Per-epoch anchor selection for the new-class clusters: a confidence
// truncation threshold sets the per-cluster anchor budget, a KNN-density
// peak locates each cluster's core, the candidate set is the peak's
// neighborhood, and the most confident candidates become hard-pseudo-labeled
// anchors for the next epoch.

// Snapshot of the classifier's view of the unlabeled set.
struct ClusterState {
    std::vector<size_t> sample_indices; // dataset indices, ascending
    Tensor features;                    // (m, d_feat), row t belongs to sample_indices[t]
    Tensor probs;                       // (m, |Y_u|)
    std::vector<int64_t> assignments;   // argmax class per row
};

// Forward pass over the unlabeled samples (no augmentation).
ClusterState compute_cluster_state(ModelParams& model, const GcdDataset& data, double tau_student);

struct DasConfig {
    double omega = 0.5;      // truncation threshold weight
    double gamma = 0.5;      // quantile level for the anchor budget
    double beta = 0.8;       // candidate fraction of each cluster
    double k_fraction = 0.5; // k = round(k_fraction * |C_j|), clamped to [1, |C_j|-1]
    size_t k_override = 0;   // fixed neighbor count when > 0
    size_t alpha = 1;        // epochs trained on the initial anchors
    size_t eta_override = 0; // fixed per-cluster anchor count when > 0

    void validate() const;
    size_t neighbors_for(size_t cluster_size) const;
};

struct AnchorSet {
    // per_class[j - num_old_classes] lists dataset indices anchored to new
    // class j, each granted hard pseudo-label j.
    std::vector<std::vector<size_t>> per_class;
    size_t num_old_classes = 0;
    size_t selection_epoch = 0;

    size_t total() const;
    bool empty() const { return total() == 0; }
};

// --- selection primitives (pure; local indices within one cluster) --------

// T_tru = p_avg + (p_max - p_avg) * omega over the max-confidences of all
// new-assigned samples.
double truncation_threshold(const std::vector<double>& new_max_confidences, double omega);

// s_j = #{i in C_j : max p_i > T_tru} (strict).
std::vector<size_t> confident_counts(const std::vector<std::vector<double>>& cluster_confidences,
                                     double t_tru);

// Nearest-rank lower quantile of S at level gamma, floored at 1.
size_t select_eta(const std::vector<size_t>& counts, double gamma);

// Mean Euclidean distance from each member to its k nearest other members.
std::vector<double> knn_mean_distance(const Tensor& cluster_features, size_t k);

// Member with the smallest mean KNN distance (highest density); ties go to
// the lowest index. A singleton cluster's only member is the peak.
size_t density_peak(const Tensor& cluster_features, size_t k);

// The peak plus the ceil(beta*|C_j|)-1 members nearest to it.
std::vector<size_t> candidate_set(const Tensor& cluster_features, size_t peak, double beta);

// Top-min(eta, |candidates|) candidates by max-probability, ties by lower
// index.
std::vector<size_t> final_anchors(const std::vector<size_t>& candidates,
                                  const std::vector<double>& max_probs, size_t eta);

// --- full pipeline ---------------------------------------------------------

struct SelectionResult {
    AnchorSet anchors;
    double t_tru = 0.0;
    size_t eta = 0;
    bool skipped = false; // no sample was assigned to any new class
};

SelectionResult select_anchors(const ClusterState& state, const DasConfig& cfg,
                               size_t num_old_classes, size_t num_classes);

// Effective training labels: ground truth for the base labeled set, the
// hard pseudo-label for anchors, -1 elsewhere. Anchors replace any previous
// selection wholesale. Throws ContractError if an anchor overlaps the
// labeled set.
std::vector<int64_t> update_labeled_set(const GcdDataset& data, const AnchorSet& anchors);

// Purity against held-out truth: an anchor for class j counts as clean when
// class_to_truth[j] equals its ground-truth class. Empty anchor sets report 0.
double anchor_purity(const AnchorSet& anchors, const GcdDataset& data,
                     const std::vector<int>& class_to_truth);

} // namespace flatgcd
