#include "flatgcd/anchors.hpp"

#include <algorithm>
#include <cmath>

#include "flatgcd/kernels.hpp"

namespace flatgcd {

void DasConfig::validate() const {
    if (omega < 0.0 || omega > 1.0) throw ConfigError("DasConfig: omega must lie in [0,1]");
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("DasConfig: gamma must lie in [0,1]");
    if (beta <= 0.0 || beta > 1.0) throw ConfigError("DasConfig: beta must lie in (0,1]");
    if (k_fraction <= 0.0 || k_fraction > 1.0) throw ConfigError("DasConfig: k_fraction must lie in (0,1]");
}

size_t DasConfig::neighbors_for(size_t cluster_size) const {
    if (cluster_size <= 1) return 0;
    size_t k = k_override > 0
                   ? k_override
                   : static_cast<size_t>(std::llround(k_fraction * static_cast<double>(cluster_size)));
    k = std::max<size_t>(1, k);
    return std::min(k, cluster_size - 1);
}

size_t AnchorSet::total() const {
    size_t n = 0;
    for (const auto& v : per_class) n += v.size();
    return n;
}

ClusterState compute_cluster_state(ModelParams& model, const GcdDataset& data, double tau_student) {
    ClusterState state;
    state.sample_indices = data.unlabeled_indices();
    const size_t m = state.sample_indices.size();
    Tensor batch = Tensor::zeros(m, data.dim());
    for (size_t t = 0; t < m; ++t)
        for (size_t j = 0; j < data.dim(); ++j) batch.at(t, j) = data.samples.at(state.sample_indices[t], j);
    state.features = encode(model, batch);
    state.probs = classify(model, state.features, tau_student).second;
    state.assignments.resize(m);
    for (size_t t = 0; t < m; ++t) {
        size_t arg = 0;
        for (size_t c = 1; c < state.probs.cols(); ++c)
            if (state.probs.at(t, c) > state.probs.at(t, arg)) arg = c;
        state.assignments[t] = static_cast<int64_t>(arg);
    }
    return state;
}

double truncation_threshold(const std::vector<double>& new_max_confidences, double omega) {
    if (new_max_confidences.empty())
        throw ContractError("truncation_threshold: no samples assigned to new classes");
    double sum = 0.0, mx = new_max_confidences[0];
    for (double p : new_max_confidences) {
        sum += p;
        mx = std::max(mx, p);
    }
    const double avg = sum / static_cast<double>(new_max_confidences.size());
    return avg + (mx - avg) * omega;
}

std::vector<size_t> confident_counts(const std::vector<std::vector<double>>& cluster_confidences,
                                     double t_tru) {
    std::vector<size_t> counts;
    counts.reserve(cluster_confidences.size());
    for (const auto& cluster : cluster_confidences) {
        size_t s = 0;
        for (double p : cluster)
            if (p > t_tru) ++s;
        counts.push_back(s);
    }
    return counts;
}

size_t select_eta(const std::vector<size_t>& counts, double gamma) {
    if (counts.empty()) throw ContractError("select_eta: empty count vector");
    std::vector<size_t> sorted(counts);
    std::sort(sorted.begin(), sorted.end());
    // Nearest-rank lower quantile: rank ceil(gamma * n), 1-based.
    const size_t n = sorted.size();
    size_t rank = static_cast<size_t>(std::ceil(gamma * static_cast<double>(n)));
    if (rank == 0) rank = 1;
    if (rank > n) rank = n;
    return std::max<size_t>(1, sorted[rank - 1]);
}

std::vector<double> knn_mean_distance(const Tensor& cluster_features, size_t k) {
    const size_t m = cluster_features.rows();
    if (m < 2) throw ContractError("knn_mean_distance: cluster must have at least 2 members");
    if (k < 1 || k > m - 1) throw ContractError("knn_mean_distance: k out of range");

    Tensor dist = Tensor::zeros(m, m);
    kern::pairwise_dist(dist.data(), cluster_features.data(), m, cluster_features.cols());

    std::vector<double> mean_dist(m);
    std::vector<double> row;
    row.reserve(m - 1);
    for (size_t i = 0; i < m; ++i) {
        row.clear();
        for (size_t j = 0; j < m; ++j)
            if (j != i) row.push_back(dist.at(i, j));
        // Sum the k smallest in ascending order so the result is a fixed
        // function of the distance multiset.
        std::partial_sort(row.begin(), row.begin() + k, row.end());
        double acc = 0.0;
        for (size_t t = 0; t < k; ++t) acc += row[t];
        mean_dist[i] = acc / static_cast<double>(k);
    }
    return mean_dist;
}

size_t density_peak(const Tensor& cluster_features, size_t k) {
    if (cluster_features.rows() == 1) return 0; // singleton is trivially the peak
    const std::vector<double> mean_dist = knn_mean_distance(cluster_features, k);
    size_t best = 0;
    for (size_t i = 1; i < mean_dist.size(); ++i)
        if (mean_dist[i] < mean_dist[best]) best = i;
    return best;
}

std::vector<size_t> candidate_set(const Tensor& cluster_features, size_t peak, double beta) {
    if (beta <= 0.0 || beta > 1.0) throw ConfigError("candidate_set: beta must lie in (0,1]");
    const size_t m = cluster_features.rows();
    if (peak >= m) throw ContractError("candidate_set: peak index out of range");
    const size_t want = std::max<size_t>(1, static_cast<size_t>(std::ceil(beta * static_cast<double>(m))));

    std::vector<std::pair<double, size_t>> by_dist;
    by_dist.reserve(m);
    const size_t d = cluster_features.cols();
    for (size_t i = 0; i < m; ++i) {
        double ss = 0.0;
        for (size_t t = 0; t < d; ++t) {
            const double diff = cluster_features.at(i, t) - cluster_features.at(peak, t);
            ss += diff * diff;
        }
        by_dist.emplace_back(std::sqrt(ss), i);
    }
    std::sort(by_dist.begin(), by_dist.end()); // peak itself sorts first (distance 0, ties by index)
    std::vector<size_t> out;
    out.reserve(want);
    for (size_t t = 0; t < want; ++t) out.push_back(by_dist[t].second);
    return out;
}

std::vector<size_t> final_anchors(const std::vector<size_t>& candidates,
                                  const std::vector<double>& max_probs, size_t eta) {
    if (candidates.empty()) throw ContractError("final_anchors: empty candidate set");
    std::vector<size_t> order(candidates);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (max_probs[a] != max_probs[b]) return max_probs[a] > max_probs[b];
        return a < b;
    });
    order.resize(std::min(eta, order.size()));
    return order;
}

SelectionResult select_anchors(const ClusterState& state, const DasConfig& cfg,
                               size_t num_old_classes, size_t num_classes) {
    cfg.validate();
    SelectionResult result;
    const size_t num_new = num_classes - num_old_classes;
    result.anchors.per_class.assign(num_new, {});
    result.anchors.num_old_classes = num_old_classes;

    const size_t m = state.sample_indices.size();
    std::vector<double> max_prob(m);
    for (size_t t = 0; t < m; ++t) {
        double mx = state.probs.at(t, 0);
        for (size_t c = 1; c < state.probs.cols(); ++c) mx = std::max(mx, state.probs.at(t, c));
        max_prob[t] = mx;
    }

    // Partition the new-assigned samples into clusters (ascending row order).
    std::vector<std::vector<size_t>> clusters(num_new); // local rows into state
    std::vector<double> new_confidences;
    for (size_t t = 0; t < m; ++t) {
        const int64_t a = state.assignments[t];
        if (a < static_cast<int64_t>(num_old_classes)) continue;
        clusters[a - num_old_classes].push_back(t);
        new_confidences.push_back(max_prob[t]);
    }
    if (new_confidences.empty()) {
        result.skipped = true;
        return result;
    }

    result.t_tru = truncation_threshold(new_confidences, cfg.omega);
    std::vector<std::vector<double>> cluster_conf(num_new);
    for (size_t j = 0; j < num_new; ++j)
        for (size_t row : clusters[j]) cluster_conf[j].push_back(max_prob[row]);
    const std::vector<size_t> counts = confident_counts(cluster_conf, result.t_tru);
    result.eta = cfg.eta_override > 0 ? cfg.eta_override : select_eta(counts, cfg.gamma);

    for (size_t j = 0; j < num_new; ++j) {
        const auto& members = clusters[j];
        if (members.empty()) continue;
        Tensor feats = Tensor::zeros(members.size(), state.features.cols());
        for (size_t r = 0; r < members.size(); ++r)
            for (size_t c = 0; c < state.features.cols(); ++c)
                feats.at(r, c) = state.features.at(members[r], c);

        size_t peak = 0;
        if (members.size() > 1) peak = density_peak(feats, cfg.neighbors_for(members.size()));
        const std::vector<size_t> candidates = candidate_set(feats, peak, cfg.beta);
        std::vector<double> cand_probs(members.size());
        for (size_t r = 0; r < members.size(); ++r) cand_probs[r] = max_prob[members[r]];
        const std::vector<size_t> chosen = final_anchors(candidates, cand_probs, result.eta);
        for (size_t local : chosen)
            result.anchors.per_class[j].push_back(state.sample_indices[members[local]]);
        std::sort(result.anchors.per_class[j].begin(), result.anchors.per_class[j].end());
    }
    return result;
}

std::vector<int64_t> update_labeled_set(const GcdDataset& data, const AnchorSet& anchors) {
    std::vector<int64_t> labels(data.size(), -1);
    for (size_t i = 0; i < data.size(); ++i)
        if (data.labeled[i]) labels[i] = data.truth[i];
    for (size_t j = 0; j < anchors.per_class.size(); ++j) {
        const int64_t cls = static_cast<int64_t>(anchors.num_old_classes + j);
        for (size_t idx : anchors.per_class[j]) {
            if (idx >= data.size()) throw ContractError("update_labeled_set: anchor index out of range");
            if (data.labeled[idx])
                throw ContractError("update_labeled_set: anchor overlaps the labeled set");
            labels[idx] = cls;
        }
    }
    return labels;
}

double anchor_purity(const AnchorSet& anchors, const GcdDataset& data,
                     const std::vector<int>& class_to_truth) {
    size_t total = 0, clean = 0;
    for (size_t j = 0; j < anchors.per_class.size(); ++j) {
        const size_t cls = anchors.num_old_classes + j;
        for (size_t idx : anchors.per_class[j]) {
            ++total;
            if (cls < class_to_truth.size() &&
                class_to_truth[cls] == static_cast<int>(data.truth[idx]))
                ++clean;
        }
    }
    return total ? static_cast<double>(clean) / static_cast<double>(total) : 0.0;
}

} // namespace flatgcd
