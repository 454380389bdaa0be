// Test-only reference implementations, kept deliberately independent of the
// library code paths they check: plain loops, full sorts and enumerations.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "flatgcd/tensor.hpp"

namespace oracles {

using flatgcd::Tensor;

// ---- scalar loss oracles ---------------------------------------------------

// Contrastive loss, anchors = rows of z, positive = matching row of z_other,
// denominator over the concatenated pool minus the anchor itself.
inline double unsup_contrastive(const Tensor& z, const Tensor& z_other, double tau) {
    const size_t b = z.rows(), d = z.cols();
    std::vector<std::vector<double>> pool;
    for (size_t i = 0; i < b; ++i) {
        std::vector<double> r(d);
        for (size_t j = 0; j < d; ++j) r[j] = z.at(i, j);
        pool.push_back(r);
    }
    for (size_t i = 0; i < b; ++i) {
        std::vector<double> r(d);
        for (size_t j = 0; j < d; ++j) r[j] = z_other.at(i, j);
        pool.push_back(r);
    }
    auto dotp = [&](size_t u, size_t v) {
        double acc = 0.0;
        for (size_t j = 0; j < d; ++j) acc += pool[u][j] * pool[v][j];
        return acc;
    };
    double total = 0.0;
    for (size_t i = 0; i < b; ++i) {
        double denom = 0.0;
        for (size_t u = 0; u < 2 * b; ++u)
            if (u != i) denom += std::exp(dotp(i, u) / tau);
        total += -std::log(std::exp(dotp(i, b + i) / tau) / denom);
    }
    return total / static_cast<double>(b);
}

// Supervised contrastive loss over one stack of rows; anchors without
// positives are skipped.
inline double sup_contrastive(const Tensor& z, const std::vector<int64_t>& labels, double tau) {
    const size_t n = z.rows(), d = z.cols();
    auto dotp = [&](size_t u, size_t v) {
        double acc = 0.0;
        for (size_t j = 0; j < d; ++j) acc += z.at(u, j) * z.at(v, j);
        return acc;
    };
    double total = 0.0;
    size_t anchors = 0;
    for (size_t i = 0; i < n; ++i) {
        std::vector<size_t> positives;
        for (size_t j = 0; j < n; ++j)
            if (j != i && labels[j] == labels[i]) positives.push_back(j);
        if (positives.empty()) continue;
        ++anchors;
        double denom = 0.0;
        for (size_t j = 0; j < n; ++j)
            if (j != i) denom += std::exp(dotp(i, j) / tau);
        double a = 0.0;
        for (size_t p : positives) a += -std::log(std::exp(dotp(i, p) / tau) / denom);
        total += a / static_cast<double>(positives.size());
    }
    return anchors ? total / static_cast<double>(anchors) : 0.0;
}

inline std::vector<double> softmax(const std::vector<double>& logits, double tau) {
    std::vector<double> out(logits.size());
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double denom = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - mx) / tau);
        denom += out[i];
    }
    for (auto& v : out) v /= denom;
    return out;
}

// ---- anchor-selection pipeline ---------------------------------------------

// Full-sort mean distance to the k nearest other members.
inline std::vector<double> knn_mean_distance(const Tensor& feats, size_t k) {
    const size_t m = feats.rows(), d = feats.cols();
    std::vector<double> out(m);
    for (size_t i = 0; i < m; ++i) {
        std::vector<double> dist;
        for (size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            double ss = 0.0;
            for (size_t t = 0; t < d; ++t) {
                const double diff = feats.at(i, t) - feats.at(j, t);
                ss += diff * diff;
            }
            dist.push_back(std::sqrt(ss));
        }
        std::sort(dist.begin(), dist.end());
        double acc = 0.0;
        for (size_t t = 0; t < k; ++t) acc += dist[t];
        out[i] = acc / static_cast<double>(k);
    }
    return out;
}

struct DasOracleResult {
    double t_tru = 0.0;
    size_t eta = 0;
    std::vector<std::vector<size_t>> anchors; // local row indices per cluster
};

// End-to-end selection for one set of clusters, brute force throughout.
// `cluster_feats[j]` / `cluster_probs[j]` list one cluster's members in
// ascending index order; probs are max-confidences.
inline DasOracleResult das_pipeline(const std::vector<Tensor>& cluster_feats,
                                    const std::vector<std::vector<double>>& cluster_probs,
                                    double omega, double gamma, double beta, double k_fraction,
                                    size_t eta_override) {
    DasOracleResult result;

    std::vector<double> all_conf;
    for (const auto& cp : cluster_probs) all_conf.insert(all_conf.end(), cp.begin(), cp.end());
    const double p_max = *std::max_element(all_conf.begin(), all_conf.end());
    const double p_avg = std::accumulate(all_conf.begin(), all_conf.end(), 0.0) /
                         static_cast<double>(all_conf.size());
    result.t_tru = p_avg + (p_max - p_avg) * omega;

    std::vector<size_t> counts;
    for (const auto& cp : cluster_probs) {
        size_t s = 0;
        for (double p : cp)
            if (p > result.t_tru) ++s;
        counts.push_back(s);
    }

    if (eta_override > 0) {
        result.eta = eta_override;
    } else {
        std::vector<size_t> sorted(counts);
        std::sort(sorted.begin(), sorted.end());
        size_t rank = static_cast<size_t>(std::ceil(gamma * static_cast<double>(sorted.size())));
        rank = std::max<size_t>(1, std::min(rank, sorted.size()));
        result.eta = std::max<size_t>(1, sorted[rank - 1]);
    }

    for (size_t j = 0; j < cluster_feats.size(); ++j) {
        const Tensor& feats = cluster_feats[j];
        const size_t m = feats.rows();
        if (m == 0) {
            result.anchors.emplace_back();
            continue;
        }

        size_t peak = 0;
        if (m > 1) {
            size_t k = static_cast<size_t>(std::llround(k_fraction * static_cast<double>(m)));
            k = std::min(std::max<size_t>(1, k), m - 1);
            const std::vector<double> mean_dist = knn_mean_distance(feats, k);
            for (size_t i = 1; i < m; ++i)
                if (mean_dist[i] < mean_dist[peak]) peak = i;
        }

        const size_t want = std::max<size_t>(1, static_cast<size_t>(std::ceil(beta * static_cast<double>(m))));
        std::vector<std::pair<double, size_t>> by_dist;
        for (size_t i = 0; i < m; ++i) {
            double ss = 0.0;
            for (size_t t = 0; t < feats.cols(); ++t) {
                const double diff = feats.at(i, t) - feats.at(peak, t);
                ss += diff * diff;
            }
            by_dist.emplace_back(std::sqrt(ss), i);
        }
        std::sort(by_dist.begin(), by_dist.end());
        std::vector<size_t> candidates;
        for (size_t t = 0; t < want; ++t) candidates.push_back(by_dist[t].second);

        std::sort(candidates.begin(), candidates.end(), [&](size_t a, size_t b) {
            if (cluster_probs[j][a] != cluster_probs[j][b]) return cluster_probs[j][a] > cluster_probs[j][b];
            return a < b;
        });
        candidates.resize(std::min(result.eta, candidates.size()));
        std::sort(candidates.begin(), candidates.end());
        result.anchors.push_back(std::move(candidates));
    }
    return result;
}

// ---- assignment / accuracy ---------------------------------------------------

// Exhaustive minimum-cost assignment of rows to distinct columns (r <= c).
inline double brute_force_assignment_cost(const Tensor& cost) {
    const size_t r = cost.rows(), c = cost.cols();
    std::vector<size_t> cols(c);
    std::iota(cols.begin(), cols.end(), 0);
    double best = 1e300;
    // Permute columns, read off the first r.
    std::sort(cols.begin(), cols.end());
    do {
        double total = 0.0;
        for (size_t i = 0; i < r; ++i) total += cost.at(i, cols[i]);
        best = std::min(best, total);
    } while (std::next_permutation(cols.begin(), cols.end()));
    return best;
}

// Max agreement fraction over every permutation of predicted ids.
inline double brute_force_cluster_acc(const std::vector<int64_t>& pred,
                                      const std::vector<int64_t>& truth, size_t num_classes) {
    std::vector<int64_t> perm(num_classes);
    std::iota(perm.begin(), perm.end(), 0);
    size_t best = 0;
    do {
        size_t agree = 0;
        for (size_t i = 0; i < pred.size(); ++i)
            if (perm[pred[i]] == truth[i]) ++agree;
        best = std::max(best, agree);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(pred.size());
}

// ---- dense symmetric eigenvalues (Jacobi rotations) -------------------------

inline std::vector<double> jacobi_eigenvalues(Tensor a) {
    const size_t n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j) off += a.at(i, j) * a.at(i, j);
        if (off < 1e-24) break;
        for (size_t p = 0; p < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) {
                if (std::abs(a.at(p, q)) < 1e-300) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * a.at(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (size_t i = 0; i < n; ++i) {
                    const double aip = a.at(i, p), aiq = a.at(i, q);
                    a.at(i, p) = c * aip - s * aiq;
                    a.at(i, q) = s * aip + c * aiq;
                }
                for (size_t i = 0; i < n; ++i) {
                    const double api = a.at(p, i), aqi = a.at(q, i);
                    a.at(p, i) = c * api - s * aqi;
                    a.at(q, i) = s * api + c * aqi;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (size_t i = 0; i < n; ++i) eig[i] = a.at(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

} // namespace oracles
