#pragma once

#include <cstdint>
#include <vector>

#include "flatgcd/tensor.hpp"

namespace flatgcd {

// Clustering accuracy under the optimal cluster-to-class permutation, with
// the All/Old/New reporting split. One global matching is computed on all
// samples and reused for the subset scores.

struct Assignment {
    std::vector<int> row_to_col; // -1 when a row is unassigned (rows > cols)
    double total_cost = 0.0;
};

// Minimum-cost assignment on a finite rectangular matrix (shortest
// augmenting path with potentials, O(n^2 m)).
Assignment hungarian(const Tensor& cost);

struct EvalReport {
    double acc_all = 0.0;
    double acc_old = 0.0;
    double acc_new = 0.0;
    size_t n_all = 0, n_old = 0, n_new = 0;
    std::vector<int> permutation;    // predicted cluster id -> truth class id
    std::vector<size_t> confusion;   // row-major (num_classes x num_classes), [pred][truth]
    size_t num_classes = 0;
};

// pred and truth hold class ids in [0, num_classes). Old samples are those
// whose ground-truth class id is below num_old_classes. The permutation is
// fit once on everything, then applied to the subsets.
EvalReport cluster_acc(const std::vector<int64_t>& pred, const std::vector<int64_t>& truth,
                       size_t num_classes, size_t num_old_classes);

} // namespace flatgcd
