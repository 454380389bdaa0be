#include "flatgcd/cluster_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace flatgcd {

namespace {

// Shortest-augmenting-path assignment for an n x m matrix with n <= m.
// Returns col_of_row. Indices are 1-based internally (0 is the virtual
// start), following the classical potentials formulation.
std::vector<int> solve_rows_leq_cols(const Tensor& a) {
    const int n = static_cast<int>(a.rows());
    const int m = static_cast<int>(a.cols());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);

    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = -1;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = a.at(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> col_of_row(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] != 0) col_of_row[p[j] - 1] = j - 1;
    return col_of_row;
}

} // namespace

Assignment hungarian(const Tensor& cost) {
    if (cost.numel() == 0) throw ContractError("hungarian: empty cost matrix");
    if (!cost.all_finite()) throw NumericError("hungarian: cost matrix must be finite");

    const size_t r = cost.rows(), c = cost.cols();
    Assignment out;
    if (r <= c) {
        out.row_to_col = solve_rows_leq_cols(cost);
    } else {
        Tensor t = Tensor::zeros(c, r);
        for (size_t i = 0; i < r; ++i)
            for (size_t j = 0; j < c; ++j) t.at(j, i) = cost.at(i, j);
        const std::vector<int> row_of_col = solve_rows_leq_cols(t);
        out.row_to_col.assign(r, -1);
        for (size_t j = 0; j < c; ++j)
            if (row_of_col[j] >= 0) out.row_to_col[row_of_col[j]] = static_cast<int>(j);
    }
    for (size_t i = 0; i < r; ++i)
        if (out.row_to_col[i] >= 0) out.total_cost += cost.at(i, out.row_to_col[i]);
    return out;
}

EvalReport cluster_acc(const std::vector<int64_t>& pred, const std::vector<int64_t>& truth,
                       size_t num_classes, size_t num_old_classes) {
    if (pred.size() != truth.size()) throw DimError("cluster_acc: pred/truth length mismatch");
    if (pred.empty()) throw ContractError("cluster_acc: empty input");
    if (num_old_classes > num_classes) throw ConfigError("cluster_acc: old classes exceed total");

    EvalReport report;
    report.num_classes = num_classes;
    report.confusion.assign(num_classes * num_classes, 0);
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < 0 || pred[i] >= static_cast<int64_t>(num_classes) || truth[i] < 0 ||
            truth[i] >= static_cast<int64_t>(num_classes))
            throw ContractError("cluster_acc: class id out of range");
        report.confusion[pred[i] * num_classes + truth[i]] += 1;
    }

    // Turn match maximization into cost minimization.
    size_t max_count = 0;
    for (size_t v : report.confusion) max_count = std::max(max_count, v);
    Tensor cost = Tensor::zeros(num_classes, num_classes);
    for (size_t i = 0; i < num_classes; ++i)
        for (size_t j = 0; j < num_classes; ++j)
            cost.at(i, j) = static_cast<double>(max_count) -
                            static_cast<double>(report.confusion[i * num_classes + j]);

    report.permutation = hungarian(cost).row_to_col;

    size_t correct_all = 0, correct_old = 0, correct_new = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const bool correct = report.permutation[pred[i]] == static_cast<int>(truth[i]);
        const bool old = truth[i] < static_cast<int64_t>(num_old_classes);
        ++report.n_all;
        correct_all += correct;
        if (old) {
            ++report.n_old;
            correct_old += correct;
        } else {
            ++report.n_new;
            correct_new += correct;
        }
    }
    report.acc_all = static_cast<double>(correct_all) / static_cast<double>(report.n_all);
    report.acc_old = report.n_old ? static_cast<double>(correct_old) / static_cast<double>(report.n_old) : 0.0;
    report.acc_new = report.n_new ? static_cast<double>(correct_new) / static_cast<double>(report.n_new) : 0.0;
    return report;
}

} // namespace flatgcd
