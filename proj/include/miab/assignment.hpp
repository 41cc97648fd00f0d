#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "miab/errors.hpp"

namespace miab {

/// Minimum-cost perfect matching on a square cost matrix by trying every
/// permutation. result[row] = column.
inline std::vector<std::size_t> assign_exhaustive(const Eigen::MatrixXd& cost) {
    if (cost.rows() != cost.cols()) throw ContractViolation("assign_exhaustive: square cost matrix required");
    const auto n = static_cast<std::size_t>(cost.rows());
    std::vector<std::size_t> perm(n), best(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t r = 0; r < n; ++r) c += cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(perm[r]));
        if (c < best_cost) {
            best_cost = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Hungarian method (potentials, O(n^3)) on a square cost matrix.
/// result[row] = column.
inline std::vector<std::size_t> assign_hungarian(const Eigen::MatrixXd& cost) {
    if (cost.rows() != cost.cols()) throw ContractViolation("assign_hungarian: square cost matrix required");
    const auto n = static_cast<std::size_t>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            std::size_t j1 = 0;
            double delta = inf;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
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
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> result(n, 0);
    for (std::size_t j = 1; j <= n; ++j)
        if (p[j] != 0) result[p[j] - 1] = j - 1;
    return result;
}

/// Exhaustive for n <= 6, Hungarian above.
inline std::vector<std::size_t> linear_assignment(const Eigen::MatrixXd& cost) {
    return cost.rows() <= 6 ? assign_exhaustive(cost) : assign_hungarian(cost);
}

}  // namespace miab
