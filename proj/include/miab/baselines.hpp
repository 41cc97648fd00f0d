#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "miab/allocation.hpp"
#include "miab/assignment.hpp"
#include "miab/geometry.hpp"
#include "miab/radio.hpp"
#include "miab/random.hpp"
#include "miab/state.hpp"

namespace miab {

struct KMeansOptions {
    int restarts = 20;
    int max_iterations = 100;
    double tolerance = 1e-6;  // m, largest centroid shift at convergence
};

struct KMeansResult {
    std::vector<Vec2> centroids;
    std::vector<std::size_t> labels;
    double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding; best of `restarts` by inertia.
/// Requires 1 <= k <= points.size().
inline KMeansResult kmeans(std::span<const Vec2> points, std::size_t k, Rng& rng, const KMeansOptions& opt = {}) {
    if (k == 0 || k > points.size()) throw ContractViolation("kmeans: need 1 <= k <= number of points");
    const std::size_t n = points.size();
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> d2(n);
    for (int r = 0; r < opt.restarts; ++r) {
        std::vector<Vec2> c;
        c.reserve(k);
        c.push_back(points[pick(rng)]);
        while (c.size() < k) {
            double total = 0.0;
            for (std::size_t p = 0; p < n; ++p) {
                double m = std::numeric_limits<double>::infinity();
                for (const auto& q : c) m = std::min(m, (points[p] - q).squaredNorm());
                d2[p] = m;
                total += m;
            }
            std::size_t chosen = 0;
            if (total <= 0.0) {
                chosen = pick(rng);
            } else {
                double target = u01(rng) * total;
                for (chosen = 0; chosen + 1 < n; ++chosen) {
                    target -= d2[chosen];
                    if (target <= 0.0) break;
                }
            }
            c.push_back(points[chosen]);
        }
        std::vector<std::size_t> labels(n, 0);
        for (int it = 0; it < opt.max_iterations; ++it) {
            for (std::size_t p = 0; p < n; ++p) {
                double m = std::numeric_limits<double>::infinity();
                for (std::size_t q = 0; q < k; ++q) {
                    const double d = (points[p] - c[q]).squaredNorm();
                    if (d < m) {
                        m = d;
                        labels[p] = q;
                    }
                }
            }
            std::vector<Vec2> sum(k, Vec2::Zero());
            std::vector<std::size_t> count(k, 0);
            for (std::size_t p = 0; p < n; ++p) {
                sum[labels[p]] += points[p];
                ++count[labels[p]];
            }
            double shift = 0.0;
            for (std::size_t q = 0; q < k; ++q) {
                if (count[q] == 0) continue;  // empty cluster keeps its centroid
                const Vec2 next = sum[q] / static_cast<double>(count[q]);
                shift = std::max(shift, (next - c[q]).norm());
                c[q] = next;
            }
            if (shift < opt.tolerance) break;
        }
        double inertia = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t q = 0; q < k; ++q) {
                const double d = (points[p] - c[q]).squaredNorm();
                if (d < m) {
                    m = d;
                    labels[p] = q;
                }
            }
            inertia += m;
        }
        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.centroids = c;
            best.labels = labels;
        }
    }
    return best;
}

struct ClusterPlan {
    std::vector<Vec2> centroids;
    std::vector<std::size_t> assignment;   // relay k -> centroid index
    std::vector<Vec2> target_positions;    // relay goal points
    std::vector<Vec2> next_positions;      // positions after this planning step
};

/// Clusters users into k groups, matches relays to centroids by minimum
/// total distance, and moves each relay toward its target: by at most
/// `step` when respect_step is set, otherwise straight onto it. With fewer
/// users than relays the surplus relays target their own position; with no
/// users every relay stays.
inline ClusterPlan kmeans_positioning(std::span<const Vec2> ue_positions, std::span<const Vec2> miab_positions,
                                      std::size_t k, bool respect_step, double step, Rng& rng,
                                      const KMeansOptions& opt = {}) {
    if (k == 0 || k != miab_positions.size()) throw ContractViolation("kmeans_positioning: k must equal relay count");
    ClusterPlan plan;
    if (ue_positions.empty()) {
        plan.centroids.assign(miab_positions.begin(), miab_positions.end());
        plan.assignment.resize(k);
        std::iota(plan.assignment.begin(), plan.assignment.end(), std::size_t{0});
        plan.target_positions = plan.centroids;
        plan.next_positions = plan.centroids;
        return plan;
    }
    const std::size_t kc = std::min(k, ue_positions.size());
    plan.centroids = kmeans(ue_positions, kc, rng, opt).centroids;
    Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t c = 0; c < kc; ++c)
            cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = (miab_positions[r] - plan.centroids[c]).norm();
    plan.assignment = linear_assignment(cost);
    plan.target_positions.resize(k);
    plan.next_positions.resize(k);
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t c = plan.assignment[r];
        plan.target_positions[r] = c < kc ? plan.centroids[c] : miab_positions[r];
        const Vec2 delta = plan.target_positions[r] - miab_positions[r];
        const double d = delta.norm();
        if (!respect_step || d <= step) plan.next_positions[r] = plan.target_positions[r];
        else plan.next_positions[r] = miab_positions[r] + delta * (step / d);
    }
    return plan;
}

/// Greedy Max-SNR association: users in descending order of their best SNR
/// take their highest-SNR in-range station with a free beam, falling back to
/// the next best. Users with no in-range free station stay unassociated.
inline AssociationMatrix max_snr_association(const NetworkState& s, const RadioContext& ctx) {
    const std::size_t ns = s.n_stations(), K = s.n_ues();
    AssociationMatrix x(ns, K);
    struct Pref {
        std::size_t ue;
        std::vector<std::pair<double, std::size_t>> stations;  // (snr, station), best first
    };
    std::vector<Pref> prefs;
    for (std::size_t j = 0; j < K; ++j) {
        if (!s.ues[j].active) continue;
        Pref p{j, {}};
        for (std::size_t i = 0; i < ns; ++i)
            if (s.in_coverage(i, j)) p.stations.emplace_back(ctx.access_snr(i, j), i);
        if (p.stations.empty()) continue;
        std::stable_sort(p.stations.begin(), p.stations.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        prefs.push_back(std::move(p));
    }
    std::stable_sort(prefs.begin(), prefs.end(),
                     [](const Pref& a, const Pref& b) { return a.stations.front().first > b.stations.front().first; });
    std::vector<int> free(ns);
    for (std::size_t i = 0; i < ns; ++i) free[i] = s.beam_budget(i);
    for (const auto& p : prefs)
        for (const auto& [snr, i] : p.stations)
            if (free[i] > 0) {
                x(i, p.ue) = 1;
                --free[i];
                break;
            }
    return x;
}

inline AssociationMatrix max_snr_association(const NetworkState& s) { return max_snr_association(s, RadioContext(s)); }

enum class BenchVariant { BenchA, BenchB };

inline BetaRule beta_rule(BenchVariant v) { return v == BenchVariant::BenchA ? BetaRule::Mci : BetaRule::OptimalP1; }

/// Centralised relay positioning step shared by both benchmarks.
inline ClusterPlan benchmark_move(NetworkState& s, Rng& rng, bool respect_step = true) {
    const auto ues = s.active_ue_positions();
    const auto miabs = s.miab_positions();
    auto plan = kmeans_positioning(ues, miabs, miabs.size(), respect_step, s.config.step_size_dl, rng);
    for (std::size_t k = 0; k < s.miabs.size(); ++k)
        s.miabs[k].position = clamp_to_disc(plan.next_positions[k], s.config.cell_radius);
    return plan;
}

/// Max-SNR association, activation and the variant's backhaul split; the
/// result is also written into the state.
inline AllocationResult benchmark_allocation(NetworkState& s, BenchVariant variant) {
    const RadioContext ctx(s);
    auto result = allocate(s, ctx, max_snr_association(s, ctx), beta_rule(variant));
    s.x = result.x;
    s.backhaul = result.backhaul;
    for (std::size_t j = 0; j < s.n_ues(); ++j)
        for (std::size_t i = 0; i < s.n_stations(); ++i)
            s.ues[j].last_rate[i] = result.report.R(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return result;
}

/// Full benchmark step: k-means positioning under the step limit, then
/// Max-SNR association with MCI (Bench-A) or optimal (Bench-B) backhaul split.
inline AllocationResult run_benchmark(NetworkState& s, BenchVariant variant, Rng& rng) {
    benchmark_move(s, rng, true);
    return benchmark_allocation(s, variant);
}

}  // namespace miab
