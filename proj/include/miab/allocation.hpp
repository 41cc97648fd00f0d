#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "miab/errors.hpp"
#include "miab/geometry.hpp"
#include "miab/radio.hpp"
#include "miab/state.hpp"

namespace miab {

/// Backhaul activation z_i = 1(rho_i > 0). If more than M relays carry load,
/// the M most loaded stay active (ties keep the lower index) and the users of
/// the dropped relays are disassociated.
inline std::vector<std::uint8_t> activate_backhaul(AssociationMatrix& x, int max_links) {
    const std::size_t ns = x.n_stations();
    std::vector<std::uint8_t> z(ns, 0);
    std::vector<std::size_t> loaded;
    for (std::size_t i = 1; i < ns; ++i)
        if (x.load(i) > 0) loaded.push_back(i);
    if (static_cast<int>(loaded.size()) > max_links) {
        std::stable_sort(loaded.begin(), loaded.end(),
                         [&](std::size_t a, std::size_t b) { return x.load(a) > x.load(b); });
        for (std::size_t k = static_cast<std::size_t>(std::max(max_links, 0)); k < loaded.size(); ++k) x.clear_row(loaded[k]);
        loaded.resize(static_cast<std::size_t>(std::max(max_links, 0)));
    }
    for (std::size_t i : loaded) z[i] = 1;
    return z;
}

/// Optimal backhaul split for one relay: maximises sum_j min(T_j, beta_j C_b)
/// subject to beta >= 0, sum beta <= 1. Returns the demand-proportional
/// optimum beta_j = T_j / max(sum T, C_b), whose value is min(sum T, C_b).
inline std::vector<double> solve_p1(std::span<const double> demand, double backhaul_capacity) {
    if (backhaul_capacity < 0) throw DomainError("solve_p1: backhaul capacity must be >= 0");
    double total = 0.0;
    for (double t : demand) {
        if (t < 0) throw DomainError("solve_p1: demands must be >= 0");
        total += t;
    }
    std::vector<double> beta(demand.size(), 0.0);
    if (backhaul_capacity == 0.0) return beta;
    const double denom = std::max(total, backhaul_capacity);
    for (std::size_t j = 0; j < demand.size(); ++j) beta[j] = demand[j] / denom;
    return beta;
}

/// Objective of the single-relay split problem.
inline double p1_objective(std::span<const double> demand, std::span<const double> beta, double backhaul_capacity) {
    double v = 0.0;
    for (std::size_t j = 0; j < demand.size(); ++j) v += std::min(demand[j], beta[j] * backhaul_capacity);
    return v;
}

/// Max carrier-to-interference split: shares proportional to spectral efficiency.
inline std::vector<double> mci_allocation(std::span<const double> spectral_efficiency) {
    double total = 0.0;
    for (double e : spectral_efficiency) {
        if (e < 0) throw DomainError("mci_allocation: spectral efficiencies must be >= 0");
        total += e;
    }
    std::vector<double> beta(spectral_efficiency.size(), 0.0);
    if (total <= 0.0) return beta;
    for (std::size_t j = 0; j < beta.size(); ++j) beta[j] = spectral_efficiency[j] / total;
    return beta;
}

/// Beam coverage rate kappa = served / min(K, sum L); defined as 1 when K = 0.
inline double beam_coverage(std::size_t served, std::size_t n_users, int total_beams) {
    if (n_users == 0) return 1.0;
    const double denom = std::min<double>(static_cast<double>(n_users), static_cast<double>(total_beams));
    return denom > 0 ? static_cast<double>(served) / denom : 1.0;
}

struct RateReport {
    Eigen::MatrixXd access_capacity;   // C^(a)_{i,j}
    Eigen::MatrixXd T;                 // min(D_j, C^(a)_{i,j})
    Eigen::MatrixXd R;                 // effective rates R_{i,j}
    std::vector<double> backhaul_capacity;  // C^(b)_i, entry 0 unused
    std::vector<double> spectral_efficiency;  // log2(1 + SINR^(a)) of each user on its link
    std::vector<double> ue_rate;       // sum_i R_{i,j}
    double sum_rate = 0.0;             // R(t)
    double sum_rate_miab = 0.0;        // relay-served users only
    double sum_backhaul = 0.0;         // C^(b)(t)
    double kappa = 0.0;
};

/// Access capacities, access-limited demands and backhaul capacities for a
/// given association and activation.
inline RateReport link_budget(const NetworkState& s, const RadioContext& ctx, const AssociationMatrix& x,
                              const std::vector<std::uint8_t>& z) {
    const auto ns = static_cast<Eigen::Index>(s.n_stations());
    const auto K = static_cast<Eigen::Index>(s.n_ues());
    RateReport r;
    r.access_capacity = Eigen::MatrixXd::Zero(ns, K);
    r.T = Eigen::MatrixXd::Zero(ns, K);
    r.R = Eigen::MatrixXd::Zero(ns, K);
    r.spectral_efficiency.assign(static_cast<std::size_t>(K), 0.0);
    r.backhaul_capacity.assign(static_cast<std::size_t>(ns), 0.0);
    for (Eigen::Index i = 0; i < ns; ++i)
        for (Eigen::Index j = 0; j < K; ++j) {
            const auto iu = static_cast<std::size_t>(i), ju = static_cast<std::size_t>(j);
            if (!x(iu, ju)) continue;
            const double sinr = ctx.access_sinr(x, z, iu, ju);
            r.spectral_efficiency[ju] = std::log2(1.0 + sinr);
            r.access_capacity(i, j) = ctx.mu() * ctx.bandwidth() * r.spectral_efficiency[ju];
            r.T(i, j) = std::min(s.ues[ju].demand, r.access_capacity(i, j));
        }
    for (std::size_t i = 1; i < s.n_stations(); ++i) {
        r.backhaul_capacity[i] = ctx.backhaul_capacity(x, z, i);
        r.sum_backhaul += r.backhaul_capacity[i];
    }
    return r;
}

/// Fills the effective rates of `report` (from link_budget) for the given
/// backhaul split, plus sum-rate and kappa.
inline void effective_rates(const NetworkState& s, const AssociationMatrix& x, const BackhaulAllocation& b,
                            RateReport& report) {
    const std::size_t ns = s.n_stations(), K = s.n_ues();
    report.ue_rate.assign(K, 0.0);
    report.sum_rate = report.sum_rate_miab = 0.0;
    for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t j = 0; j < K; ++j) {
            const auto ie = static_cast<Eigen::Index>(i), je = static_cast<Eigen::Index>(j);
            double rate = 0.0;
            if (x(i, j)) {
                rate = i == kDonor ? report.T(ie, je)
                                   : std::min(report.T(ie, je), b.beta(ie, je) * b.z[i] * report.backhaul_capacity[i]);
            }
            report.R(ie, je) = rate;
            report.ue_rate[j] += rate;
            report.sum_rate += rate;
            if (i != kDonor) report.sum_rate_miab += rate;
        }
    report.kappa = beam_coverage(x.served(), s.active_ues(), s.total_beam_budget());
}

inline RateReport effective_rates(const NetworkState& s, const RadioContext& ctx, const AssociationMatrix& x,
                                  const BackhaulAllocation& b) {
    RateReport r = link_budget(s, ctx, x, b.z);
    effective_rates(s, x, b, r);
    return r;
}

enum class BetaRule { OptimalP1, Mci };

struct AllocationResult {
    AssociationMatrix x;
    BackhaulAllocation backhaul;
    RateReport report;
};

/// Activation (with the M-link cap), per-relay backhaul split and rates for
/// an association. Relay rows are independent, so each is solved on its own.
inline AllocationResult allocate(const NetworkState& s, const RadioContext& ctx, AssociationMatrix x, BetaRule rule) {
    AllocationResult out;
    out.backhaul = BackhaulAllocation(s.n_stations(), s.n_ues());
    out.backhaul.z = activate_backhaul(x, s.config.beams_donor_backhaul_M);
    out.report = link_budget(s, ctx, x, out.backhaul.z);
    std::vector<double> row;
    std::vector<std::size_t> users;
    for (std::size_t i = 1; i < s.n_stations(); ++i) {
        if (!out.backhaul.z[i]) continue;
        row.clear();
        users.clear();
        for (std::size_t j = 0; j < s.n_ues(); ++j) {
            if (!x(i, j)) continue;
            users.push_back(j);
            row.push_back(rule == BetaRule::OptimalP1
                              ? out.report.T(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
                              : out.report.spectral_efficiency[j]);
        }
        const auto beta = rule == BetaRule::OptimalP1 ? solve_p1(row, out.report.backhaul_capacity[i]) : mci_allocation(row);
        for (std::size_t k = 0; k < users.size(); ++k)
            out.backhaul.beta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(users[k])) = beta[k];
    }
    out.x = std::move(x);
    effective_rates(s, out.x, out.backhaul, out.report);
    return out;
}

enum class Constraint { C2, C3, C4, C5, C6, C7, C8, C9, C10, BetaSupport };

inline const char* constraint_name(Constraint c) {
    switch (c) {
        case Constraint::C2: return "C2";
        case Constraint::C3: return "C3";
        case Constraint::C4: return "C4";
        case Constraint::C5: return "C5";
        case Constraint::C6: return "C6";
        case Constraint::C7: return "C7";
        case Constraint::C8: return "C8";
        case Constraint::C9: return "C9";
        case Constraint::C10: return "C10";
        case Constraint::BetaSupport: return "beta_support";
    }
    return "?";
}

struct Violation {
    Constraint constraint;
    std::string detail;
};

/// Instantaneous constraints C2-C10 plus beta support (no share on inactive
/// links). C10 is checked only when previous relay positions are given.
inline std::vector<Violation> check_constraints(const NetworkState& s, const AssociationMatrix& x,
                                                const BackhaulAllocation& b,
                                                const std::vector<Vec2>* previous_miab_positions = nullptr,
                                                double tol = 1e-9) {
    std::vector<Violation> v;
    const std::size_t ns = s.n_stations(), K = s.n_ues();
    auto add = [&](Constraint c, std::string d) { v.push_back({c, std::move(d)}); };
    if (x.n_stations() != ns || x.n_ues() != K) add(Constraint::C2, "association shape mismatch");
    if (b.z.size() != ns || b.beta.rows() != static_cast<Eigen::Index>(ns) || b.beta.cols() != static_cast<Eigen::Index>(K))
        add(Constraint::C5, "backhaul shape mismatch");
    if (!v.empty()) return v;

    for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t j = 0; j < K; ++j)
            if (x(i, j) > 1) add(Constraint::C2, "x(" + std::to_string(i) + "," + std::to_string(j) + ") not binary");
    for (std::size_t i = 0; i < ns; ++i)
        if (static_cast<int>(x.load(i)) > s.beam_budget(i))
            add(Constraint::C3, "station " + std::to_string(i) + " serves " + std::to_string(x.load(i)) + " users");
    for (std::size_t j = 0; j < K; ++j) {
        std::size_t c = 0;
        for (std::size_t i = 0; i < ns; ++i) c += x(i, j) != 0;
        if (c > 1) add(Constraint::C4, "user " + std::to_string(j) + " associated " + std::to_string(c) + " times");
        if (c > 0 && !s.ues[j].active) add(Constraint::C4, "inactive user " + std::to_string(j) + " associated");
    }
    int active = 0;
    if (b.z[kDonor] != 0) add(Constraint::C5, "donor has a backhaul activation");
    for (std::size_t i = 1; i < ns; ++i) {
        if (b.z[i] > 1) add(Constraint::C5, "z(" + std::to_string(i) + ") not binary");
        active += b.z[i] != 0;
    }
    if (active > s.config.beams_donor_backhaul_M) add(Constraint::C6, std::to_string(active) + " active backhaul links");
    for (std::size_t i = 0; i < ns; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            const double beta = b.beta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (!(beta >= -tol && beta <= 1 + tol))
                add(Constraint::C7, "beta(" + std::to_string(i) + "," + std::to_string(j) + ") outside [0,1]");
            if (beta > tol && (i == kDonor || !x(i, j) || !b.z[i]))
                add(Constraint::BetaSupport, "beta(" + std::to_string(i) + "," + std::to_string(j) + ") on inactive link");
            row += beta;
        }
        if (row > 1 + tol) add(Constraint::C8, "station " + std::to_string(i) + " beta sum " + std::to_string(row));
    }
    for (std::size_t i = 0; i < s.miabs.size(); ++i) {
        if (!in_disc(s.miabs[i].position, s.config.cell_radius))
            add(Constraint::C9, "relay " + std::to_string(i + 1) + " outside the region");
        if (previous_miab_positions && i < previous_miab_positions->size() &&
            (s.miabs[i].position - (*previous_miab_positions)[i]).norm() > s.config.step_size_dl + tol)
            add(Constraint::C10, "relay " + std::to_string(i + 1) + " moved more than the step size");
    }
    return v;
}

inline std::vector<Violation> check_constraints(const NetworkState& s,
                                                const std::vector<Vec2>* previous_miab_positions = nullptr) {
    return check_constraints(s, s.x, s.backhaul, previous_miab_positions);
}

}  // namespace miab
