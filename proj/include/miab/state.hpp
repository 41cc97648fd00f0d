#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "miab/config.hpp"
#include "miab/errors.hpp"
#include "miab/geometry.hpp"

namespace miab {

/// Station index 0 is the donor; 1..N_s are the mobile relays.
inline constexpr std::size_t kDonor = 0;

enum class EntityKind { Donor, Miab, Ue };

struct UeState {
    Vec2 position{0, 0};
    Vec2 waypoint{0, 0};
    double speed = 0.0;               // m/s
    std::size_t service_class = 0;
    double demand = 0.0;              // D_j(t), bit/s
    std::vector<double> last_rate;    // R_{i,j}(t-1) per station
    bool active = true;
};

struct MiabState {
    Vec2 position{0, 0};
    std::size_t load = 0;             // rho_i(t)
};

/// Binary user association x_{i,j}, stations by rows, users by columns.
class AssociationMatrix {
public:
    AssociationMatrix() = default;
    AssociationMatrix(std::size_t n_stations, std::size_t n_ues)
        : stations_(n_stations), ues_(n_ues), x_(n_stations * n_ues, 0) {}

    std::size_t n_stations() const noexcept { return stations_; }
    std::size_t n_ues() const noexcept { return ues_; }

    std::uint8_t operator()(std::size_t i, std::size_t j) const { return x_[i * ues_ + j]; }
    std::uint8_t& operator()(std::size_t i, std::size_t j) { return x_[i * ues_ + j]; }

    /// rho_i.
    std::size_t load(std::size_t i) const {
        std::size_t s = 0;
        for (std::size_t j = 0; j < ues_; ++j) s += x_[i * ues_ + j] != 0;
        return s;
    }

    /// Serving station of user j, or -1.
    long station_of(std::size_t j) const {
        for (std::size_t i = 0; i < stations_; ++i)
            if (x_[i * ues_ + j]) return static_cast<long>(i);
        return -1;
    }

    std::size_t served() const {
        std::size_t s = 0;
        for (auto v : x_) s += v != 0;
        return s;
    }

    void clear_row(std::size_t i) {
        for (std::size_t j = 0; j < ues_; ++j) x_[i * ues_ + j] = 0;
    }

    void clear() { std::fill(x_.begin(), x_.end(), std::uint8_t{0}); }

    bool operator==(const AssociationMatrix&) const = default;

private:
    std::size_t stations_ = 0;
    std::size_t ues_ = 0;
    std::vector<std::uint8_t> x_;
};

/// Backhaul activations z_i and capacity fractions beta_{i,j}. Both are sized
/// by station; entry 0 (donor) is unused and stays zero.
struct BackhaulAllocation {
    std::vector<std::uint8_t> z;
    Eigen::MatrixXd beta;

    BackhaulAllocation() = default;
    BackhaulAllocation(std::size_t n_stations, std::size_t n_ues)
        : z(n_stations, 0), beta(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_stations), static_cast<Eigen::Index>(n_ues))) {}
};

/// Large- and small-scale channel draws for every (transmitting station,
/// receiving node) pair. Nodes are indexed stations first, then users.
struct ChannelDraws {
    Eigen::MatrixXd shadowing_db;  // fixed within an episode
    Eigen::MatrixXd fading;        // chi, redrawn every step
};

struct NetworkState {
    ScenarioConfig config;
    Vec2 donor_position{0, 0};
    std::vector<MiabState> miabs;
    std::vector<UeState> ues;
    ChannelDraws channel;
    AssociationMatrix x;
    BackhaulAllocation backhaul;
    std::uint64_t step = 0;

    std::size_t n_stations() const noexcept { return miabs.size() + 1; }
    std::size_t n_ues() const noexcept { return ues.size(); }
    std::size_t n_nodes() const noexcept { return n_stations() + ues.size(); }
    std::size_t ue_node(std::size_t j) const noexcept { return n_stations() + j; }

    std::size_t active_ues() const {
        std::size_t k = 0;
        for (const auto& u : ues) k += u.active;
        return k;
    }

    const Vec2& station_position(std::size_t i) const {
        if (i >= n_stations()) throw ContractViolation("station index out of range");
        return i == kDonor ? donor_position : miabs[i - 1].position;
    }

    const Vec2& node_position(std::size_t node) const {
        if (node < n_stations()) return station_position(node);
        if (node >= n_nodes()) throw ContractViolation("node index out of range");
        return ues[node - n_stations()].position;
    }

    /// L_i.
    int beam_budget(std::size_t i) const {
        return i == kDonor ? config.beams_donor_access_L0 : config.beams_miab_L_i;
    }

    int total_beam_budget() const {
        return config.beams_donor_access_L0 + static_cast<int>(miabs.size()) * config.beams_miab_L_i;
    }

    double coverage_range(std::size_t i) const {
        return i == kDonor ? config.coverage_donor : config.coverage_node;
    }

    bool in_coverage(std::size_t i, std::size_t j) const {
        return (ues[j].position - station_position(i)).norm() <= coverage_range(i);
    }

    std::vector<Vec2> miab_positions() const {
        std::vector<Vec2> out;
        out.reserve(miabs.size());
        for (const auto& m : miabs) out.push_back(m.position);
        return out;
    }

    std::vector<Vec2> active_ue_positions() const {
        std::vector<Vec2> out;
        for (const auto& u : ues)
            if (u.active) out.push_back(u.position);
        return out;
    }
};

}  // namespace miab
