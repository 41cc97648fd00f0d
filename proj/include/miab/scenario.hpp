#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "miab/config.hpp"
#include "miab/geometry.hpp"
#include "miab/radio.hpp"
#include "miab/random.hpp"
#include "miab/state.hpp"

namespace miab {

enum class Direction { PlusX = 0, MinusX = 1, PlusY = 2, MinusY = 3, Stay = 4 };
inline constexpr int kNumDirections = 5;

namespace detail {

inline void draw_ue(UeState& ue, const ScenarioConfig& c, std::size_t n_stations, Rng& rng) {
    std::uniform_real_distribution<double> speed(c.ue_speed_min, c.ue_speed_max);
    std::uniform_int_distribution<std::size_t> cls(0, c.service_rates.size() - 1);
    ue.position = uniform_in_disc(rng, c.cell_radius);
    ue.waypoint = uniform_in_disc(rng, c.cell_radius);
    ue.speed = speed(rng);
    ue.service_class = cls(rng);
    ue.demand = 0.0;
    ue.last_rate.assign(n_stations, 0.0);
}

inline double poisson_demand(double rate, double dt, double quantum, Rng& rng) {
    if (rate <= 0.0) return 0.0;
    std::poisson_distribution<long long> arrivals(rate * dt / quantum);
    return static_cast<double>(arrivals(rng)) * quantum / dt;
}

}  // namespace detail

/// Fresh deployment: donor at the origin, relays and users uniform in the
/// cell disc, service classes uniform, shadowing and fading drawn, demands
/// drawn for the first step. Deterministic in (config, seed).
inline NetworkState init_scenario(const ScenarioConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    NetworkState s;
    s.config = config;
    s.miabs.resize(static_cast<std::size_t>(config.n_miab));
    for (auto& m : s.miabs) m.position = uniform_in_disc(rng, config.cell_radius);

    const std::size_t pool =
        config.birth_death ? static_cast<std::size_t>(config.ue_pool > 0 ? config.ue_pool : std::max(1, 2 * config.n_ue))
                           : static_cast<std::size_t>(config.n_ue);
    s.ues.resize(pool);
    for (std::size_t j = 0; j < pool; ++j) {
        detail::draw_ue(s.ues[j], config, s.n_stations(), rng);
        s.ues[j].active = j < static_cast<std::size_t>(config.n_ue);
    }
    for (auto& ue : s.ues)
        if (ue.active)
            ue.demand = detail::poisson_demand(config.service_rates[ue.service_class], config.step_duration,
                                               config.traffic_quantum, rng);
    draw_shadowing(s, rng);
    redraw_fading(s, rng);
    s.x = AssociationMatrix(s.n_stations(), s.n_ues());
    s.backhaul = BackhaulAllocation(s.n_stations(), s.n_ues());
    return s;
}

/// Random-waypoint motion for every active user over `dt` seconds. A user
/// reaching its waypoint stops there and draws a new waypoint and speed.
inline void step_mobility(NetworkState& s, double dt, Rng& rng) {
    if (!(dt > 0.0)) throw ContractViolation("step_mobility: dt must be > 0");
    const auto& c = s.config;
    std::uniform_real_distribution<double> speed(c.ue_speed_min, c.ue_speed_max);
    for (auto& ue : s.ues) {
        if (!ue.active) continue;
        const Vec2 delta = ue.waypoint - ue.position;
        const double dist = delta.norm();
        const double travel = ue.speed * dt;
        if (travel >= dist) {
            ue.position = ue.waypoint;
            ue.waypoint = uniform_in_disc(rng, c.cell_radius);
            ue.speed = speed(rng);
        } else {
            ue.position += delta * (travel / dist);
        }
        ue.position = clamp_to_disc(ue.position, c.cell_radius);
    }
}

/// Per-step demand D_j = N q / dt with N ~ Poisson(rate dt / q).
inline void step_traffic(NetworkState& s, double dt, Rng& rng) {
    if (!(dt > 0.0)) throw ContractViolation("step_traffic: dt must be > 0");
    const auto& c = s.config;
    for (auto& ue : s.ues) {
        if (!ue.active) {
            ue.demand = 0.0;
            continue;
        }
        ue.demand = detail::poisson_demand(c.service_rates[ue.service_class], dt, c.traffic_quantum, rng);
    }
}

/// Optional user arrivals (Poisson) and departures (Bernoulli per user).
/// Departing users lose their association; arrivals reuse free pool slots
/// and get fresh shadowing.
inline void step_population(NetworkState& s, double dt, Rng& rng) {
    const auto& c = s.config;
    if (!c.birth_death) return;
    std::bernoulli_distribution leave(c.ue_departure_prob);
    for (std::size_t j = 0; j < s.n_ues(); ++j) {
        if (s.ues[j].active && leave(rng)) {
            s.ues[j].active = false;
            s.ues[j].demand = 0.0;
            for (std::size_t i = 0; i < s.n_stations(); ++i) {
                s.x(i, j) = 0;
                s.backhaul.beta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.0;
            }
        }
    }
    std::poisson_distribution<int> arrivals(c.ue_arrival_rate * dt);
    int n_new = c.ue_arrival_rate > 0 ? arrivals(rng) : 0;
    std::normal_distribution<double> n01(0.0, 1.0);
    for (std::size_t j = 0; j < s.n_ues() && n_new > 0; ++j) {
        if (s.ues[j].active) continue;
        detail::draw_ue(s.ues[j], c, s.n_stations(), rng);
        s.ues[j].active = true;
        s.ues[j].demand = detail::poisson_demand(c.service_rates[s.ues[j].service_class], dt, c.traffic_quantum, rng);
        const auto w = static_cast<Eigen::Index>(s.ue_node(j));
        for (Eigen::Index u = 0; u < static_cast<Eigen::Index>(s.n_stations()); ++u)
            s.channel.shadowing_db(u, w) = c.shadowing_std_user * n01(rng);
        --n_new;
    }
}

/// Moves relay i (1-based station index) by the configured step along an
/// axis, projecting back onto the cell disc.
inline void move_miab(NetworkState& s, std::size_t i, Direction dir) {
    if (i == kDonor || i >= s.n_stations()) throw ContractViolation("move_miab: relay index out of range");
    const double dl = s.config.step_size_dl;
    Vec2 step{0, 0};
    switch (dir) {
        case Direction::PlusX: step = {dl, 0}; break;
        case Direction::MinusX: step = {-dl, 0}; break;
        case Direction::PlusY: step = {0, dl}; break;
        case Direction::MinusY: step = {0, -dl}; break;
        case Direction::Stay: break;
        default: throw ContractViolation("move_miab: unknown direction");
    }
    auto& m = s.miabs[i - 1];
    m.position = clamp_to_disc(m.position + step, s.config.cell_radius);
}

inline Direction direction_from_index(int a) {
    if (a < 0 || a >= kNumDirections) throw ContractViolation("unknown direction index");
    return static_cast<Direction>(a);
}

/// One world tick after decisions: mobility, population, traffic, fading.
inline void advance_world(NetworkState& s, Rng& rng) {
    const double dt = s.config.step_duration;
    step_mobility(s, dt, rng);
    step_population(s, dt, rng);
    step_traffic(s, dt, rng);
    redraw_fading(s, rng);
    ++s.step;
}

}  // namespace miab
