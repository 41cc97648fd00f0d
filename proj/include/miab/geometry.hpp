#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "miab/random.hpp"

namespace miab {

using Vec2 = Eigen::Vector2d;

/// Radial projection onto the closed disc of radius `radius` centred at the origin.
inline Vec2 clamp_to_disc(const Vec2& p, double radius) {
    const double r = p.norm();
    if (r <= radius) return p;
    return p * (radius / r);
}

inline bool in_disc(const Vec2& p, double radius, double slack = 1e-9) { return p.norm() <= radius + slack; }

inline Vec2 uniform_in_disc(Rng& rng, double radius) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = radius * std::sqrt(u(rng));
    const double theta = 2.0 * std::numbers::pi * u(rng);
    return {r * std::cos(theta), r * std::sin(theta)};
}

/// Bearing of `to` seen from `from`, in (-pi, pi].
inline double bearing(const Vec2& from, const Vec2& to) {
    const Vec2 d = to - from;
    return std::atan2(d.y(), d.x());
}

/// |a - b| folded into [0, pi].
inline double angular_distance(double a, double b) { return std::abs(std::remainder(a - b, 2.0 * std::numbers::pi)); }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

}  // namespace miab
