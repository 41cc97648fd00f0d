#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "miab/errors.hpp"
#include "miab/geometry.hpp"
#include "miab/random.hpp"
#include "miab/state.hpp"

namespace miab {

enum class LinkKind { RelayUser, DonorRelay, DonorUser };

/// Distance-dependent path loss in dB (d in metres). Distances below
/// `min_distance` are raised to it.
inline double path_loss_db(LinkKind kind, double distance, double min_distance = 1.0) {
    if (!(distance > 0.0)) throw DomainError("path_loss_db: distance must be > 0");
    const double d_km = std::max(distance, min_distance) / 1000.0;
    switch (kind) {
        case LinkKind::RelayUser:
        case LinkKind::DonorRelay:
            return 132.89 + 25.0 * std::log10(d_km);
        case LinkKind::DonorUser:
            return 154.1 + 25.0 * std::log10(d_km);
    }
    throw ContractViolation("path_loss_db: unknown link kind");
}

/// Path-loss model for a transmitting station and a receiving node.
/// Relay-to-relay links reuse the relay formula.
inline LinkKind link_kind(std::size_t tx_station, std::size_t rx_node, std::size_t n_stations) {
    const bool rx_is_ue = rx_node >= n_stations;
    if (tx_station == kDonor) return rx_is_ue ? LinkKind::DonorUser : LinkKind::DonorRelay;
    return LinkKind::RelayUser;
}

/// Power gain of a Nakagami-m envelope: Gamma(m, 1/m), unit mean.
inline double sample_fading(double m, Rng& rng) {
    if (!(m >= 0.5)) throw DomainError("sample_fading: Nakagami shape must be >= 0.5");
    std::gamma_distribution<double> g(m, 1.0 / m);
    return g(rng);
}

struct BeamConfig {
    double boresight = 0.0;        // rad
    double main_lobe_gain = 20.0;  // dBi
    double beamwidth = 2.0 * 10.0 * std::numbers::pi / 180.0;  // full width, rad
    double side_lobe_gain = -5.0;  // dBi
};

/// Flat-top pattern: main lobe within beamwidth/2 of boresight, side lobe elsewhere.
inline double antenna_gain(const BeamConfig& beam, double direction_to_target) {
    return angular_distance(direction_to_target, beam.boresight) <= 0.5 * beam.beamwidth ? beam.main_lobe_gain
                                                                                        : beam.side_lobe_gain;
}

/// Users carry omnidirectional antennas.
inline constexpr double kUeAntennaGainDbi = 0.0;

/// One interference contribution, for per-term inspection.
enum class SinrLink { Access, Backhaul };

struct InterferenceTerm {
    SinrLink link = SinrLink::Access;
    int term = 0;              // 1..3 in the order of the sum
    std::size_t source = 0;    // transmitting station
    long beam_target = -1;     // node the interfering beam serves (-1: self-interference)
    double watts = 0.0;
};

/// Redraws every fading coefficient.
inline void redraw_fading(NetworkState& s, Rng& rng) {
    const auto ns = static_cast<Eigen::Index>(s.n_stations());
    const auto nn = static_cast<Eigen::Index>(s.n_nodes());
    s.channel.fading.resize(ns, nn);
    for (Eigen::Index u = 0; u < ns; ++u)
        for (Eigen::Index w = 0; w < nn; ++w) s.channel.fading(u, w) = sample_fading(s.config.nakagami_m, rng);
}

/// Draws log-normal shadowing for every ordered (station, node) pair:
/// user receivers use the user deviation, relay receivers the relay one.
inline void draw_shadowing(NetworkState& s, Rng& rng) {
    const auto ns = static_cast<Eigen::Index>(s.n_stations());
    const auto nn = static_cast<Eigen::Index>(s.n_nodes());
    s.channel.shadowing_db.resize(ns, nn);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (Eigen::Index u = 0; u < ns; ++u)
        for (Eigen::Index w = 0; w < nn; ++w) {
            const double sigma = w >= ns ? s.config.shadowing_std_user : s.config.shadowing_std_relay;
            s.channel.shadowing_db(u, w) = sigma * n01(rng);
        }
}

/// Link budget snapshot of a state: linear channel gains, bearings and
/// powers. All arithmetic is in watts; dB values are converted once here.
/// Valid until positions, shadowing or fading change.
class RadioContext {
public:
    explicit RadioContext(const NetworkState& s)
        : ns_(s.n_stations()),
          nn_(s.n_nodes()),
          mu_(s.config.mu),
          bandwidth_(s.config.bandwidth_B),
          noise_(dbm_to_watt(s.config.noise_psd_N0) * s.config.bandwidth_B),
          p_access_(dbm_to_watt(s.config.tx_power_access)),
          p_backhaul_(dbm_to_watt(s.config.tx_power_backhaul)),
          xi_(db_to_linear(s.config.xi_si)),
          main_(db_to_linear(s.config.main_lobe_gain)),
          side_(db_to_linear(s.config.side_lobe_gain)),
          ue_gain_(db_to_linear(kUeAntennaGainDbi)),
          half_width_(s.config.beam_half_width_deg * std::numbers::pi / 180.0),
          pl_db_(static_cast<Eigen::Index>(ns_), static_cast<Eigen::Index>(nn_)),
          gh_(static_cast<Eigen::Index>(ns_), static_cast<Eigen::Index>(nn_)),
          bearing_(static_cast<Eigen::Index>(ns_), static_cast<Eigen::Index>(nn_)),
          chi_(s.channel.fading) {
        if (s.channel.fading.rows() != static_cast<Eigen::Index>(ns_) ||
            s.channel.fading.cols() != static_cast<Eigen::Index>(nn_) ||
            s.channel.shadowing_db.rows() != chi_.rows() || s.channel.shadowing_db.cols() != chi_.cols())
            throw ContractViolation("RadioContext: channel draws do not match the entity count");
        for (std::size_t u = 0; u < ns_; ++u) {
            const Vec2& pu = s.station_position(u);
            for (std::size_t w = 0; w < nn_; ++w) {
                const auto ui = static_cast<Eigen::Index>(u), wi = static_cast<Eigen::Index>(w);
                const Vec2& pw = s.node_position(w);
                bearing_(ui, wi) = bearing(pu, pw);
                if (u == w) {
                    pl_db_(ui, wi) = 0.0;
                    gh_(ui, wi) = 0.0;
                    continue;
                }
                const double d = std::max((pw - pu).norm(), s.config.min_distance);
                pl_db_(ui, wi) = path_loss_db(link_kind(u, w, ns_), d, s.config.min_distance);
                gh_(ui, wi) = db_to_linear(-(pl_db_(ui, wi) + s.channel.shadowing_db(ui, wi)));
            }
        }
    }

    std::size_t n_stations() const noexcept { return ns_; }
    std::size_t ue_node(std::size_t j) const noexcept { return ns_ + j; }
    double mu() const noexcept { return mu_; }
    double bandwidth() const noexcept { return bandwidth_; }
    double noise_full_band() const noexcept { return noise_; }
    double noise_access_band() const noexcept { return mu_ * noise_; }
    double p_access() const noexcept { return p_access_; }
    double p_backhaul() const noexcept { return p_backhaul_; }
    double xi() const noexcept { return xi_; }

    double path_loss(std::size_t u, std::size_t w) const { return pl_db_(idx(u), idx(w)); }
    /// G^H: path loss and shadowing, linear.
    double gh(std::size_t u, std::size_t w) const { return gh_(idx(u), idx(w)); }
    double chi(std::size_t u, std::size_t w) const { return chi_(idx(u), idx(w)); }
    double bearing_to(std::size_t u, std::size_t w) const { return bearing_(idx(u), idx(w)); }

    /// G^Tx_{(u,v)->w}: beam of station u serving node v, seen from node w.
    double tx_gain(std::size_t u, std::size_t v, std::size_t w) const {
        if (v == w) return main_;
        return angular_distance(bearing_(idx(u), idx(w)), bearing_(idx(u), idx(v))) <= half_width_ ? main_ : side_;
    }

    /// G^Rx_{(0,i)<-src}: backhaul receive beam of relay i (aimed at the donor)
    /// seen from station `src`.
    double relay_rx_gain(std::size_t i, std::size_t src) const {
        if (src == kDonor) return main_;
        return angular_distance(bearing_(idx(i), idx(src)), bearing_(idx(i), idx(kDonor))) <= half_width_ ? main_ : side_;
    }

    double ue_rx_gain() const noexcept { return ue_gain_; }
    double main_lobe() const noexcept { return main_; }

    /// I^(a)_{i,j}: intra-cell access beams, inter-cell access beams and
    /// donor backhaul beams (scaled by mu) received by user j.
    double access_interference(const AssociationMatrix& x, const std::vector<std::uint8_t>& z, std::size_t i,
                               std::size_t j, std::vector<InterferenceTerm>* terms = nullptr) const {
        const std::size_t K = x.n_ues();
        const std::size_t wj = ue_node(j);
        double t1 = 0.0;
        for (std::size_t jp = 0; jp < K; ++jp) {
            if (jp == j || !x(i, jp)) continue;
            const double v = chi(i, wj) * p_access_ * tx_gain(i, ue_node(jp), wj) * gh(i, wj) * ue_gain_;
            t1 += v;
            if (terms) terms->push_back({SinrLink::Access, 1, i, static_cast<long>(ue_node(jp)), v});
        }
        double t2 = 0.0;
        for (std::size_t ip = 0; ip < ns_; ++ip) {
            if (ip == i) continue;
            for (std::size_t jp = 0; jp < K; ++jp) {
                if (jp == j || !x(ip, jp)) continue;
                const double v = chi(ip, wj) * p_access_ * tx_gain(ip, ue_node(jp), wj) * gh(ip, wj) * ue_gain_;
                t2 += v;
                if (terms) terms->push_back({SinrLink::Access, 2, ip, static_cast<long>(ue_node(jp)), v});
            }
        }
        double t3 = 0.0;
        for (std::size_t ip = 1; ip < ns_; ++ip) {
            if (!z[ip]) continue;
            const double v = chi(kDonor, wj) * mu_ * p_backhaul_ * tx_gain(kDonor, ip, wj) * gh(kDonor, wj) * ue_gain_;
            t3 += v;
            if (terms) terms->push_back({SinrLink::Access, 3, kDonor, static_cast<long>(ip), v});
        }
        return t1 + t2 + t3;
    }

    /// I^(b)_i: other donor backhaul beams, all other stations' access beams
    /// (scaled by mu) and the relay's residual self-interference.
    double backhaul_interference(const AssociationMatrix& x, const std::vector<std::uint8_t>& z, std::size_t i,
                                 std::vector<InterferenceTerm>* terms = nullptr) const {
        if (i == kDonor || i >= ns_) throw ContractViolation("backhaul_interference: relay index required");
        const std::size_t K = x.n_ues();
        double t1 = 0.0;
        for (std::size_t ip = 1; ip < ns_; ++ip) {
            if (ip == i || !z[ip]) continue;
            const double v = chi(kDonor, i) * p_backhaul_ * tx_gain(kDonor, ip, i) * gh(kDonor, i) * relay_rx_gain(i, kDonor);
            t1 += v;
            if (terms) terms->push_back({SinrLink::Backhaul, 1, kDonor, static_cast<long>(ip), v});
        }
        double t2 = 0.0;
        for (std::size_t ip = 0; ip < ns_; ++ip) {
            if (ip == i) continue;
            for (std::size_t jp = 0; jp < K; ++jp) {
                if (!x(ip, jp)) continue;
                const double v =
                    mu_ * chi(ip, i) * p_access_ * tx_gain(ip, ue_node(jp), i) * gh(ip, i) * relay_rx_gain(i, ip);
                t2 += v;
                if (terms) terms->push_back({SinrLink::Backhaul, 2, ip, static_cast<long>(ue_node(jp)), v});
            }
        }
        double t3 = 0.0;
        if (z[i]) {
            for (std::size_t jp = 0; jp < K; ++jp) {
                if (!x(i, jp)) continue;
                const double v = mu_ * p_access_ * xi_;
                t3 += v;
                if (terms) terms->push_back({SinrLink::Backhaul, 3, i, -1, v});
            }
        }
        return t1 + t2 + t3;
    }

    double access_signal(std::size_t i, std::size_t j) const {
        const std::size_t wj = ue_node(j);
        return chi(i, wj) * p_access_ * main_ * gh(i, wj) * ue_gain_;
    }

    double backhaul_signal(std::size_t i) const {
        return chi(kDonor, i) * p_backhaul_ * main_ * gh(kDonor, i) * relay_rx_gain(i, kDonor);
    }

    double access_sinr(const AssociationMatrix& x, const std::vector<std::uint8_t>& z, std::size_t i,
                       std::size_t j) const {
        return access_signal(i, j) / (access_interference(x, z, i, j) + noise_access_band());
    }

    double backhaul_sinr(const AssociationMatrix& x, const std::vector<std::uint8_t>& z, std::size_t i) const {
        return backhaul_signal(i) / (backhaul_interference(x, z, i) + noise_);
    }

    /// C^(a)_{i,j} = mu B log2(1 + x_{i,j} SINR).
    double access_capacity(const AssociationMatrix& x, const std::vector<std::uint8_t>& z, std::size_t i,
                           std::size_t j) const {
        if (!x(i, j)) return 0.0;
        return mu_ * bandwidth_ * std::log2(1.0 + access_sinr(x, z, i, j));
    }

    /// C^(b)_i = B log2(1 + z_i SINR).
    double backhaul_capacity(const AssociationMatrix& x, const std::vector<std::uint8_t>& z, std::size_t i) const {
        if (!z[i]) return 0.0;
        return bandwidth_ * std::log2(1.0 + backhaul_sinr(x, z, i));
    }

    /// Interference-free access SNR, as seen by a Max-SNR association.
    double access_snr(std::size_t i, std::size_t j) const { return access_signal(i, j) / noise_access_band(); }

    /// Received signal strength of station i's pilot at user j, in dBm.
    double rss_dbm(std::size_t i, std::size_t j) const { return watt_to_dbm(access_signal(i, j)); }

private:
    static Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

    std::size_t ns_, nn_;
    double mu_, bandwidth_, noise_, p_access_, p_backhaul_, xi_, main_, side_, ue_gain_, half_width_;
    Eigen::MatrixXd pl_db_, gh_, bearing_;
    Eigen::MatrixXd chi_;
};

inline double access_interference(const NetworkState& s, std::size_t i, std::size_t j) {
    return RadioContext(s).access_interference(s.x, s.backhaul.z, i, j);
}
inline double access_sinr(const NetworkState& s, std::size_t i, std::size_t j) {
    return RadioContext(s).access_sinr(s.x, s.backhaul.z, i, j);
}
inline double backhaul_interference(const NetworkState& s, std::size_t i) {
    return RadioContext(s).backhaul_interference(s.x, s.backhaul.z, i);
}
inline double backhaul_sinr(const NetworkState& s, std::size_t i) {
    return RadioContext(s).backhaul_sinr(s.x, s.backhaul.z, i);
}
inline double access_capacity(const NetworkState& s, std::size_t i, std::size_t j) {
    return RadioContext(s).access_capacity(s.x, s.backhaul.z, i, j);
}
inline double backhaul_capacity(const NetworkState& s, std::size_t i) {
    return RadioContext(s).backhaul_capacity(s.x, s.backhaul.z, i);
}

}  // namespace miab
