#pragma once

#include <charconv>
#include <cstdio>
#include <type_traits>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "miab/errors.hpp"

namespace miab {

/// Radio and world parameters. Defaults reproduce the reference deployment
/// (300 MHz at 28 GHz, one donor, three mobile relays, 25 users).
struct ScenarioConfig {
    double cell_radius = 100.0;            // m
    int n_miab = 3;                        // N_s
    int n_ue = 25;                         // K0
    double bandwidth_B = 3e8;              // Hz
    double mu = 1.0 / 3.0;                 // access share of the band
    double noise_psd_N0 = -174.0;          // dBm/Hz
    double tx_power_backhaul = 43.0;       // dBm per backhaul beam
    double tx_power_access = 33.0;         // dBm per access beam
    int beams_miab_L_i = 10;
    int beams_donor_access_L0 = 7;
    int beams_donor_backhaul_M = 3;
    double step_size_dl = 5.0;             // m
    double coverage_node = 50.0;           // m
    double coverage_donor = 75.0;          // m
    double kappa0 = 0.8;
    double d0 = 10.0;                      // m
    double xi_si = -100.0;                 // dB, residual self-interference ratio
    std::vector<double> service_rates{5e6, 2e8, 1.5e9};  // bit/s
    double ue_speed_min = 0.0;             // m/s
    double ue_speed_max = 1.0;             // m/s
    double step_duration = 1.0;            // s
    double traffic_quantum = 1e6;          // bit per Poisson arrival
    double nakagami_m = 3.0;
    double shadowing_std_user = 9.0;       // dB
    double shadowing_std_relay = 3.0;      // dB
    double main_lobe_gain = 20.0;          // dBi
    double side_lobe_gain = -5.0;          // dBi
    double beam_half_width_deg = 10.0;
    double min_distance = 1.0;             // m, path-loss floor
    bool birth_death = false;              // optional user arrival/departure process
    double ue_arrival_rate = 0.0;          // users/s while birth_death is on
    double ue_departure_prob = 0.0;        // per user and step
    int ue_pool = 0;                       // max simultaneous users, 0 -> 2*n_ue
    std::uint64_t seed = 1;

    void validate() const;
};

/// Policy sizes, PPO hyper-parameters and episode schedule.
struct LearningConfig {
    int p = 128;
    int n = 128;
    int n_heads = 8;
    double gamma_h = 0.95;
    double gamma_l = 0.6;
    int T_h = 250;
    int T_l = 250;
    int macro_rounds = 4;
    double learning_rate = 1e-4;
    double gae_lambda = 0.95;
    double clip_eps = 0.2;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
    int epochs = 4;
    int minibatch = 256;
    double max_grad_norm = 0.5;
    double adam_eps = 1e-5;
    double d_max = 200.0;
    double normalizer_decay = 0.99;
    int warmup_episodes = 10;
    int checkpoint_every = 50;
    int episodes = 2000;
    int eval_T_h = 0;  // 0 -> T_h
    int eval_T_l = 0;  // 0 -> T_l

    void validate() const;
};

struct Config {
    ScenarioConfig scenario;
    LearningConfig learning;

    void validate() const {
        scenario.validate();
        learning.validate();
    }
};

namespace detail {

using FieldRef = std::variant<double*, int*, bool*, std::uint64_t*, std::vector<double>*>;

struct Field {
    std::string_view name;
    FieldRef ref;
};

template <class Fn>
void visit_fields(Config& c, Fn&& fn) {
    auto& s = c.scenario;
    auto& l = c.learning;
    fn(Field{"cell_radius", &s.cell_radius});
    fn(Field{"n_miab", &s.n_miab});
    fn(Field{"n_ue", &s.n_ue});
    fn(Field{"bandwidth_B", &s.bandwidth_B});
    fn(Field{"mu", &s.mu});
    fn(Field{"noise_psd_N0", &s.noise_psd_N0});
    fn(Field{"tx_power_backhaul", &s.tx_power_backhaul});
    fn(Field{"tx_power_access", &s.tx_power_access});
    fn(Field{"beams_miab_L_i", &s.beams_miab_L_i});
    fn(Field{"beams_donor_access_L0", &s.beams_donor_access_L0});
    fn(Field{"beams_donor_backhaul_M", &s.beams_donor_backhaul_M});
    fn(Field{"step_size_dl", &s.step_size_dl});
    fn(Field{"coverage_node", &s.coverage_node});
    fn(Field{"coverage_donor", &s.coverage_donor});
    fn(Field{"kappa0", &s.kappa0});
    fn(Field{"d0", &s.d0});
    fn(Field{"xi_si", &s.xi_si});
    fn(Field{"service_rates", &s.service_rates});
    fn(Field{"ue_speed_min", &s.ue_speed_min});
    fn(Field{"ue_speed_max", &s.ue_speed_max});
    fn(Field{"step_duration", &s.step_duration});
    fn(Field{"traffic_quantum", &s.traffic_quantum});
    fn(Field{"nakagami_m", &s.nakagami_m});
    fn(Field{"shadowing_std_user", &s.shadowing_std_user});
    fn(Field{"shadowing_std_relay", &s.shadowing_std_relay});
    fn(Field{"main_lobe_gain", &s.main_lobe_gain});
    fn(Field{"side_lobe_gain", &s.side_lobe_gain});
    fn(Field{"beam_half_width_deg", &s.beam_half_width_deg});
    fn(Field{"min_distance", &s.min_distance});
    fn(Field{"birth_death", &s.birth_death});
    fn(Field{"ue_arrival_rate", &s.ue_arrival_rate});
    fn(Field{"ue_departure_prob", &s.ue_departure_prob});
    fn(Field{"ue_pool", &s.ue_pool});
    fn(Field{"seed", &s.seed});
    fn(Field{"p", &l.p});
    fn(Field{"n", &l.n});
    fn(Field{"n_heads", &l.n_heads});
    fn(Field{"gamma_h", &l.gamma_h});
    fn(Field{"gamma_l", &l.gamma_l});
    fn(Field{"T_h", &l.T_h});
    fn(Field{"T_l", &l.T_l});
    fn(Field{"macro_rounds", &l.macro_rounds});
    fn(Field{"learning_rate", &l.learning_rate});
    fn(Field{"gae_lambda", &l.gae_lambda});
    fn(Field{"clip_eps", &l.clip_eps});
    fn(Field{"value_coef", &l.value_coef});
    fn(Field{"entropy_coef", &l.entropy_coef});
    fn(Field{"epochs", &l.epochs});
    fn(Field{"minibatch", &l.minibatch});
    fn(Field{"max_grad_norm", &l.max_grad_norm});
    fn(Field{"adam_eps", &l.adam_eps});
    fn(Field{"d_max", &l.d_max});
    fn(Field{"normalizer_decay", &l.normalizer_decay});
    fn(Field{"warmup_episodes", &l.warmup_episodes});
    fn(Field{"checkpoint_every", &l.checkpoint_every});
    fn(Field{"episodes", &l.episodes});
    fn(Field{"eval_T_h", &l.eval_T_h});
    fn(Field{"eval_T_l", &l.eval_T_l});
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a real number, got '" + v + "'");
    }
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
    Int out{};
    const auto* end = v.data() + v.size();
    const auto res = std::from_chars(v.data(), end, out);
    if (res.ec != std::errc{} || res.ptr != end) throw ConfigError(key, "expected an integer, got '" + v + "'");
    return out;
}

inline std::string format_double(double d) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
}

}  // namespace detail

/// Sets one key from its textual value. Unknown keys are rejected.
inline void set_config_value(Config& cfg, const std::string& key, const std::string& value) {
    bool found = false;
    detail::visit_fields(cfg, [&](const detail::Field& f) {
        if (f.name != key) return;
        found = true;
        std::visit(
            [&](auto* ptr) {
                using T = std::remove_pointer_t<decltype(ptr)>;
                if constexpr (std::is_same_v<T, double>) {
                    *ptr = detail::parse_double(key, value);
                } else if constexpr (std::is_same_v<T, int>) {
                    *ptr = detail::parse_int<int>(key, value);
                } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                    *ptr = detail::parse_int<std::uint64_t>(key, value);
                } else if constexpr (std::is_same_v<T, bool>) {
                    if (value == "true" || value == "1") *ptr = true;
                    else if (value == "false" || value == "0") *ptr = false;
                    else throw ConfigError(key, "expected true/false, got '" + value + "'");
                } else {
                    ptr->clear();
                    std::stringstream ss(value);
                    std::string item;
                    while (std::getline(ss, item, ',')) ptr->push_back(detail::parse_double(key, detail::trim(item)));
                }
            },
            f.ref);
    });
    if (!found) throw ConfigError(key, "unknown key");
}

/// Parses `key = value` lines; `#` starts a comment. Values not present keep
/// their defaults. The result is validated.
inline Config parse_config(std::istream& in) {
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
        set_config_value(cfg, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
    return parse_config(in);
}

/// Canonical `key = value` dump; parse_config(to_text(c)) reproduces c.
inline std::string to_text(const Config& cfg) {
    std::string out;
    auto& mut = const_cast<Config&>(cfg);
    detail::visit_fields(mut, [&](const detail::Field& f) {
        out += std::string(f.name) + " = ";
        std::visit(
            [&](auto* ptr) {
                using T = std::remove_pointer_t<decltype(ptr)>;
                if constexpr (std::is_same_v<T, double>) out += detail::format_double(*ptr);
                else if constexpr (std::is_same_v<T, bool>) out += *ptr ? "true" : "false";
                else if constexpr (std::is_same_v<T, std::vector<double>>) {
                    for (std::size_t i = 0; i < ptr->size(); ++i) {
                        if (i) out += ",";
                        out += detail::format_double((*ptr)[i]);
                    }
                } else out += std::to_string(*ptr);
            },
            f.ref);
        out += "\n";
    });
    return out;
}

inline void ScenarioConfig::validate() const {
    auto require = [](bool ok, const char* field, const char* what) {
        if (!ok) throw ConfigError(field, what);
    };
    require(cell_radius > 0, "cell_radius", "must be > 0");
    require(n_miab >= 1, "n_miab", "must be >= 1");
    require(n_ue >= 0, "n_ue", "must be >= 0");
    require(bandwidth_B > 0, "bandwidth_B", "must be > 0");
    require(mu > 0 && mu <= 1, "mu", "must be in (0, 1]");
    require(beams_miab_L_i >= 1, "beams_miab_L_i", "must be >= 1");
    require(beams_donor_access_L0 >= 1, "beams_donor_access_L0", "must be >= 1");
    require(beams_donor_backhaul_M >= 1, "beams_donor_backhaul_M", "must be >= 1");
    require(step_size_dl >= 0, "step_size_dl", "must be >= 0");
    require(coverage_node > 0, "coverage_node", "must be > 0");
    require(coverage_donor > 0, "coverage_donor", "must be > 0");
    require(kappa0 > 0 && kappa0 <= 1, "kappa0", "must be in (0, 1]");
    require(d0 > 0, "d0", "must be > 0");
    require(!service_rates.empty(), "service_rates", "needs at least one class");
    for (double r : service_rates) require(r >= 0, "service_rates", "rates must be >= 0");
    require(ue_speed_min >= 0 && ue_speed_max >= ue_speed_min, "ue_speed_max", "need 0 <= min <= max");
    require(step_duration > 0, "step_duration", "must be > 0");
    require(traffic_quantum > 0, "traffic_quantum", "must be > 0");
    require(nakagami_m >= 0.5, "nakagami_m", "must be >= 0.5");
    require(shadowing_std_user >= 0, "shadowing_std_user", "must be >= 0");
    require(shadowing_std_relay >= 0, "shadowing_std_relay", "must be >= 0");
    require(main_lobe_gain > side_lobe_gain, "main_lobe_gain", "must exceed side_lobe_gain");
    require(beam_half_width_deg > 0 && beam_half_width_deg < 90, "beam_half_width_deg", "must be in (0, 90)");
    require(min_distance > 0, "min_distance", "must be > 0");
    require(ue_arrival_rate >= 0, "ue_arrival_rate", "must be >= 0");
    require(ue_departure_prob >= 0 && ue_departure_prob <= 1, "ue_departure_prob", "must be in [0, 1]");
    require(ue_pool >= 0, "ue_pool", "must be >= 0");
}

inline void LearningConfig::validate() const {
    auto require = [](bool ok, const char* field, const char* what) {
        if (!ok) throw ConfigError(field, what);
    };
    require(p >= 1, "p", "must be >= 1");
    require(n >= 1, "n", "must be >= 1");
    require(n_heads >= 1, "n_heads", "must be >= 1");
    require(gamma_h >= 0 && gamma_h <= 1, "gamma_h", "must be in [0, 1]");
    require(gamma_l >= 0 && gamma_l <= 1, "gamma_l", "must be in [0, 1]");
    require(T_h >= 1, "T_h", "must be >= 1");
    require(T_l >= 1, "T_l", "must be >= 1");
    require(macro_rounds >= 1, "macro_rounds", "must be >= 1");
    require(learning_rate > 0, "learning_rate", "must be > 0");
    require(gae_lambda >= 0 && gae_lambda <= 1, "gae_lambda", "must be in [0, 1]");
    require(clip_eps > 0, "clip_eps", "must be > 0");
    require(value_coef >= 0, "value_coef", "must be >= 0");
    require(entropy_coef >= 0, "entropy_coef", "must be >= 0");
    require(epochs >= 1, "epochs", "must be >= 1");
    require(minibatch >= 1, "minibatch", "must be >= 1");
    require(max_grad_norm > 0, "max_grad_norm", "must be > 0");
    require(adam_eps > 0, "adam_eps", "must be > 0");
    require(d_max > 0, "d_max", "must be > 0");
    require(normalizer_decay >= 0 && normalizer_decay < 1, "normalizer_decay", "must be in [0, 1)");
    require(warmup_episodes >= 1, "warmup_episodes", "must be >= 1");
    require(checkpoint_every >= 1, "checkpoint_every", "must be >= 1");
    require(episodes >= 1, "episodes", "must be >= 1");
    require(eval_T_h >= 0, "eval_T_h", "must be >= 0");
    require(eval_T_l >= 0, "eval_T_l", "must be >= 0");
}

}  // namespace miab
