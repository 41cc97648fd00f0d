#pragma once

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "miab/allocation.hpp"
#include "miab/baselines.hpp"
#include "miab/config.hpp"
#include "miab/errors.hpp"
#include "miab/nn.hpp"
#include "miab/policy.hpp"
#include "miab/ppo.hpp"
#include "miab/radio.hpp"
#include "miab/random.hpp"
#include "miab/rewards.hpp"
#include "miab/scenario.hpp"
#include "miab/state.hpp"

namespace miab {

inline constexpr double kRssFloorDbm = -174.0;
inline constexpr double kRssScaleDb = 100.0;

/// Low-level actions: one per station (donor first), then idle.
inline int low_action_count(std::size_t n_stations) { return static_cast<int>(n_stations) + 1; }
inline int idle_action(std::size_t n_stations) { return static_cast<int>(n_stations); }
/// Demand, then per-station RSS, AoA and previous rate blocks.
inline int low_obs_dim(std::size_t n_stations) { return 1 + 3 * static_cast<int>(n_stations); }

inline PolicyShape high_policy_shape(const LearningConfig& lc) { return {2, kNumDirections, lc.p, lc.n, lc.n_heads}; }

inline PolicyShape low_policy_shape(const LearningConfig& lc, std::size_t n_stations) {
    return {low_obs_dim(n_stations), low_action_count(n_stations), lc.p, lc.n, lc.n_heads};
}

inline double max_service_rate(const ScenarioConfig& c) {
    return std::max(1.0, *std::max_element(c.service_rates.begin(), c.service_rates.end()));
}

/// Relay observation: own normalised position; neighbours are the donor, the
/// other relays and the active users within the relay's coverage range.
inline PolicyNet::Input high_input(const NetworkState& s, std::size_t i) {
    const double R = s.config.cell_radius;
    PolicyNet::Input in;
    const Vec2& self = s.station_position(i);
    in.self = self / R;
    in.obs = in.self;
    in.neighbors.push_back(s.donor_position / R);
    for (std::size_t k = 1; k < s.n_stations(); ++k)
        if (k != i) in.neighbors.push_back(s.station_position(k) / R);
    for (const auto& u : s.ues)
        if (u.active && (u.position - self).norm() <= s.coverage_range(i)) in.neighbors.push_back(u.position / R);
    return in;
}

/// User observation: demand, RSS, angle of arrival and previous rate per
/// station. Stations out of range report the RSS floor and angle 0; the
/// neighbours are the stations in range.
inline PolicyNet::Input low_input(const NetworkState& s, const RadioContext& ctx, std::size_t j) {
    const double R = s.config.cell_radius;
    const double rate_scale = max_service_rate(s.config);
    const std::size_t ns = s.n_stations();
    const auto& ue = s.ues[j];
    PolicyNet::Input in;
    in.obs = Eigen::VectorXd::Zero(low_obs_dim(ns));
    in.obs(0) = ue.demand / rate_scale;
    in.self = ue.position / R;
    for (std::size_t i = 0; i < ns; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        double rss = kRssFloorDbm, aoa = 0.0;
        if (s.in_coverage(i, j)) {
            rss = std::max(kRssFloorDbm, ctx.rss_dbm(i, j));
            aoa = bearing(ue.position, s.station_position(i)) / std::numbers::pi;
            in.neighbors.push_back(s.station_position(i) / R);
        }
        in.obs(1 + k) = (rss - kRssFloorDbm) / kRssScaleDb;
        in.obs(1 + static_cast<Eigen::Index>(ns) + k) = aoa;
        in.obs(1 + 2 * static_cast<Eigen::Index>(ns) + k) = (i < ue.last_rate.size() ? ue.last_rate[i] : 0.0) / rate_scale;
    }
    return in;
}

/// Builds the association from per-user requests (station index, or -1 for
/// idle). Requests to stations out of range are rejected; a station with more
/// requests than beams keeps the strongest by RSS (ties: lower user index).
inline AssociationMatrix admit_requests(const NetworkState& s, const RadioContext& ctx, std::span<const int> requests) {
    const std::size_t ns = s.n_stations(), K = s.n_ues();
    if (requests.size() != K) throw ContractViolation("admit_requests: one request per user required");
    AssociationMatrix x(ns, K);
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t i = 0; i < ns; ++i) {
        cand.clear();
        for (std::size_t j = 0; j < K; ++j)
            if (requests[j] == static_cast<int>(i) && s.ues[j].active && s.in_coverage(i, j))
                cand.emplace_back(ctx.rss_dbm(i, j), j);
        std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        const std::size_t keep = std::min(cand.size(), static_cast<std::size_t>(std::max(0, s.beam_budget(i))));
        for (std::size_t k = 0; k < keep; ++k) x(i, cand[k].second) = 1;
    }
    return x;
}

/// Records an allocation in the state: association, backhaul, loads and each
/// user's rate for the next observation.
inline void commit_allocation(NetworkState& s, const AllocationResult& r) {
    s.x = r.x;
    s.backhaul = r.backhaul;
    for (std::size_t i = 1; i < s.n_stations(); ++i) s.miabs[i - 1].load = r.x.load(i);
    for (std::size_t j = 0; j < s.n_ues(); ++j)
        for (std::size_t i = 0; i < s.n_stations(); ++i)
            s.ues[j].last_rate[i] = r.report.R(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

/// Admission, activation and optimal backhaul split for user requests.
inline AllocationResult apply_association(NetworkState& s, const RadioContext& ctx, std::span<const int> requests) {
    auto r = allocate(s, ctx, admit_requests(s, ctx, requests), BetaRule::OptimalP1);
    commit_allocation(s, r);
    return r;
}

/// Sum backhaul capacity for the current (frozen) association at the current
/// relay positions.
inline double frozen_backhaul_sum(const NetworkState& s) {
    const RadioContext ctx(s);
    AssociationMatrix x = s.x;
    const auto z = activate_backhaul(x, s.config.beams_donor_backhaul_M);
    double sum = 0.0;
    for (std::size_t i = 1; i < s.n_stations(); ++i) sum += ctx.backhaul_capacity(x, z, i);
    return sum;
}

/// Training targets for the relays: cluster centroids matched to relays,
/// without the step limit.
inline std::vector<Vec2> compute_centroid_targets(std::span<const Vec2> ue_positions, std::span<const Vec2> miab_positions,
                                                  double step, Rng& rng) {
    return kmeans_positioning(ue_positions, miab_positions, miab_positions.size(), false, step, rng).target_positions;
}

struct Agents {
    std::vector<PolicyNet> miab;  // one per relay
    PolicyNet ue;                 // shared by all users
};

inline Agents make_agents(const Config& cfg, std::uint64_t seed) {
    Agents a;
    const auto ns = static_cast<std::size_t>(cfg.scenario.n_miab) + 1;
    for (int k = 0; k < cfg.scenario.n_miab; ++k) {
        Rng rng(derive_seed(seed, stream::policy_init, static_cast<std::uint64_t>(k)));
        a.miab.emplace_back(high_policy_shape(cfg.learning), rng);
    }
    Rng rng(derive_seed(seed, stream::policy_init, static_cast<std::uint64_t>(cfg.scenario.n_miab)));
    a.ue = PolicyNet(low_policy_shape(cfg.learning, ns), rng);
    return a;
}

enum class Algorithm { Hmarl, BenchA, BenchB };

inline const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Hmarl: return "hmarl";
        case Algorithm::BenchA: return "bench-a";
        case Algorithm::BenchB: return "bench-b";
    }
    return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
    if (s == "hmarl") return Algorithm::Hmarl;
    if (s == "bench-a") return Algorithm::BenchA;
    if (s == "bench-b") return Algorithm::BenchB;
    throw ConfigError("algo", "unknown algorithm '" + s + "' (expected hmarl, bench-a or bench-b)");
}

struct EpisodeOptions {
    Algorithm algo = Algorithm::Hmarl;
    bool greedy = false;             // argmax instead of sampling
    bool collect = false;            // record PPO trajectories
    bool check_constraints = false;  // count C2-C10 violations every step
    int T_h = 250;
    int T_l = 250;
    int macro_rounds = 4;
};

struct EpisodeResult {
    // Means over low-level steps.
    double kappa = 0.0;
    double sum_rate = 0.0;
    double sum_rate_miab = 0.0;
    double sum_backhaul = 0.0;
    // Means over all reward samples of each level.
    double high_reward = 0.0;
    double low_reward = 0.0;
    double high_backhaul_mean = 0.0;  // frozen-association C^(b) over high steps
    std::size_t high_steps = 0;
    std::size_t low_steps = 0;
    std::size_t violations = 0;
    std::vector<Violation> first_violations;  // up to a few, for diagnostics
    std::vector<std::vector<Sample>> miab_samples;
    std::vector<Sample> ue_samples;
};

struct RandomStreams {
    Rng world, actions, kmeans;
};

namespace detail {

inline void count_violations(const NetworkState& s, const std::vector<Vec2>& prev, EpisodeResult& out) {
    auto v = check_constraints(s, s.x, s.backhaul, &prev);
    out.violations += v.size();
    for (auto& e : v)
        if (out.first_violations.size() < 8) out.first_violations.push_back(std::move(e));
}

}  // namespace detail

/// One episode of alternating phases: T_h relay-movement steps with the
/// association frozen, then T_l association steps with relay positions
/// frozen, repeated macro_rounds times. Every step records the two reward
/// signals, so benchmark runs report them too. `agents` is required for
/// hMARL and ignored otherwise.
inline EpisodeResult run_episode(NetworkState& s, const Agents* agents, RewardNormalizer& norm, const Config& cfg,
                                 const EpisodeOptions& opt, RandomStreams& rng) {
    const auto& sc = s.config;
    const auto& lc = cfg.learning;
    const std::size_t ns = s.n_stations(), K = s.n_ues(), nm = s.miabs.size();
    const bool hmarl = opt.algo == Algorithm::Hmarl;
    const bool collect = opt.collect && hmarl;  // benchmarks have nothing to learn
    if (hmarl && (!agents || agents->miab.size() != nm))
        throw ContractViolation("run_episode: one relay policy per relay required");
    if (hmarl && agents->ue.shape().obs_dim != low_obs_dim(ns))
        throw CheckpointError("user policy observation size does not match the relay count");
    EpisodeResult out;
    if (collect) out.miab_samples.resize(nm);
    std::vector<std::vector<Transition>> miab_traj(nm);
    std::vector<std::vector<Transition>> ue_traj(K);
    double high_sum = 0.0, low_sum = 0.0, cb_sum = 0.0;
    std::size_t high_n = 0, low_n = 0;

    auto pick = [&](const PolicyNet::Forward& f, Eigen::Index col) {
        return opt.greedy ? argmax_column(f.probs, col) : sample_column(f.probs, col, rng.actions);
    };

    for (int round = 0; round < opt.macro_rounds; ++round) {
        for (int t = 0; t < opt.T_h; ++t) {
            const auto prev = s.miab_positions();
            const auto targets = compute_centroid_targets(s.active_ue_positions(), prev, sc.step_size_dl, rng.kmeans);
            if (hmarl) {
                for (std::size_t k = 0; k < nm; ++k) {
                    auto in = high_input(s, k + 1);
                    const auto f = agents->miab[k].forward(in);
                    const int a = pick(f, 0);
                    if (collect)
                        miab_traj[k].push_back({std::move(in), a, std::log(f.probs(a, 0)), f.values(0), 0.0, false});
                    move_miab(s, k + 1, direction_from_index(a));
                }
            } else {
                benchmark_move(s, rng.kmeans, true);
            }
            const double cb = frozen_backhaul_sum(s);
            norm.observe_backhaul(cb);
            const double cb_n = norm.normalize_backhaul(cb);
            cb_sum += cb;
            for (std::size_t k = 0; k < nm; ++k) {
                const double r = high_reward((s.miabs[k].position - targets[k]).norm(), sc.d0, lc.d_max, cb_n);
                high_sum += r;
                ++high_n;
                if (collect) miab_traj[k].back().reward = r;
            }
            if (opt.check_constraints) detail::count_violations(s, prev, out);
            ++out.high_steps;
            advance_world(s, rng.world);
        }
        if (collect)
            for (std::size_t k = 0; k < nm; ++k)
                if (!miab_traj[k].empty()) {
                    miab_traj[k].back().done = true;
                    append_samples(miab_traj[k], lc.gamma_h, lc.gae_lambda, out.miab_samples[k]);
                }

        for (int t = 0; t < opt.T_l; ++t) {
            const auto prev = s.miab_positions();
            const RadioContext ctx(s);
            AllocationResult alloc;
            std::vector<std::size_t> users;  // users that acted this step
            if (hmarl) {
                std::vector<PolicyNet::Input> inputs;
                for (std::size_t j = 0; j < K; ++j)
                    if (s.ues[j].active) {
                        inputs.push_back(low_input(s, ctx, j));
                        users.push_back(j);
                    }
                std::vector<int> requests(K, -1);
                if (!inputs.empty()) {
                    const auto f = agents->ue.forward(inputs);
                    for (std::size_t u = 0; u < users.size(); ++u) {
                        const auto col = static_cast<Eigen::Index>(u);
                        const int a = pick(f, col);
                        requests[users[u]] = a == idle_action(ns) ? -1 : a;
                        if (collect)
                            ue_traj[users[u]].push_back(
                                {std::move(inputs[u]), a, std::log(f.probs(a, col)), f.values(col), 0.0, false});
                    }
                }
                alloc = apply_association(s, ctx, requests);
            } else {
                alloc = allocate(s, ctx, max_snr_association(s, ctx),
                                 opt.algo == Algorithm::BenchA ? BetaRule::Mci : BetaRule::OptimalP1);
                commit_allocation(s, alloc);
            }
            const auto& rep = alloc.report;
            norm.observe_rate(rep.sum_rate);
            const double r = low_reward(rep.kappa, sc.kappa0, norm.normalize_rate(rep.sum_rate));
            low_sum += r;
            ++low_n;
            if (collect)
                for (std::size_t j : users) ue_traj[j].back().reward = r;
            out.kappa += rep.kappa;
            out.sum_rate += rep.sum_rate;
            out.sum_rate_miab += rep.sum_rate_miab;
            out.sum_backhaul += rep.sum_backhaul;
            if (opt.check_constraints) detail::count_violations(s, prev, out);
            ++out.low_steps;
            advance_world(s, rng.world);
        }
        if (collect)
            for (std::size_t j = 0; j < K; ++j)
                if (!ue_traj[j].empty()) {
                    ue_traj[j].back().done = true;
                    append_samples(ue_traj[j], lc.gamma_l, lc.gae_lambda, out.ue_samples);
                }
    }
    if (out.low_steps > 0) {
        const double n = static_cast<double>(out.low_steps);
        out.kappa /= n;
        out.sum_rate /= n;
        out.sum_rate_miab /= n;
        out.sum_backhaul /= n;
    }
    out.high_reward = high_n ? high_sum / static_cast<double>(high_n) : 0.0;
    out.low_reward = low_n ? low_sum / static_cast<double>(low_n) : 0.0;
    out.high_backhaul_mean = out.high_steps ? cb_sum / static_cast<double>(out.high_steps) : 0.0;
    return out;
}

inline PpoConfig ppo_config(const LearningConfig& lc, double gamma) {
    PpoConfig c;
    c.gamma = gamma;
    c.gae_lambda = lc.gae_lambda;
    c.clip_eps = lc.clip_eps;
    c.value_coef = lc.value_coef;
    c.entropy_coef = lc.entropy_coef;
    c.epochs = lc.epochs;
    c.minibatch = lc.minibatch;
    c.max_grad_norm = lc.max_grad_norm;
    return c;
}

struct TrainingRecord {
    long episode = 0;
    std::uint64_t seed = 0;
    EpisodeResult result;
    std::vector<PpoStats> miab_stats;
    PpoStats ue_stats;
};

/// Hierarchical trainer: per-relay movement policies and one shared user
/// policy, updated by PPO after every episode on that episode's samples.
class Trainer {
public:
    Trainer(const Config& cfg, std::uint64_t seed)
        : cfg_(cfg), seed_(seed), agents_(make_agents(cfg, seed)),
          norm_(cfg.learning.normalizer_decay, cfg.learning.warmup_episodes) {
        cfg_.validate();
        rebuild_optimizers();
    }

    Trainer(const Config& cfg, std::uint64_t seed, Agents agents, RewardNormalizer norm, long episode)
        : cfg_(cfg), seed_(seed), agents_(std::move(agents)), norm_(norm), episode_(episode) {
        cfg_.validate();
        rebuild_optimizers();
    }

    /// Seed of the training deployment for an episode.
    static std::uint64_t episode_seed(std::uint64_t master, long episode) {
        return derive_seed(master, stream::deployment, static_cast<std::uint64_t>(episode));
    }

    TrainingRecord train_episode() {
        const auto ep = static_cast<std::uint64_t>(episode_);
        TrainingRecord rec;
        rec.episode = episode_;
        rec.seed = episode_seed(seed_, episode_);
        NetworkState s = init_scenario(cfg_.scenario, rec.seed);
        RandomStreams rng{Rng(derive_seed(rec.seed, 1)), Rng(derive_seed(seed_, stream::action_sampling, ep)),
                          Rng(derive_seed(seed_, stream::kmeans, ep))};
        EpisodeOptions opt;
        opt.collect = true;
        opt.T_h = cfg_.learning.T_h;
        opt.T_l = cfg_.learning.T_l;
        opt.macro_rounds = cfg_.learning.macro_rounds;
        rec.result = run_episode(s, &agents_, norm_, cfg_, opt, rng);
        Rng mb(derive_seed(seed_, stream::minibatch, ep));
        const auto high_cfg = ppo_config(cfg_.learning, cfg_.learning.gamma_h);
        const auto low_cfg = ppo_config(cfg_.learning, cfg_.learning.gamma_l);
        for (std::size_t k = 0; k < agents_.miab.size(); ++k) {
            if (rec.result.miab_samples[k].empty()) continue;
            rec.miab_stats.push_back(ppo_update(agents_.miab[k], miab_opt_[k], rec.result.miab_samples[k], high_cfg, mb));
        }
        if (!rec.result.ue_samples.empty()) rec.ue_stats = ppo_update(agents_.ue, ue_opt_, rec.result.ue_samples, low_cfg, mb);
        rec.result.miab_samples.clear();
        rec.result.ue_samples.clear();
        norm_.end_episode(rec.result.high_backhaul_mean, rec.result.sum_rate);
        ++episode_;
        return rec;
    }

    const Config& config() const noexcept { return cfg_; }
    std::uint64_t seed() const noexcept { return seed_; }
    long episode() const noexcept { return episode_; }
    Agents& agents() noexcept { return agents_; }
    const Agents& agents() const noexcept { return agents_; }
    const RewardNormalizer& normalizer() const noexcept { return norm_; }

private:
    void rebuild_optimizers() {
        miab_opt_.clear();
        for (auto& net : agents_.miab) miab_opt_.emplace_back(net.params(), cfg_.learning.learning_rate, cfg_.learning.adam_eps);
        ue_opt_ = Adam(agents_.ue.params(), cfg_.learning.learning_rate, cfg_.learning.adam_eps);
    }

    Config cfg_;
    std::uint64_t seed_;
    Agents agents_;
    RewardNormalizer norm_;
    long episode_ = 0;
    std::vector<Adam> miab_opt_;
    Adam ue_opt_;
};

/// One evaluation deployment: a single positioning phase, then a single
/// association phase, with greedy actions for hMARL. Rewards are normalised
/// by the run's own running means.
inline EpisodeResult evaluate_run(Algorithm algo, const Agents* agents, const Config& cfg, std::uint64_t run_seed,
                                  bool check = true) {
    NetworkState s = init_scenario(cfg.scenario, run_seed);
    RandomStreams rng{Rng(derive_seed(run_seed, 1)), Rng(derive_seed(run_seed, stream::action_sampling)),
                      Rng(derive_seed(run_seed, stream::kmeans))};
    RewardNormalizer norm(cfg.learning.normalizer_decay, INT_MAX);
    EpisodeOptions opt;
    opt.algo = algo;
    opt.greedy = true;
    opt.check_constraints = check;
    opt.T_h = cfg.learning.eval_T_h > 0 ? cfg.learning.eval_T_h : cfg.learning.T_h;
    opt.T_l = cfg.learning.eval_T_l > 0 ? cfg.learning.eval_T_l : cfg.learning.T_l;
    opt.macro_rounds = 1;
    return run_episode(s, agents, norm, cfg, opt, rng);
}

}  // namespace miab
