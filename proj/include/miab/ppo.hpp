#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "miab/errors.hpp"
#include "miab/nn.hpp"
#include "miab/policy.hpp"
#include "miab/random.hpp"

namespace miab {

struct PpoConfig {
    double gamma = 0.95;
    double gae_lambda = 0.95;
    double clip_eps = 0.2;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
    int epochs = 4;
    int minibatch = 256;
    double max_grad_norm = 0.5;
    bool normalize_advantages = true;
};

/// One agent step as recorded during collection.
struct Transition {
    PolicyNet::Input input;
    int action = 0;
    double log_prob = 0.0;
    double value = 0.0;
    double reward = 0.0;
    bool done = false;
};

/// Training sample after advantage estimation.
struct Sample {
    PolicyNet::Input input;
    int action = 0;
    double log_prob = 0.0;
    double advantage = 0.0;
    double ret = 0.0;
};

/// Generalised advantage estimation over one trajectory; the value after a
/// `done` step (and after the last step) is taken as zero, so returns are
/// finite-horizon discounted sums.
inline void compute_gae(std::span<const double> rewards, std::span<const double> values, std::span<const bool> dones,
                        double gamma, double lambda, std::vector<double>& advantages, std::vector<double>& returns) {
    const std::size_t T = rewards.size();
    if (values.size() != T || dones.size() != T) throw ContractViolation("compute_gae: length mismatch");
    advantages.assign(T, 0.0);
    returns.assign(T, 0.0);
    double next_adv = 0.0;
    for (std::size_t k = T; k-- > 0;) {
        const bool terminal = dones[k] || k + 1 == T;
        const double next_value = terminal ? 0.0 : values[k + 1];
        const double delta = rewards[k] + gamma * next_value - values[k];
        next_adv = delta + (terminal ? 0.0 : gamma * lambda * next_adv);
        advantages[k] = next_adv;
        returns[k] = advantages[k] + values[k];
    }
}

inline void append_samples(std::vector<Transition>& trajectory, double gamma, double lambda, std::vector<Sample>& out) {
    std::vector<double> r, v, adv, ret;
    // std::vector<bool> is not contiguous, so flags live in a plain array.
    std::unique_ptr<bool[]> flags(new bool[trajectory.size()]);
    for (std::size_t k = 0; k < trajectory.size(); ++k) {
        r.push_back(trajectory[k].reward);
        v.push_back(trajectory[k].value);
        flags[k] = trajectory[k].done;
    }
    compute_gae(r, v, std::span<const bool>(flags.get(), trajectory.size()), gamma, lambda, adv, ret);
    for (std::size_t k = 0; k < trajectory.size(); ++k)
        out.push_back({std::move(trajectory[k].input), trajectory[k].action, trajectory[k].log_prob, adv[k], ret[k]});
    trajectory.clear();
}

/// Mean of min(r A, clip(r, 1-eps, 1+eps) A).
inline double clipped_surrogate(std::span<const double> ratios, std::span<const double> advantages, double eps) {
    if (ratios.size() != advantages.size() || ratios.empty()) throw ContractViolation("clipped_surrogate: bad input");
    double s = 0.0;
    for (std::size_t k = 0; k < ratios.size(); ++k) {
        const double r = ratios[k], a = advantages[k];
        s += std::min(r * a, std::clamp(r, 1.0 - eps, 1.0 + eps) * a);
    }
    return s / static_cast<double>(ratios.size());
}

struct PpoStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    double clip_fraction = 0.0;
    double grad_norm = 0.0;
    int minibatches = 0;
};

/// Gradient of the PPO loss on one minibatch, accumulated into the network.
/// Loss = -surrogate + c_v mean((V - ret)^2) - c_e mean(entropy).
inline void ppo_loss_backward(PolicyNet& net, const PolicyNet::Forward& f, std::span<const Sample* const> batch,
                              std::span<const double> advantages, const PpoConfig& cfg, PpoStats* stats = nullptr) {
    const auto B = static_cast<Eigen::Index>(batch.size());
    const auto A = f.logits.rows();
    Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(A, B);
    Eigen::VectorXd d_values(B);
    const double inv_b = 1.0 / static_cast<double>(B);
    double pl = 0, vl = 0, ent = 0, kl = 0, clipped = 0;
    for (Eigen::Index s = 0; s < B; ++s) {
        const Sample& smp = *batch[static_cast<std::size_t>(s)];
        const auto probs = f.probs.col(s);
        const double logp = std::log(std::max(probs(smp.action), 1e-300));
        const double ratio = std::exp(logp - smp.log_prob);
        const double adv = advantages[static_cast<std::size_t>(s)];
        const double unclipped = ratio * adv;
        const double clipped_v = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv;
        const bool clip_active = clipped_v < unclipped;
        pl -= std::min(unclipped, clipped_v);
        clipped += (ratio < 1.0 - cfg.clip_eps || ratio > 1.0 + cfg.clip_eps);
        kl += smp.log_prob - logp;
        // d(-surrogate)/d logp_a
        const double d_logp = clip_active ? 0.0 : -unclipped;
        for (Eigen::Index a = 0; a < A; ++a) d_logits(a, s) = d_logp * ((a == smp.action ? 1.0 : 0.0) - probs(a));
        double h = 0.0;
        for (Eigen::Index a = 0; a < A; ++a)
            if (probs(a) > 0) h -= probs(a) * std::log(probs(a));
        ent += h;
        for (Eigen::Index a = 0; a < A; ++a) {
            const double lp = probs(a) > 0 ? std::log(probs(a)) : 0.0;
            // d(-c_e H)/d logit_a = c_e p_a (log p_a + H)
            d_logits(a, s) += cfg.entropy_coef * probs(a) * (lp + h);
        }
        const double err = f.values(s) - smp.ret;
        vl += err * err;
        d_values(s) = 2.0 * cfg.value_coef * err;
    }
    d_logits *= inv_b;
    d_values *= inv_b;
    net.backward(f, d_logits, d_values);
    if (stats) {
        stats->policy_loss += pl * inv_b;
        stats->value_loss += vl * inv_b;
        stats->entropy += ent * inv_b;
        stats->approx_kl += kl * inv_b;
        stats->clip_fraction += clipped * inv_b;
    }
}

/// Clipped-surrogate update: `epochs` passes over shuffled minibatches.
inline PpoStats ppo_update(PolicyNet& net, Adam& opt, std::span<const Sample> samples, const PpoConfig& cfg, Rng& rng) {
    if (samples.empty()) throw ContractViolation("ppo_update: no samples");
    PpoStats stats;
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto params = net.params();
    const std::size_t mb = static_cast<std::size_t>(cfg.minibatch);
    std::vector<PolicyNet::Input> inputs;
    std::vector<const Sample*> batch;
    std::vector<double> adv;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += mb) {
            const std::size_t end = std::min(order.size(), start + mb);
            inputs.clear();
            batch.clear();
            adv.clear();
            for (std::size_t k = start; k < end; ++k) {
                batch.push_back(&samples[order[k]]);
                inputs.push_back(samples[order[k]].input);
                adv.push_back(samples[order[k]].advantage);
            }
            if (cfg.normalize_advantages && adv.size() > 1) {
                const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(adv.size());
                double var = 0.0;
                for (double a : adv) var += (a - mean) * (a - mean);
                const double sd = std::sqrt(var / static_cast<double>(adv.size()));
                for (double& a : adv) a = (a - mean) / (sd + 1e-8);
            }
            zero_grads(params);
            const auto f = net.forward(inputs);
            ppo_loss_backward(net, f, batch, adv, cfg, &stats);
            if (!std::isfinite(stats.policy_loss) || !std::isfinite(stats.value_loss))
                throw DivergenceError("ppo_update: non-finite loss (policy " + std::to_string(stats.policy_loss) +
                                      ", value " + std::to_string(stats.value_loss) + ")");
            stats.grad_norm += opt.step(params, cfg.max_grad_norm);
            net.refresh();
            ++stats.minibatches;
        }
    }
    const double m = stats.minibatches;
    stats.policy_loss /= m;
    stats.value_loss /= m;
    stats.entropy /= m;
    stats.approx_kl /= m;
    stats.clip_fraction /= m;
    stats.grad_norm /= m;
    return stats;
}

}  // namespace miab
