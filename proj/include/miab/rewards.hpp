#pragma once

#include "miab/errors.hpp"

namespace miab {

/// Relay movement reward. Far from the target (d >= d0) the reward is the
/// negative normalised distance; inside it the reward is the normalised
/// backhaul capacity minus d0/d_max.
inline double high_reward(double distance, double d0, double d_max, double backhaul_normalized) {
    if (distance < 0.0) throw DomainError("high_reward: negative distance");
    if (distance < d0) return -(d0 / d_max - backhaul_normalized);
    return -distance / d_max;
}

/// Association reward: kappa below the target, otherwise the target plus the
/// normalised sum-rate.
inline double low_reward(double kappa, double kappa0, double rate_normalized) {
    if (kappa < 0.0 || kappa > 1.0) throw DomainError("low_reward: kappa outside [0, 1]");
    if (kappa >= kappa0) return kappa0 + rate_normalized;
    return kappa;
}

/// Running means of the sum backhaul capacity and the sum-rate. During the
/// warm-up episodes the means are cumulative sample averages; afterwards they
/// follow an exponential moving average of per-episode means. A quantity is
/// normalised to 0 while its mean is not positive.
class RewardNormalizer {
public:
    RewardNormalizer() = default;
    RewardNormalizer(double decay, int warmup_episodes) : decay_(decay), warmup_(warmup_episodes) {
        if (!(decay >= 0.0 && decay < 1.0)) throw DomainError("RewardNormalizer: decay must be in [0, 1)");
        if (warmup_episodes < 0) throw DomainError("RewardNormalizer: negative warm-up");
    }

    double normalize_backhaul(double cb) const { return backhaul_mean_ > 0.0 ? cb / backhaul_mean_ : 0.0; }
    double normalize_rate(double r) const { return rate_mean_ > 0.0 ? r / rate_mean_ : 0.0; }

    /// Per-step samples; only used while warming up.
    void observe_backhaul(double cb) {
        if (!warming_up()) return;
        ++backhaul_count_;
        backhaul_mean_ += (cb - backhaul_mean_) / static_cast<double>(backhaul_count_);
    }

    void observe_rate(double r) {
        if (!warming_up()) return;
        ++rate_count_;
        rate_mean_ += (r - rate_mean_) / static_cast<double>(rate_count_);
    }

    /// Closes an episode with its mean backhaul capacity and sum-rate.
    void end_episode(double backhaul_episode_mean, double rate_episode_mean) {
        if (!warming_up()) {
            backhaul_mean_ = decay_ * backhaul_mean_ + (1.0 - decay_) * backhaul_episode_mean;
            rate_mean_ = decay_ * rate_mean_ + (1.0 - decay_) * rate_episode_mean;
        }
        ++episodes_;
    }

    bool warming_up() const noexcept { return episodes_ < warmup_; }
    double backhaul_mean() const noexcept { return backhaul_mean_; }
    double rate_mean() const noexcept { return rate_mean_; }
    long episodes() const noexcept { return episodes_; }
    double decay() const noexcept { return decay_; }
    int warmup() const noexcept { return warmup_; }

    /// Restores a saved state (checkpoint loading).
    void restore(double backhaul_mean, double rate_mean, long episodes, long backhaul_count, long rate_count) {
        backhaul_mean_ = backhaul_mean;
        rate_mean_ = rate_mean;
        episodes_ = episodes;
        backhaul_count_ = backhaul_count;
        rate_count_ = rate_count;
    }
    long backhaul_count() const noexcept { return backhaul_count_; }
    long rate_count() const noexcept { return rate_count_; }

private:
    double decay_ = 0.99;
    int warmup_ = 10;
    double backhaul_mean_ = 0.0;
    double rate_mean_ = 0.0;
    long episodes_ = 0;
    long backhaul_count_ = 0;
    long rate_count_ = 0;
};

}  // namespace miab
