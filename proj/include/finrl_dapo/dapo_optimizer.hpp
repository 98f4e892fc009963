#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "finrl_dapo/data_ingest.hpp"
#include "finrl_dapo/errors.hpp"
#include "finrl_dapo/policy_net.hpp"
#include "finrl_dapo/signal_reward.hpp"
#include "finrl_dapo/trading_env.hpp"

namespace finrl_dapo::dapo {

/// Frozen copy of the policy parameters acting as the ratio reference.
using PolicySnapshot = policy::PolicyParams;

struct OptimizerConfig {
    std::size_t group_size = 8;   // candidates sampled per state
    double adv_epsilon = 1e-8;    // guards the advantage denominator
    double eps_low = 0.2;         // lower clip range: ratios below 1 - eps_low
    double eps_high = 0.28;       // upper clip range: ratios above 1 + eps_high
    double learning_rate = 3e-4;
    std::size_t epochs = 100;
    std::size_t steps_per_epoch = 0;  // 0 = one full episode per epoch
    std::size_t minibatch_groups = 16;
    std::uint64_t seed = 42;

    void validate() const {
        if (group_size < 2) throw InvalidConfig("optimizer.group_size must be >= 2");
        if (!(adv_epsilon > 0.0)) throw InvalidConfig("optimizer.adv_epsilon must be > 0");
        if (!(eps_low > 0.0 && eps_low < 1.0))
            throw InvalidConfig("optimizer.eps_low must lie in (0, 1)");
        if (!(eps_high > 0.0)) throw InvalidConfig("optimizer.eps_high must be > 0");
        if (!(learning_rate > 0.0)) throw InvalidConfig("optimizer.learning_rate must be > 0");
        if (minibatch_groups < 1) throw InvalidConfig("optimizer.minibatch_groups must be >= 1");
    }
};

/// Everything recorded about one state's sampled action group. `obs` holds
/// the normalized features the networks saw, so losses replay exactly what
/// was sampled. Advantages are zero-mean within the group whenever kept.
struct GroupSample {
    std::vector<double> obs;
    std::vector<env::ActionVector> actions;
    std::vector<double> raw_rewards;
    std::vector<double> shaped_rewards;
    std::vector<double> old_log_probs;
    std::vector<double> advantages;
    bool kept = true;
};

/// Group-normalized advantages: (r_i - mean) / (pop_std + adv_epsilon).
/// The population standard deviation uses divisor n. A group of identical
/// rewards maps to all-zero advantages.
std::vector<double> group_advantage(std::span<const double> rewards, double adv_epsilon);

/// True when the rewards are all equal: population std <= 1e-12 absolute.
bool uniform_rewards(std::span<const double> rewards);

/// Dynamic sampling: keep only groups whose shaped rewards are not all equal,
/// preserving order. Marks survivors kept = true.
std::vector<GroupSample> dynamic_filter(std::vector<GroupSample> groups);

/// One surrogate term: min(ratio * A, clip(ratio, 1-eps_low, 1+eps_high) * A).
double clipped_surrogate_term(double ratio, double advantage, double eps_low, double eps_high);

struct LossResult {
    double loss = 0.0;
    policy::Gradient grad;       // exact gradient of `loss` w.r.t. params
    std::vector<double> ratios;  // per kept sample, collection order
    std::vector<double> terms;   // matching surrogate terms
};

/// Decoupled-clip surrogate over every (kept group, member) pair, averaged
/// flat across samples; groups with kept = false contribute nothing to the
/// sum or the denominator. The objective is maximized: callers ascend along
/// the returned gradient. Throws NonFiniteLoss on non-finite ratios or
/// advantages.
LossResult dapo_loss(const policy::PolicyParams& params, std::span<const GroupSample> batch,
                     const OptimizerConfig& cfg);

/// Gradient-ascent step: params + learning_rate * grad, with log_std
/// re-clamped to its bounds. Throws ShapeMismatch on size disagreement.
policy::PolicyParams sgd_update(const policy::PolicyParams& params,
                                const policy::Gradient& grad, double learning_rate);

struct EpochStats {
    std::size_t epoch = 0;
    double mean_raw_reward = 0.0;
    double mean_shaped_reward = 0.0;
    double filtered_fraction = 0.0;
    double loss = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    policy::Policy policy;
    std::vector<EpochStats> log;
};

/// Full training loop. Per epoch: freeze a snapshot, roll the environment
/// sampling a group of candidate actions at every state, shape rewards with
/// the day's signals, normalize advantages within each group, drop
/// uniform-reward groups, then run minibatch ascent steps against the
/// snapshot. The episode advances with candidate 0, itself a policy draw.
/// Fully reproducible from the optimizer seed. Throws AllFiltered when an
/// epoch keeps no groups.
TrainResult train(const data::MarketFrame& market, const data::SignalFrame& signals,
                  const env::EnvConfig& env_cfg, const reward::RewardConfig& reward_cfg,
                  const OptimizerConfig& opt_cfg, policy::Policy initial,
                  std::ostream* diag = nullptr);

}  // namespace finrl_dapo::dapo
