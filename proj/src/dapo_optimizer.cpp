#include "finrl_dapo/dapo_optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace finrl_dapo::dapo {

namespace {

constexpr double kUniformSigmaTol = 1e-12;
constexpr double kSquashClip = 1.0 - 1e-6;

struct Moments {
    double mean = 0.0;
    double sigma = 0.0;               // population std, divisor n
    std::vector<double> deviations;   // rewards - mean, re-centered
};

// Two-pass mean with a second centering pass, so the deviations sum to zero
// to machine precision even for adversarial magnitudes.
Moments central_moments(std::span<const double> rewards) {
    Moments m;
    const std::size_t n = rewards.size();
    if (n == 0) return m;
    double sum = 0.0;
    for (double r : rewards) sum += r;
    m.mean = sum / static_cast<double>(n);
    m.deviations.resize(n);
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        m.deviations[i] = rewards[i] - m.mean;
        residual += m.deviations[i];
    }
    const double correction = residual / static_cast<double>(n);
    double sq = 0.0;
    for (double& d : m.deviations) {
        d -= correction;
        sq += d * d;
    }
    m.sigma = std::sqrt(sq / static_cast<double>(n));
    return m;
}

}  // namespace

std::vector<double> group_advantage(std::span<const double> rewards, double adv_epsilon) {
    if (rewards.empty()) return {};
    if (!(adv_epsilon > 0.0)) throw InvalidConfig("adv_epsilon must be > 0");
    Moments m = central_moments(rewards);
    std::vector<double> adv(rewards.size());
    const double denom = m.sigma + adv_epsilon;
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = m.deviations[i] / denom;
    return adv;
}

bool uniform_rewards(std::span<const double> rewards) {
    if (rewards.size() <= 1) return true;
    return central_moments(rewards).sigma <= kUniformSigmaTol;
}

std::vector<GroupSample> dynamic_filter(std::vector<GroupSample> groups) {
    std::vector<GroupSample> kept;
    kept.reserve(groups.size());
    for (auto& g : groups) {
        if (uniform_rewards(g.shaped_rewards)) continue;
        g.kept = true;
        kept.push_back(std::move(g));
    }
    return kept;
}

double clipped_surrogate_term(double ratio, double advantage, double eps_low, double eps_high) {
    const double unclipped = ratio * advantage;
    const double clipped = std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high) * advantage;
    return std::min(unclipped, clipped);
}

LossResult dapo_loss(const policy::PolicyParams& params, std::span<const GroupSample> batch,
                     const OptimizerConfig& cfg) {
    if (batch.empty()) throw Error("dapo_loss: empty batch");

    LossResult out;
    out.grad.assign(params.value.size(), 0.0);
    policy::Gradient scratch;

    double sum_terms = 0.0;
    std::size_t samples = 0;
    for (const auto& group : batch) {
        if (!group.kept) continue;  // masked: contributes neither term nor denominator
        const std::size_t n = group.actions.size();
        if (group.advantages.size() != n || group.old_log_probs.size() != n)
            throw ShapeMismatch("group arrays disagree with its action count");
        for (std::size_t i = 0; i < n; ++i) {
            const double advantage = group.advantages[i];
            const double logp = policy::log_prob_with_grad(params, group.obs, group.actions[i],
                                                           scratch);
            const double ratio = std::exp(logp - group.old_log_probs[i]);
            if (!std::isfinite(ratio) || !std::isfinite(advantage))
                throw NonFiniteLoss("ratio or advantage is not finite");
            const double unclipped = ratio * advantage;
            const double clipped =
                std::clamp(ratio, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high) * advantage;
            const double term = std::min(unclipped, clipped);
            if (!std::isfinite(term)) throw NonFiniteLoss("surrogate term is not finite");
            // min() picks the unclipped branch on ties; the clipped branch is a
            // constant in theta wherever it is strictly smaller.
            const double coeff = (unclipped <= clipped) ? advantage * ratio : 0.0;
            if (coeff != 0.0) {
                for (std::size_t p = 0; p < scratch.size(); ++p)
                    out.grad[p] += coeff * scratch[p];
            }
            sum_terms += term;
            out.ratios.push_back(ratio);
            out.terms.push_back(term);
            ++samples;
        }
    }
    if (samples == 0) throw Error("dapo_loss: every group in the batch is masked");

    const double inv = 1.0 / static_cast<double>(samples);
    out.loss = sum_terms * inv;
    for (double& g : out.grad) g *= inv;
    return out;
}

policy::PolicyParams sgd_update(const policy::PolicyParams& params, const policy::Gradient& grad,
                                double learning_rate) {
    if (grad.size() != params.value.size())
        throw ShapeMismatch("gradient has " + std::to_string(grad.size()) + " entries, params " +
                            std::to_string(params.value.size()));
    policy::PolicyParams next = params;
    for (std::size_t i = 0; i < next.value.size(); ++i)
        next.value[i] += learning_rate * grad[i];
    next.clamp_log_std();
    return next;
}

namespace {

/// Build one GroupSample at `state`: sample candidates from the snapshot,
/// evaluate them as counterfactual one-step rollouts, shape rewards with the
/// day's signals, and normalize advantages within the group.
GroupSample collect_group(const env::EnvState& state, const data::MarketFrame& market,
                          const data::SignalFrame& signals, const env::EnvConfig& env_cfg,
                          const reward::RewardConfig& reward_cfg, const OptimizerConfig& opt_cfg,
                          const PolicySnapshot& snapshot, const policy::ObsNormalizer& normalizer,
                          std::mt19937_64& rng, std::vector<env::StepOutcome>& outcomes) {
    GroupSample group;
    group.obs = normalizer.normalize(env::flatten_observation(state));
    group.actions = policy::sample_group(snapshot, group.obs, opt_cfg.group_size, rng);
    for (auto& action : group.actions) {
        for (double& a : action) a = std::clamp(a, -kSquashClip, kSquashClip);
    }
    outcomes = env::peek_group(state, group.actions, market, signals, env_cfg);

    const std::size_t m = market.num_tickers();
    std::vector<double> holdings_value(m);
    for (std::size_t i = 0; i < group.actions.size(); ++i) {
        const auto& holdings = reward_cfg.pre_trade_weights ? state.holdings
                                                            : outcomes[i].next_state.holdings;
        for (std::size_t j = 0; j < m; ++j)
            holdings_value[j] = static_cast<double>(holdings[j]) * state.prices[j];
        const auto agg =
            reward::aggregate(holdings_value, state.sentiment_feat, state.risk_feat);
        group.raw_rewards.push_back(outcomes[i].raw_reward);
        group.shaped_rewards.push_back(
            reward::shape_reward(outcomes[i].raw_reward, agg, reward_cfg));
        group.old_log_probs.push_back(policy::log_prob(snapshot, group.obs, group.actions[i]));
    }
    group.advantages = group_advantage(group.shaped_rewards, opt_cfg.adv_epsilon);
    group.kept = !uniform_rewards(group.shaped_rewards);
    return group;
}

}  // namespace

TrainResult train(const data::MarketFrame& market, const data::SignalFrame& signals,
                  const env::EnvConfig& env_cfg, const reward::RewardConfig& reward_cfg,
                  const OptimizerConfig& opt_cfg, policy::Policy initial, std::ostream* diag) {
    env_cfg.validate();
    reward_cfg.validate();
    opt_cfg.validate();
    if (market.num_days() < 2) throw Error("train: aligned frames must span at least 2 days");

    const std::size_t obs_dim = env::observation_dim(market);
    if (initial.params.shape.input_dim != obs_dim ||
        initial.params.shape.output_dim != market.num_tickers())
        throw ShapeMismatch("policy dims do not match the data universe");

    TrainResult result;
    result.policy = std::move(initial);
    if (result.policy.normalizer.dim() == 0)
        result.policy.normalizer = policy::ObsNormalizer(obs_dim);

    std::mt19937_64 rng(opt_cfg.seed);
    const std::size_t steps_per_epoch =
        opt_cfg.steps_per_epoch == 0 ? market.num_days() - 1 : opt_cfg.steps_per_epoch;

    std::vector<env::StepOutcome> outcomes;
    for (std::size_t epoch = 0; epoch < opt_cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const PolicySnapshot snapshot = result.policy.params;

        std::vector<GroupSample> groups;
        groups.reserve(steps_per_epoch);
        double raw_sum = 0.0;
        double shaped_sum = 0.0;
        std::size_t member_count = 0;

        env::EnvState state = env::reset(market, signals, env_cfg);
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            if (env::is_terminal(state, market)) state = env::reset(market, signals, env_cfg);
            const auto obs_raw = env::flatten_observation(state);
            result.policy.normalizer.update(obs_raw);
            GroupSample group = collect_group(state, market, signals, env_cfg, reward_cfg,
                                              opt_cfg, snapshot, result.policy.normalizer, rng,
                                              outcomes);
            for (std::size_t i = 0; i < group.raw_rewards.size(); ++i) {
                raw_sum += group.raw_rewards[i];
                shaped_sum += group.shaped_rewards[i];
                ++member_count;
            }
            state = outcomes[0].next_state;  // candidate 0 advances the episode
            groups.push_back(std::move(group));
        }

        const std::size_t collected = groups.size();
        std::vector<GroupSample> kept = dynamic_filter(std::move(groups));
        if (kept.empty()) throw AllFiltered();
        const std::size_t dropped = collected - kept.size();

        double loss_sum = 0.0;
        std::size_t updates = 0;
        for (std::size_t begin = 0; begin < kept.size(); begin += opt_cfg.minibatch_groups) {
            const std::size_t end = std::min(begin + opt_cfg.minibatch_groups, kept.size());
            const auto res = dapo_loss(result.policy.params,
                                       std::span(kept.data() + begin, end - begin), opt_cfg);
            result.policy.params =
                sgd_update(result.policy.params, res.grad, opt_cfg.learning_rate);
            loss_sum += res.loss;
            ++updates;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.mean_raw_reward = raw_sum / static_cast<double>(member_count);
        stats.mean_shaped_reward = shaped_sum / static_cast<double>(member_count);
        stats.filtered_fraction =
            static_cast<double>(dropped) / static_cast<double>(collected);
        stats.loss = loss_sum / static_cast<double>(updates);
        stats.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(stats);
        if (diag != nullptr) {
            *diag << "epoch " << epoch << ": mean_raw=" << stats.mean_raw_reward
                  << " filtered=" << dropped << "/" << collected << " loss=" << stats.loss
                  << '\n';
        }
    }
    return result;
}

}  // namespace finrl_dapo::dapo
