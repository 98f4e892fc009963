#pragma once

#include <span>
#include <vector>

#include "finrl_dapo/errors.hpp"

namespace finrl_dapo::reward {

/// Exponents of the sentiment-risk reward adjustment. alpha scales the
/// sentiment factor, beta the risk factor; both zero leaves rewards
/// untouched up to the denominator guard.
struct RewardConfig {
    double alpha = 1.0;
    double beta = 1.0;
    double denom_epsilon = 1e-8;
    // Weight the aggregation by the portfolio an action produces (default) or
    // by the pre-trade portfolio, for ablations.
    bool pre_trade_weights = false;

    void validate() const {
        if (alpha < 0.0) throw InvalidConfig("reward.alpha must be >= 0");
        if (beta < 0.0) throw InvalidConfig("reward.beta must be >= 0");
        if (!(denom_epsilon > 0.0)) throw InvalidConfig("reward.denom_epsilon must be > 0");
    }
};

/// Holdings-weighted sentiment/risk factors for one candidate action.
/// S and R are convex combinations of the factor table, so both lie in
/// [0.99, 1.01]; weights sum to 1.
struct SignalAggregate {
    double S = 1.0;
    double R = 1.0;
    std::vector<double> weights;
};

/// Map a discrete 1..5 score to its multiplicative factor
/// (0.99, 0.995, 1.0, 1.005, 1.01). Throws ScoreOutOfRange.
double score_to_factor(int score);

/// Aggregate per-ticker scores into portfolio-level factors. Weights are the
/// proportions of holdings market value; an all-cash portfolio falls back to
/// uniform weights. Throws EmptyUniverse when there are no tickers.
SignalAggregate aggregate(std::span<const double> holdings_value,
                          std::span<const int> sentiment,
                          std::span<const int> risk);

/// Shaped reward: raw * S^alpha / (R^beta + denom_epsilon). Applied with the
/// same factor for positive and negative raw rewards.
double shape_reward(double raw, const SignalAggregate& agg, const RewardConfig& cfg);

}  // namespace finrl_dapo::reward
