#include "finrl_dapo/signal_reward.hpp"

#include <array>
#include <cmath>

namespace finrl_dapo::reward {

double score_to_factor(int score) {
    static constexpr std::array<double, 5> kFactors = {0.99, 0.995, 1.0, 1.005, 1.01};
    if (score < 1 || score > 5) throw ScoreOutOfRange(0, score);
    return kFactors[static_cast<std::size_t>(score - 1)];
}

SignalAggregate aggregate(std::span<const double> holdings_value,
                          std::span<const int> sentiment,
                          std::span<const int> risk) {
    const std::size_t m = holdings_value.size();
    if (m == 0) throw EmptyUniverse();
    if (sentiment.size() != m || risk.size() != m)
        throw DimensionMismatch("aggregate: holdings_value, sentiment and risk must agree");

    double total = 0.0;
    for (double v : holdings_value) {
        if (v < 0.0) throw InvalidAction("negative holdings value in aggregate");
        total += v;
    }

    SignalAggregate out;
    out.weights.resize(m);
    if (total > 0.0) {
        for (std::size_t j = 0; j < m; ++j) out.weights[j] = holdings_value[j] / total;
    } else {
        // All-cash portfolio: no position to weight by, use uniform weights.
        const double w = 1.0 / static_cast<double>(m);
        for (std::size_t j = 0; j < m; ++j) out.weights[j] = w;
    }

    double s = 0.0;
    double r = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        s += out.weights[j] * score_to_factor(sentiment[j]);
        r += out.weights[j] * score_to_factor(risk[j]);
    }
    out.S = s;
    out.R = r;
    return out;
}

double shape_reward(double raw, const SignalAggregate& agg, const RewardConfig& cfg) {
    return raw * std::pow(agg.S, cfg.alpha) / (std::pow(agg.R, cfg.beta) + cfg.denom_epsilon);
}

}  // namespace finrl_dapo::reward
