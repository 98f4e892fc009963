#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "finrl_dapo/data_ingest.hpp"
#include "finrl_dapo/errors.hpp"

namespace finrl_dapo::env {

/// Per-ticker trade intents in [-1, 1]: the signed fraction of hmax to trade,
/// rounded toward zero to whole shares. Negative sells, positive buys.
using ActionVector = std::vector<double>;

struct EnvConfig {
    double initial_cash = 1e6;
    std::int64_t hmax = 100;
    double transaction_cost_rate = 0.001;
    double reward_scale = 1e-4;
    // When non-empty, must match the aligned frames' ticker axis.
    std::vector<std::string> tickers;

    void validate() const {
        if (!(initial_cash > 0.0)) throw InvalidConfig("env.initial_cash must be > 0");
        if (hmax < 1) throw InvalidConfig("env.hmax must be >= 1");
        if (transaction_cost_rate < 0.0 || transaction_cost_rate > 0.1)
            throw InvalidConfig("env.transaction_cost_rate must lie in [0, 0.1]");
        if (!(reward_scale > 0.0)) throw InvalidConfig("env.reward_scale must be > 0");
    }
};

/// Immutable snapshot of the environment on one day: the observation s_t.
struct EnvState {
    std::size_t day_index = 0;
    double cash = 0.0;
    std::vector<std::int64_t> holdings;  // whole shares, >= 0
    std::vector<double> prices;          // close of day_index
    std::vector<double> indicators;      // [ticker x indicator], row-major
    std::vector<int> sentiment_feat;     // 1..5
    std::vector<int> risk_feat;          // 1..5

    double total_assets() const {
        double v = cash;
        for (std::size_t j = 0; j < holdings.size(); ++j)
            v += static_cast<double>(holdings[j]) * prices[j];
        return v;
    }
};

struct StepOutcome {
    EnvState next_state;
    double raw_reward = 0.0;       // reward_scale * (assets_{t+1} - assets_t)
    double portfolio_return = 0.0; // assets_{t+1} / assets_t - 1
    bool done = false;
};

/// Initial state: day 0, all cash, zero holdings, day-0 features.
/// Throws ShapeMismatch when the frames (or config.tickers) disagree.
EnvState reset(const data::MarketFrame& market, const data::SignalFrame& signals,
               const EnvConfig& config);

/// Execute one trading day. Sells run before buys (ascending action value,
/// ties by ticker index); trades fill at day-t prices; sells are clipped to
/// holdings and buys to affordable shares after costs. The reward is the
/// scaled change in total asset value marked at day t+1 prices.
/// Pure: identical inputs give identical outcomes. Throws EpisodeFinished
/// when stepping past the final day.
StepOutcome step(const EnvState& state, const ActionVector& action,
                 const data::MarketFrame& market, const data::SignalFrame& signals,
                 const EnvConfig& config);

/// Evaluate every candidate action from the same state without advancing the
/// episode: outcome i equals step(state, actions[i]).
std::vector<StepOutcome> peek_group(const EnvState& state,
                                    std::span<const ActionVector> actions,
                                    const data::MarketFrame& market,
                                    const data::SignalFrame& signals,
                                    const EnvConfig& config);

/// Number of observation features: cash plus per-ticker price, holding,
/// indicators, sentiment and risk.
std::size_t observation_dim(const data::MarketFrame& market);

/// Flatten a state into the observation vector, in the order
/// [cash, prices..., holdings..., indicators..., sentiment..., risk...].
std::vector<double> flatten_observation(const EnvState& state);

/// True when the state sits on the final day and cannot step further.
bool is_terminal(const EnvState& state, const data::MarketFrame& market);

}  // namespace finrl_dapo::env
