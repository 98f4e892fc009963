#include "finrl_dapo/trading_env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace finrl_dapo::env {

namespace {

void check_frames(const data::MarketFrame& market, const data::SignalFrame& signals,
                  const EnvConfig& config) {
    if (market.dates != signals.dates || market.tickers != signals.tickers)
        throw ShapeMismatch("market and signal frames have different axes");
    if (market.num_days() == 0 || market.num_tickers() == 0)
        throw ShapeMismatch("frames are empty");
    if (!config.tickers.empty() && config.tickers != market.tickers)
        throw ShapeMismatch("config tickers differ from the aligned frames");
}

EnvState state_at(std::size_t day, double cash, std::vector<std::int64_t> holdings,
                  const data::MarketFrame& market, const data::SignalFrame& signals) {
    EnvState s;
    s.day_index = day;
    s.cash = cash;
    s.holdings = std::move(holdings);
    const std::size_t m = market.num_tickers();
    const std::size_t k = market.num_indicators();
    s.prices.resize(m);
    s.indicators.resize(m * k);
    s.sentiment_feat.resize(m);
    s.risk_feat.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        s.prices[j] = market.close_at(day, j);
        for (std::size_t i = 0; i < k; ++i) s.indicators[j * k + i] = market.indicator_at(day, j, i);
        s.sentiment_feat[j] = signals.sentiment_at(day, j);
        s.risk_feat[j] = signals.risk_at(day, j);
    }
    return s;
}

}  // namespace

EnvState reset(const data::MarketFrame& market, const data::SignalFrame& signals,
               const EnvConfig& config) {
    config.validate();
    check_frames(market, signals, config);
    return state_at(0, config.initial_cash,
                    std::vector<std::int64_t>(market.num_tickers(), 0), market, signals);
}

StepOutcome step(const EnvState& state, const ActionVector& action,
                 const data::MarketFrame& market, const data::SignalFrame& signals,
                 const EnvConfig& config) {
    config.validate();
    check_frames(market, signals, config);
    const std::size_t m = market.num_tickers();
    if (state.holdings.size() != m || state.prices.size() != m)
        throw ShapeMismatch("state does not match the frames' ticker axis");
    if (action.size() != m)
        throw DimensionMismatch("action has " + std::to_string(action.size()) +
                                " components, universe has " + std::to_string(m));
    for (double a : action) {
        if (!(a >= -1.0 && a <= 1.0)) throw InvalidAction("component outside [-1, 1]");
    }
    if (state.day_index + 1 >= market.num_days()) throw EpisodeFinished();

    const std::size_t day = state.day_index;
    const double rate = config.transaction_cost_rate;
    const double assets_before = state.total_assets();

    double cash = state.cash;
    std::vector<std::int64_t> holdings = state.holdings;

    // Sells first so freed cash can fund buys on the same day; ascending
    // action value with ties broken by ticker index.
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return action[a] < action[b]; });

    for (std::size_t j : order) {
        const double price = market.close_at(day, j);
        const auto want = static_cast<std::int64_t>(
            std::trunc(action[j] * static_cast<double>(config.hmax)));
        if (want < 0) {
            const std::int64_t sell = std::min(-want, holdings[j]);
            if (sell == 0) continue;
            const double value = static_cast<double>(sell) * price;
            cash += value - rate * value;
            holdings[j] -= sell;
        } else if (want > 0) {
            const double unit_cost = price * (1.0 + rate);
            std::int64_t buy = std::min(
                want, static_cast<std::int64_t>(std::floor(cash / unit_cost)));
            while (buy > 0 && static_cast<double>(buy) * unit_cost > cash) --buy;
            if (buy == 0) continue;
            cash -= static_cast<double>(buy) * unit_cost;
            holdings[j] += buy;
        }
    }

    StepOutcome out;
    out.next_state = state_at(day + 1, cash, std::move(holdings), market, signals);
    const double assets_after = out.next_state.total_assets();
    out.raw_reward = config.reward_scale * (assets_after - assets_before);
    out.portfolio_return = assets_after / assets_before - 1.0;
    out.done = (day + 1 == market.num_days() - 1);
    return out;
}

std::vector<StepOutcome> peek_group(const EnvState& state,
                                    std::span<const ActionVector> actions,
                                    const data::MarketFrame& market,
                                    const data::SignalFrame& signals,
                                    const EnvConfig& config) {
    if (actions.empty()) throw InvalidAction("peek_group needs at least one candidate");
    std::vector<StepOutcome> outcomes;
    outcomes.reserve(actions.size());
    for (const auto& a : actions) outcomes.push_back(step(state, a, market, signals, config));
    return outcomes;
}

std::size_t observation_dim(const data::MarketFrame& market) {
    return 1 + market.num_tickers() * (4 + market.num_indicators());
}

std::vector<double> flatten_observation(const EnvState& state) {
    std::vector<double> obs;
    obs.reserve(1 + state.prices.size() * 4 + state.indicators.size());
    obs.push_back(state.cash);
    for (double p : state.prices) obs.push_back(p);
    for (std::int64_t h : state.holdings) obs.push_back(static_cast<double>(h));
    for (double v : state.indicators) obs.push_back(v);
    for (int s : state.sentiment_feat) obs.push_back(static_cast<double>(s));
    for (int r : state.risk_feat) obs.push_back(static_cast<double>(r));
    return obs;
}

bool is_terminal(const EnvState& state, const data::MarketFrame& market) {
    return state.day_index + 1 >= market.num_days();
}

}  // namespace finrl_dapo::env
