#include "finrl_dapo/backtest_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace finrl_dapo::backtest {

namespace {

constexpr double kSquashClip = 1.0 - 1e-6;

std::vector<double> sorted_copy(std::span<const double> v) {
    std::vector<double> out(v.begin(), v.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t tail_count(std::size_t n, double level) {
    return static_cast<std::size_t>(std::ceil(level * static_cast<double>(n)));
}

}  // namespace

EquityCurve run_backtest(const policy::Policy& policy, const data::MarketFrame& market,
                         const data::SignalFrame& signals, const env::EnvConfig& config,
                         Mode mode, std::uint64_t seed) {
    EquityCurve curve;
    env::EnvState state = env::reset(market, signals, config);
    curve.dates = market.dates;
    curve.total_assets.push_back(state.total_assets());

    std::mt19937_64 rng(seed);
    while (!env::is_terminal(state, market)) {
        const auto obs = policy.normalizer.normalize(env::flatten_observation(state));
        env::ActionVector action;
        if (mode == Mode::Deterministic) {
            const auto head = policy::forward(policy.params, obs);
            action.resize(head.mean.size());
            for (std::size_t k = 0; k < action.size(); ++k) action[k] = std::tanh(head.mean[k]);
        } else {
            action = policy::sample_group(policy.params, obs, 1, rng).front();
        }
        for (double& a : action) a = std::clamp(a, -kSquashClip, kSquashClip);
        auto outcome = env::step(state, action, market, signals, config);
        curve.total_assets.push_back(outcome.next_state.total_assets());
        curve.returns.push_back(outcome.portfolio_return);
        state = std::move(outcome.next_state);
    }
    return curve;
}

void attach_benchmark(EquityCurve& curve, const data::PriceData& benchmark, std::ostream* diag) {
    std::map<std::string, double> close_by_date;
    for (const auto& r : benchmark.records) close_by_date[r.date] = r.close;

    std::vector<double> closes;
    closes.reserve(curve.dates.size());
    double last = 0.0;
    for (const auto& date : curve.dates) {
        auto it = close_by_date.find(date);
        if (it != close_by_date.end()) {
            last = it->second;
        } else if (last == 0.0) {
            if (diag != nullptr)
                *diag << "WARN: benchmark has no price on or before " << date
                      << "; benchmark metrics disabled\n";
            return;
        }
        closes.push_back(last);
    }
    curve.benchmark_returns.resize(curve.dates.size() > 0 ? curve.dates.size() - 1 : 0);
    for (std::size_t t = 0; t + 1 < closes.size(); ++t)
        curve.benchmark_returns[t] = closes[t + 1] / closes[t] - 1.0;
}

double cumulative_return(const EquityCurve& curve) {
    if (curve.total_assets.size() < 2)
        throw InsufficientData("cumulative_return needs at least 2 points");
    return curve.total_assets.back() / curve.total_assets.front() - 1.0;
}

double max_drawdown(std::span<const double> assets) {
    if (assets.size() < 2) throw InsufficientData("max_drawdown needs at least 2 points");
    double peak = assets[0];
    double worst = 0.0;
    for (double v : assets) {
        peak = std::max(peak, v);
        worst = std::min(worst, v / peak - 1.0);
    }
    return worst;
}

double max_drawdown(const EquityCurve& curve) { return max_drawdown(curve.total_assets); }

double cvar(std::span<const double> returns, double level) {
    if (!(level > 0.0 && level < 1.0)) throw InvalidConfig("cvar level must lie in (0, 1)");
    const std::size_t min_n = static_cast<std::size_t>(std::ceil(1.0 / level));
    if (returns.size() < min_n)
        throw InsufficientData("cvar at level " + std::to_string(level) + " needs >= " +
                               std::to_string(min_n) + " returns");
    const auto sorted = sorted_copy(returns);
    const std::size_t k = tail_count(sorted.size(), level);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += sorted[i];
    return sum / static_cast<double>(k);
}

double rachev_ratio(std::span<const double> returns, double tail) {
    if (!(tail > 0.0 && tail < 1.0)) throw InvalidConfig("rachev tail must lie in (0, 1)");
    if (returns.empty()) throw InsufficientData("rachev_ratio needs non-empty returns");
    const auto sorted = sorted_copy(returns);
    const std::size_t k = tail_count(sorted.size(), tail);
    double losses = 0.0;
    double gains = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        losses += sorted[i];
        gains += sorted[sorted.size() - 1 - i];
    }
    losses /= static_cast<double>(k);
    gains /= static_cast<double>(k);
    if (losses >= 0.0) throw ZeroLossTail();
    return gains / std::fabs(losses);
}

double information_ratio(std::span<const double> returns,
                         std::span<const double> benchmark_returns, bool annualize) {
    if (returns.size() != benchmark_returns.size())
        throw DimensionMismatch("returns and benchmark series differ in length");
    if (returns.size() < 2) throw InsufficientData("information_ratio needs >= 2 returns");
    const std::size_t n = returns.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += returns[i] - benchmark_returns[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = (returns[i] - benchmark_returns[i]) - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) throw ZeroTrackingError();
    const double ir = mean / sd;
    return annualize ? ir * std::sqrt(252.0) : ir;
}

double outperformance_frequency(std::span<const double> returns,
                                std::span<const double> benchmark_returns) {
    if (returns.size() != benchmark_returns.size())
        throw DimensionMismatch("returns and benchmark series differ in length");
    if (returns.empty()) throw InsufficientData("outperformance_frequency needs >= 1 return");
    std::size_t wins = 0;
    for (std::size_t i = 0; i < returns.size(); ++i) {
        if (returns[i] > benchmark_returns[i]) ++wins;
    }
    return static_cast<double>(wins) / static_cast<double>(returns.size());
}

MetricsReport compute_metrics(const EquityCurve& curve, double cvar_level, double rachev_tail) {
    MetricsReport report;
    report.cumulative_return = cumulative_return(curve);
    report.max_drawdown = max_drawdown(curve);
    report.cvar_5 = cvar(curve.returns, cvar_level);
    report.rachev_ratio = rachev_ratio(curve.returns, rachev_tail);
    if (!curve.benchmark_returns.empty()) {
        report.information_ratio = information_ratio(curve.returns, curve.benchmark_returns);
        report.information_ratio_annualized =
            information_ratio(curve.returns, curve.benchmark_returns, true);
        report.outperformance_frequency =
            outperformance_frequency(curve.returns, curve.benchmark_returns);
    }
    return report;
}

std::string format_metrics_table(const MetricsReport& report, const std::string& title) {
    std::ostringstream out;
    auto pct = [](double v) {
        std::ostringstream s;
        s.setf(std::ios::fixed);
        s.precision(2);
        s << v * 100.0 << "%";
        return s.str();
    };
    auto num = [](double v) {
        std::ostringstream s;
        s.setf(std::ios::fixed);
        s.precision(4);
        s << v;
        return s.str();
    };
    out << title << '\n';
    out << "Metric                     | Value\n";
    out << "---------------------------+-----------\n";
    out << "Cumulative Return          | " << pct(report.cumulative_return) << '\n';
    out << "Max Drawdown               | " << pct(report.max_drawdown) << '\n';
    out << "Rachev Ratio               | " << num(report.rachev_ratio) << '\n';
    out << "Information Ratio          | "
        << (report.information_ratio ? num(*report.information_ratio) : "n/a") << '\n';
    out << "CVaR (5%)                  | " << pct(report.cvar_5) << '\n';
    out << "Outperformance Frequency   | "
        << (report.outperformance_frequency ? pct(*report.outperformance_frequency) : "n/a")
        << '\n';
    return out.str();
}

}  // namespace finrl_dapo::backtest
