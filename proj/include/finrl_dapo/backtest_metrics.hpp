#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "finrl_dapo/data_ingest.hpp"
#include "finrl_dapo/errors.hpp"
#include "finrl_dapo/policy_net.hpp"
#include "finrl_dapo/trading_env.hpp"

namespace finrl_dapo::backtest {

enum class Mode { Deterministic, Stochastic };

/// Daily portfolio values over the evaluation window, plus per-day fractional
/// returns (length = days - 1) and optional benchmark returns on the same
/// dates.
struct EquityCurve {
    std::vector<std::string> dates;
    std::vector<double> total_assets;
    std::vector<double> returns;
    std::vector<double> benchmark_returns;  // empty when no benchmark given
};

/// The six reported metrics. The benchmark-relative ones are absent when no
/// benchmark series was supplied.
struct MetricsReport {
    double cumulative_return = 0.0;
    double max_drawdown = 0.0;
    double rachev_ratio = 0.0;
    std::optional<double> information_ratio;
    std::optional<double> information_ratio_annualized;
    double cvar_5 = 0.0;
    std::optional<double> outperformance_frequency;
};

/// Roll a policy over the frames. Deterministic mode plays the squashed
/// policy mean every day; stochastic mode samples with the given seed. The
/// normalizer is frozen throughout. The curve starts at initial_cash.
EquityCurve run_backtest(const policy::Policy& policy, const data::MarketFrame& market,
                         const data::SignalFrame& signals, const env::EnvConfig& config,
                         Mode mode = Mode::Deterministic, std::uint64_t seed = 0);

/// Attach benchmark returns to a curve: benchmark closes are matched to the
/// curve dates (forward-filled inside gaps) and differenced.
void attach_benchmark(EquityCurve& curve, const data::PriceData& benchmark,
                      std::ostream* diag = nullptr);

/// assets_last / assets_first - 1.
double cumulative_return(const EquityCurve& curve);

/// min over t of assets_t / running_peak_t - 1; always <= 0.
double max_drawdown(const EquityCurve& curve);
double max_drawdown(std::span<const double> assets);

/// Expected shortfall: mean of the worst ceil(level * N) daily returns.
/// Requires at least ceil(1/level) observations.
double cvar(std::span<const double> returns, double level = 0.05);

/// Mean of the best ceil(tail * N) returns over |mean of the worst ones|.
/// Throws ZeroLossTail when the lower tail carries no losses.
double rachev_ratio(std::span<const double> returns, double tail = 0.05);

/// mean(excess) / sample_std(excess); multiply by sqrt(252) to annualize.
double information_ratio(std::span<const double> returns,
                         std::span<const double> benchmark_returns, bool annualize = false);

/// Fraction of days the strategy return strictly beats the benchmark.
double outperformance_frequency(std::span<const double> returns,
                                std::span<const double> benchmark_returns);

/// All six metrics of one curve. IR and outperformance are set only when the
/// curve carries benchmark returns.
MetricsReport compute_metrics(const EquityCurve& curve, double cvar_level = 0.05,
                              double rachev_tail = 0.05);

/// Plain-text table mirroring the reported layout, one metric per row.
std::string format_metrics_table(const MetricsReport& report, const std::string& title);

}  // namespace finrl_dapo::backtest
