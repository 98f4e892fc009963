#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "finrl_dapo/backtest_metrics.hpp"
#include "finrl_dapo/dapo_optimizer.hpp"
#include "finrl_dapo/run_config.hpp"

namespace finrl_dapo::experiment {

/// Aligned frames plus the optional benchmark price series.
struct LoadedData {
    data::MarketFrame market;
    data::SignalFrame signals;
    std::optional<data::PriceData> benchmark;
};

/// Parse and align the files named by the config (no date slicing).
LoadedData load_data(const config::RunConfig& cfg, std::ostream* diag);

struct TrainOutcome {
    std::filesystem::path checkpoint_path;
    std::filesystem::path log_path;
    std::filesystem::path summary_path;
    std::filesystem::path resolved_config_path;
    dapo::TrainResult result;
};

/// Train on the configured range and write checkpoint, TSV training log,
/// JSON run summary and the resolved config snapshot into cfg.out_dir.
TrainOutcome run_train(const config::RunConfig& cfg, std::ostream* diag);

struct BacktestOutcome {
    std::filesystem::path equity_path;
    std::filesystem::path metrics_json_path;
    std::filesystem::path metrics_text_path;
    backtest::EquityCurve curve;
    backtest::MetricsReport report;
};

/// Backtest a checkpoint over the eval range and write the equity CSV plus
/// metrics JSON and text table into cfg.out_dir.
BacktestOutcome run_backtest(const config::RunConfig& cfg, const std::string& checkpoint_path,
                             std::ostream* diag);

struct SweepPair {
    double alpha = 0.0;
    double beta = 0.0;
    bool ok = false;
    std::string message;  // failure reason when !ok
    backtest::MetricsReport report;
    std::filesystem::path dir;
};

struct SweepOutcome {
    std::vector<SweepPair> pairs;
    std::filesystem::path table_path;
    std::filesystem::path summary_path;
    std::size_t succeeded = 0;
};

/// Train + backtest once per (alpha, beta) pair, each in its own
/// subdirectory of cfg.out_dir/sweep. Pair failures are recorded and the
/// sweep continues. Parallelism is capped by FINRL_DAPO_THREADS.
SweepOutcome run_sweep(const config::RunConfig& cfg,
                       const std::vector<std::pair<double, double>>& grid, std::ostream* diag);

struct ReportOutcome {
    std::filesystem::path svg_path;
    std::filesystem::path text_path;
    std::size_t curves = 0;
    bool has_benchmark = false;
};

/// Overlay every equity curve beneath run_dir (the run itself plus sweep
/// variants) into an SVG cumulative-return chart and a text metrics table.
/// Throws when the directory holds no equity CSVs.
ReportOutcome run_report(const std::string& run_dir, std::ostream* diag);

/// Write/read the equity CSV (`date,total_assets,return,benchmark_return`).
void write_equity_csv(const backtest::EquityCurve& curve, const std::filesystem::path& path);
backtest::EquityCurve read_equity_csv(const std::filesystem::path& path);

}  // namespace finrl_dapo::experiment
