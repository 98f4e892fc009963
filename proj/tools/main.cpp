#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "finrl_dapo/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitTraining = 2;

struct GlobalOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::int64_t seed = -1;
};

finrl_dapo::config::RunConfig load_config(const GlobalOptions& opts) {
    if (opts.config_path.empty()) throw finrl_dapo::InvalidConfig("--config is required");
    auto cfg = finrl_dapo::config::RunConfig::load(opts.config_path, opts.overrides);
    // Explicit flags outrank both the file and --set.
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(opts.seed);
        cfg.optimizer.seed = cfg.seed;
    }
    return cfg;
}

std::vector<std::pair<double, double>> parse_grid(const std::vector<std::string>& raw) {
    std::vector<std::pair<double, double>> grid;
    for (const auto& item : raw) {
        const auto comma = item.find(',');
        if (comma == std::string::npos)
            throw finrl_dapo::InvalidConfig("--grid expects alpha,beta; got '" + item + "'");
        try {
            grid.emplace_back(std::stod(item.substr(0, comma)), std::stod(item.substr(comma + 1)));
        } catch (const std::exception&) {
            throw finrl_dapo::InvalidConfig("--grid expects two numbers; got '" + item + "'");
        }
    }
    return grid;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DAPO trading toolkit: group-normalized critic-free policy optimization\n"
                 "with sentiment-risk reward shaping, plus a backtesting engine."};
    app.require_subcommand(1);

    GlobalOptions opts;
    app.add_option("--config", opts.config_path, "Path to the run config (TOML-style)");
    app.add_option("--set", opts.overrides,
                   "Override a config entry as section.key=value (repeatable)");
    app.add_option("--seed", opts.seed, "Override the run seed");
    app.add_option("--out", opts.out_dir, "Override the output directory");

    auto* train = app.add_subcommand("train", "Train a policy and write a checkpoint");
    train->fallthrough();
    auto* bt = app.add_subcommand("backtest", "Roll a checkpoint over the eval range");
    bt->fallthrough();
    std::string checkpoint;
    bt->add_option("--checkpoint", checkpoint,
                   "Checkpoint path (default: <out>/checkpoint.bin)");
    auto* sweep = app.add_subcommand("sweep", "Train + backtest over an (alpha, beta) grid");
    sweep->fallthrough();
    std::vector<std::string> grid_raw;
    sweep->add_option("--grid", grid_raw, "alpha,beta pair (repeatable)");
    auto* report = app.add_subcommand("report", "Render cumulative-return chart for a run dir");
    report->fallthrough();
    std::string run_dir;
    report->add_option("run_dir", run_dir, "Run directory holding equity CSVs");

    CLI11_PARSE(app, argc, argv);

    using namespace finrl_dapo;
    try {
        if (train->parsed()) {
            const auto cfg = load_config(opts);
            try {
                const auto out = experiment::run_train(cfg, &std::cerr);
                std::cout << "checkpoint: " << out.checkpoint_path.string() << '\n'
                          << "training log: " << out.log_path.string() << '\n'
                          << "run summary: " << out.summary_path.string() << '\n';
            } catch (const AllFiltered& e) {
                std::cerr << "error: " << e.what() << '\n';
                return kExitTraining;
            } catch (const NonFiniteLoss& e) {
                std::cerr << "error: " << e.what() << '\n';
                return kExitTraining;
            }
            return kExitOk;
        }
        if (bt->parsed()) {
            const auto cfg = load_config(opts);
            const std::string ckpt =
                checkpoint.empty() ? (std::filesystem::path(cfg.out_dir) / "checkpoint.bin").string()
                                   : checkpoint;
            const auto out = experiment::run_backtest(cfg, ckpt, &std::cerr);
            std::cout << backtest::format_metrics_table(
                out.report, "Backtest " + out.curve.dates.front() + " .. " +
                                out.curve.dates.back());
            std::cout << "equity curve: " << out.equity_path.string() << '\n'
                      << "metrics: " << out.metrics_json_path.string() << '\n';
            return kExitOk;
        }
        if (sweep->parsed()) {
            const auto cfg = load_config(opts);
            const auto grid = parse_grid(grid_raw);
            const auto out = experiment::run_sweep(cfg, grid, &std::cerr);
            std::cout << "sweep table: " << out.table_path.string() << '\n';
            return out.succeeded > 0 ? kExitOk : kExitUsage;
        }
        if (report->parsed()) {
            if (run_dir.empty()) {
                if (opts.config_path.empty()) throw InvalidConfig("report needs a run directory");
                run_dir = load_config(opts).out_dir;
            }
            const auto out = experiment::run_report(run_dir, &std::cerr);
            std::cout << "chart: " << out.svg_path.string() << '\n'
                      << "tables: " << out.text_path.string() << '\n';
            return kExitOk;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
