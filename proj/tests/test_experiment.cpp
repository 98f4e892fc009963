#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <regex>
#include <sstream>

#include "finrl_dapo/experiment.hpp"
#include "support/test_support.hpp"

using namespace finrl_dapo;
using testsupport::TempDir;
using testsupport::read_file;
using testsupport::write_file;

namespace {

struct Workspace {
    TempDir dir{"exp"};
    std::string config_path;

    // The eval window needs at least 21 days so five-percent CVaR has its
    // twenty returns.
    explicit Workspace(std::size_t days = 60, std::size_t train_days = 36,
                       std::size_t epochs = 2) {
        testsupport::SyntheticSpec spec;
        spec.days = days;
        spec.noise = 0.008;
        spec.seed = 4242;
        const auto market = testsupport::make_synthetic_market(spec);
        write_file(dir.file("prices.csv"), market.prices_csv);
        write_file(dir.file("signals.csv"), market.signals_csv);
        write_file(dir.file("bench.csv"), market.benchmark_csv);

        std::ostringstream cfg;
        cfg << "out = \"" << (dir.path() / "out").string() << "\"\n"
            << "seed = 11\n"
            << "[data]\n"
            << "prices = \"" << dir.file("prices.csv").string() << "\"\n"
            << "signals = \"" << dir.file("signals.csv").string() << "\"\n"
            << "benchmark = \"" << dir.file("bench.csv").string() << "\"\n"
            << "train_end = \"" << testsupport::date_at(train_days - 1) << "\"\n"
            << "[env]\n"
            << "initial_cash = 100000.0\n"
            << "hmax = 300\n"
            << "transaction_cost_rate = 0.0\n"
            << "[reward]\n"
            << "alpha = 1\n"
            << "beta = 1\n"
            << "[optimizer]\n"
            << "group_size = 4\n"
            << "epochs = " << epochs << "\n"
            << "learning_rate = 0.001\n"
            << "[policy]\n"
            << "hidden = [16, 16]\n"
            << "[eval]\n"
            << "start = \"" << testsupport::date_at(train_days) << "\"\n";
        config_path = dir.file("run.toml").string();
        write_file(dir.file("run.toml"), cfg.str());
    }

    config::RunConfig load(std::vector<std::string> overrides = {}) const {
        return config::RunConfig::load(config_path, overrides);
    }
};

std::string strip_wall_seconds(const std::string& tsv) {
    std::string out;
    std::stringstream ss(tsv);
    std::string line;
    while (std::getline(ss, line)) {
        const auto cut = line.rfind('\t');
        out += line.substr(0, cut);
        out += '\n';
    }
    return out;
}

}  // namespace

TEST_CASE("run_train writes checkpoint, log, summary and resolved config") {
    Workspace ws;
    const auto cfg = ws.load();
    const auto out = experiment::run_train(cfg, nullptr);
    CHECK(std::filesystem::exists(out.checkpoint_path));
    CHECK(std::filesystem::exists(out.log_path));
    CHECK(std::filesystem::exists(out.summary_path));
    CHECK(std::filesystem::exists(out.resolved_config_path));
    CHECK(out.result.log.size() == 2);

    const std::string tsv = read_file(out.log_path);
    CHECK(tsv.rfind("epoch\tmean_raw_reward\tmean_shaped_reward\tfiltered_fraction\tloss\t"
                    "wall_seconds\n", 0) == 0);
    // One header plus one row per epoch.
    CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 3);

    const auto loaded = policy::load_checkpoint(out.checkpoint_path.string());
    CHECK(loaded.params.shape.output_dim == 2);
    CHECK(loaded.normalizer.count() > 0);

    const std::string summary = read_file(out.summary_path);
    CHECK(summary.find("\"final\"") != std::string::npos);
    CHECK(summary.find("\"config_toml\"") != std::string::npos);
}

TEST_CASE("train twice with one seed: identical checkpoints and logs up to wall time") {
    Workspace ws;
    auto cfg_a = ws.load();
    cfg_a.out_dir = (ws.dir.path() / "a").string();
    auto cfg_b = ws.load();
    cfg_b.out_dir = (ws.dir.path() / "b").string();

    const auto a = experiment::run_train(cfg_a, nullptr);
    const auto b = experiment::run_train(cfg_b, nullptr);
    CHECK(read_file(a.checkpoint_path) == read_file(b.checkpoint_path));
    CHECK(strip_wall_seconds(read_file(a.log_path)) == strip_wall_seconds(read_file(b.log_path)));

    // A different seed diverges.
    auto cfg_c = ws.load({"seed=12"});
    cfg_c.out_dir = (ws.dir.path() / "c").string();
    const auto c = experiment::run_train(cfg_c, nullptr);
    CHECK(read_file(a.checkpoint_path) != read_file(c.checkpoint_path));
}

TEST_CASE("run_backtest consumes a checkpoint and emits the metric artifacts") {
    Workspace ws;
    const auto cfg = ws.load();
    const auto trained = experiment::run_train(cfg, nullptr);
    const auto tested = experiment::run_backtest(cfg, trained.checkpoint_path.string(), nullptr);

    CHECK(std::filesystem::exists(tested.equity_path));
    CHECK(std::filesystem::exists(tested.metrics_json_path));
    CHECK(std::filesystem::exists(tested.metrics_text_path));

    const std::string json = read_file(tested.metrics_json_path);
    for (const char* key :
         {"cumulative_return", "max_drawdown", "rachev_ratio", "information_ratio", "cvar_5",
          "outperformance_frequency", "generated_at"})
        CHECK(json.find(key) != std::string::npos);

    // Benchmark was supplied, so the relative metrics are real numbers.
    CHECK(tested.report.information_ratio.has_value());
    CHECK(tested.report.outperformance_frequency.has_value());

    const auto curve = experiment::read_equity_csv(tested.equity_path);
    CHECK(curve.dates.size() == 24);  // eval slice: days 36..59
    CHECK(curve.total_assets.front() == doctest::Approx(1e5));
    CHECK(curve.returns.size() == curve.dates.size() - 1);
    CHECK(curve.benchmark_returns.size() == curve.returns.size());

    // Deterministic re-run: byte-identical except the timestamp line.
    const auto again = experiment::run_backtest(cfg, trained.checkpoint_path.string(), nullptr);
    auto strip_ts = [](std::string s) {
        return std::regex_replace(s, std::regex("\"generated_at\": \"[^\"]*\""),
                                  "\"generated_at\": \"X\"");
    };
    CHECK(strip_ts(read_file(tested.metrics_json_path)) ==
          strip_ts(read_file(again.metrics_json_path)));
    CHECK(read_file(tested.equity_path) == read_file(again.equity_path));
}

TEST_CASE("run_backtest rejects a checkpoint trained for another universe") {
    Workspace ws;
    const auto cfg = ws.load();
    const auto trained = experiment::run_train(cfg, nullptr);

    // A one-ticker dataset with the same schema.
    TempDir other("exp-other");
    write_file(other.file("prices.csv"),
               "date,ticker,close\n2020-02-01,ZZZ,10\n2020-02-02,ZZZ,11\n2020-02-03,ZZZ,12\n");
    write_file(other.file("signals.csv"),
               "date,ticker,sentiment,risk\n2020-02-01,ZZZ,3,3\n");
    auto bad = cfg;
    bad.prices_path = other.file("prices.csv").string();
    bad.signals_path = other.file("signals.csv").string();
    bad.benchmark_path.clear();
    bad.train_range = {};
    bad.eval_range = {};
    CHECK_THROWS_AS(experiment::run_backtest(bad, trained.checkpoint_path.string(), nullptr),
                    ShapeMismatch);
}

TEST_CASE("run_sweep: per-pair outputs, failure isolation, comparison table") {
    Workspace ws;
    const auto cfg = ws.load();
    // (0,1) and (1,0) run; the denom_epsilon override makes no pair fail.
    const std::vector<std::pair<double, double>> grid = {{0.0, 1.0}, {1.0, 0.0}};
    const auto sweep = experiment::run_sweep(cfg, grid, nullptr);
    CHECK(sweep.succeeded == 2);
    CHECK(std::filesystem::exists(sweep.table_path));
    CHECK(std::filesystem::exists(sweep.summary_path));
    for (const auto& pair : sweep.pairs) {
        CHECK(pair.ok);
        CHECK(std::filesystem::exists(pair.dir / "equity.csv"));
        CHECK(std::filesystem::exists(pair.dir / "metrics.json"));
    }
    const std::string table = read_file(sweep.table_path);
    CHECK(table.find("alpha") != std::string::npos);
    CHECK(std::count(table.begin(), table.end(), '\n') == 3);  // header + 2 rows

    SUBCASE("empty grid is rejected") {
        CHECK_THROWS_AS(experiment::run_sweep(cfg, {}, nullptr), InvalidConfig);
    }
}

TEST_CASE("run_sweep keeps going when one pair cannot train") {
    Workspace ws;
    auto cfg = ws.load();
    // Break one pair by pointing its training range at a single day via a
    // doctored sub-config: easiest failure injection is an invalid alpha.
    const std::vector<std::pair<double, double>> grid = {{-1.0, 1.0}, {1.0, 1.0}};
    const auto sweep = experiment::run_sweep(cfg, grid, nullptr);
    CHECK(sweep.succeeded == 1);
    REQUIRE(sweep.pairs.size() == 2);
    CHECK_FALSE(sweep.pairs[0].ok);
    CHECK(sweep.pairs[0].message.find("alpha") != std::string::npos);
    CHECK(sweep.pairs[1].ok);
    const std::string table = read_file(sweep.table_path);
    CHECK(table.find("FAILED") != std::string::npos);
}

TEST_CASE("run_report overlays curves and appends sweep variants") {
    Workspace ws;
    const auto cfg = ws.load();
    const auto trained = experiment::run_train(cfg, nullptr);
    experiment::run_backtest(cfg, trained.checkpoint_path.string(), nullptr);
    experiment::run_sweep(cfg, {{0.0, 0.0}, {2.0, 2.0}}, nullptr);

    std::ostringstream diag;
    const auto report = experiment::run_report(cfg.out_dir, &diag);
    CHECK(report.curves == 3);  // root + two sweep variants
    CHECK(report.has_benchmark);
    const std::string svg = read_file(report.svg_path);
    CHECK(svg.find("<svg") != std::string::npos);
    // One polyline per curve plus the benchmark.
    std::size_t polylines = 0;
    for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos;
         pos = svg.find("<polyline", pos + 1))
        ++polylines;
    CHECK(polylines == 4);
    CHECK(svg.find("strategy") != std::string::npos);
    CHECK(svg.find("benchmark") != std::string::npos);
    CHECK(std::filesystem::exists(report.text_path));
}

TEST_CASE("run_report without curves fails; without benchmark it degrades") {
    TempDir dir("report");
    CHECK_THROWS_AS(experiment::run_report(dir.path().string(), nullptr), Error);

    // A curve with no benchmark column.
    backtest::EquityCurve curve;
    for (std::size_t i = 0; i < 5; ++i) {
        curve.dates.push_back(testsupport::date_at(i));
        curve.total_assets.push_back(1000.0 + 10.0 * static_cast<double>(i));
        if (i > 0) curve.returns.push_back(0.01);
    }
    experiment::write_equity_csv(curve, dir.file("equity.csv"));
    std::ostringstream diag;
    const auto report = experiment::run_report(dir.path().string(), &diag);
    CHECK(report.curves == 1);
    CHECK_FALSE(report.has_benchmark);
    CHECK(diag.str().find("WARN") != std::string::npos);
}

TEST_CASE("equity csv round trip") {
    backtest::EquityCurve curve;
    for (std::size_t i = 0; i < 6; ++i) {
        curve.dates.push_back(testsupport::date_at(i));
        curve.total_assets.push_back(1234.5678901234 * (1.0 + 0.017 * static_cast<double>(i)));
        if (i > 0) {
            curve.returns.push_back(curve.total_assets[i] / curve.total_assets[i - 1] - 1.0);
            curve.benchmark_returns.push_back(0.001 * static_cast<double>(i));
        }
    }
    TempDir dir("equity");
    experiment::write_equity_csv(curve, dir.file("equity.csv"));
    const auto back = experiment::read_equity_csv(dir.file("equity.csv"));
    CHECK(back.dates == curve.dates);
    CHECK(back.total_assets == curve.total_assets);  // 17 significant digits round-trip
    CHECK(back.returns == curve.returns);
    CHECK(back.benchmark_returns == curve.benchmark_returns);
}

#ifndef _WIN32
TEST_CASE("command-line tool: exit codes for the main paths") {
    const char* cli = std::getenv("FINRL_DAPO_CLI");
    REQUIRE_MESSAGE(cli != nullptr, "FINRL_DAPO_CLI must point at the binary");
    Workspace ws(60, 36, 1);

    auto run = [&](const std::string& args) {
        const std::string cmd = std::string(cli) + " " + args + " >/dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WEXITSTATUS(status);
    };

    CHECK(run("train --config " + ws.config_path + " --set optimizer.epochs=1") == 0);
    CHECK(run("backtest --config " + ws.config_path) == 0);
    CHECK(run("report --config " + ws.config_path) == 0);
    CHECK(run("sweep --config " + ws.config_path + " --grid 0,0 --grid 1,1") == 0);

    CHECK(run("train --config /nonexistent.toml") == 1);
    CHECK(run("train --config " + ws.config_path + " --set data.prices=missing.csv") == 1);
    CHECK(run("sweep --config " + ws.config_path) == 1);  // empty grid
    TempDir empty("cli-empty");
    CHECK(run("report " + empty.path().string()) == 1);
}
#endif
