#include "finrl_dapo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "finrl_dapo/svg_chart.hpp"

namespace finrl_dapo::experiment {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string format_double(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
    if (!out) throw Error("write failed: " + path.string());
}

std::pair<data::MarketFrame, data::SignalFrame> sliced(const LoadedData& loaded,
                                                       const config::DateRange& range) {
    if (range.empty()) return {loaded.market, loaded.signals};
    return data::slice(loaded.market, loaded.signals, range.start, range.end);
}

json metrics_to_json(const backtest::MetricsReport& r) {
    json j;
    j["cumulative_return"] = r.cumulative_return;
    j["max_drawdown"] = r.max_drawdown;
    j["rachev_ratio"] = r.rachev_ratio;
    if (r.information_ratio) {
        j["information_ratio"] = *r.information_ratio;
        j["information_ratio_annualized"] = *r.information_ratio_annualized;
    } else {
        j["information_ratio"] = nullptr;
        j["information_ratio_annualized"] = nullptr;
    }
    j["cvar_5"] = r.cvar_5;
    if (r.outperformance_frequency) {
        j["outperformance_frequency"] = *r.outperformance_frequency;
    } else {
        j["outperformance_frequency"] = nullptr;
    }
    return j;
}

std::string trim_number(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

std::size_t thread_cap() {
    if (const char* env = std::getenv("FINRL_DAPO_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<std::size_t>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace

LoadedData load_data(const config::RunConfig& cfg, std::ostream* diag) {
    LoadedData out;
    const auto prices = data::parse_prices(cfg.prices_path);
    const auto signals = data::parse_signals(cfg.signals_path);
    std::tie(out.market, out.signals) = data::align(prices, signals, {}, diag);
    if (!cfg.benchmark_path.empty()) out.benchmark = data::parse_prices(cfg.benchmark_path);
    return out;
}

TrainOutcome run_train(const config::RunConfig& cfg, std::ostream* diag) {
    cfg.validate();
    const LoadedData loaded = load_data(cfg, diag);
    auto [market, signals] = sliced(loaded, cfg.train_range);

    policy::PolicyShape shape;
    shape.input_dim = env::observation_dim(market);
    shape.hidden = cfg.hidden;
    shape.output_dim = market.num_tickers();

    policy::Policy initial;
    initial.params = policy::init_params(shape, cfg.seed, cfg.log_std_init);
    initial.normalizer = policy::ObsNormalizer(shape.input_dim);

    const auto t0 = std::chrono::steady_clock::now();
    dapo::TrainResult result = dapo::train(market, signals, cfg.env, cfg.reward, cfg.optimizer,
                                           std::move(initial), diag);
    const double wall_total =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    TrainOutcome out;
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    out.checkpoint_path = dir / "checkpoint.bin";
    out.log_path = dir / "training_log.tsv";
    out.summary_path = dir / "run_summary.json";
    out.resolved_config_path = dir / "resolved_config.toml";

    policy::save_checkpoint(result.policy, out.checkpoint_path.string());

    std::ostringstream tsv;
    tsv << "epoch\tmean_raw_reward\tmean_shaped_reward\tfiltered_fraction\tloss\twall_seconds\n";
    for (const auto& row : result.log) {
        tsv << row.epoch << '\t' << format_double(row.mean_raw_reward) << '\t'
            << format_double(row.mean_shaped_reward) << '\t'
            << format_double(row.filtered_fraction) << '\t' << format_double(row.loss) << '\t'
            << format_double(row.wall_seconds) << '\n';
    }
    write_file(out.log_path, tsv.str());

    json summary;
    summary["command"] = "train";
    summary["generated_at"] = timestamp_utc();
    summary["epochs_run"] = result.log.size();
    summary["wall_seconds_total"] = wall_total;
    if (!result.log.empty()) {
        const auto& last = result.log.back();
        summary["final"] = {{"mean_raw_reward", last.mean_raw_reward},
                            {"mean_shaped_reward", last.mean_shaped_reward},
                            {"filtered_fraction", last.filtered_fraction},
                            {"loss", last.loss}};
    } else {
        summary["final"] = nullptr;
    }
    summary["universe"] = {{"tickers", market.tickers},
                           {"days", market.num_days()},
                           {"first_date", market.dates.front()},
                           {"last_date", market.dates.back()}};
    summary["config_toml"] = cfg.to_toml();
    write_file(out.summary_path, summary.dump(2) + "\n");
    write_file(out.resolved_config_path, cfg.to_toml());

    out.result = std::move(result);
    return out;
}

BacktestOutcome run_backtest(const config::RunConfig& cfg, const std::string& checkpoint_path,
                             std::ostream* diag) {
    cfg.validate();
    const LoadedData loaded = load_data(cfg, diag);
    auto [market, signals] = sliced(loaded, cfg.eval_range);

    policy::Policy policy = policy::load_checkpoint(checkpoint_path);
    if (policy.params.shape.input_dim != env::observation_dim(market) ||
        policy.params.shape.output_dim != market.num_tickers())
        throw ShapeMismatch("checkpoint was trained for a different universe: expects " +
                            std::to_string(policy.params.shape.output_dim) + " tickers / " +
                            std::to_string(policy.params.shape.input_dim) + " features, data has " +
                            std::to_string(market.num_tickers()) + " tickers / " +
                            std::to_string(env::observation_dim(market)) + " features");

    BacktestOutcome out;
    out.curve = backtest::run_backtest(policy, market, signals, cfg.env, cfg.eval_mode, cfg.seed);
    if (loaded.benchmark) backtest::attach_benchmark(out.curve, *loaded.benchmark, diag);
    out.report = backtest::compute_metrics(out.curve);

    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    out.equity_path = dir / "equity.csv";
    out.metrics_json_path = dir / "metrics.json";
    out.metrics_text_path = dir / "metrics.txt";

    write_equity_csv(out.curve, out.equity_path);

    json j;
    j["metrics"] = metrics_to_json(out.report);
    j["metadata"] = {
        {"checkpoint", checkpoint_path},
        {"mode",
         cfg.eval_mode == backtest::Mode::Deterministic ? "deterministic" : "stochastic"},
        {"seed", cfg.seed},
        {"first_date", out.curve.dates.front()},
        {"last_date", out.curve.dates.back()},
        {"days", out.curve.dates.size()},
        {"annualize_ir", cfg.annualize_ir},
        {"generated_at", timestamp_utc()},
    };
    write_file(out.metrics_json_path, j.dump(2) + "\n");
    write_file(out.metrics_text_path,
               backtest::format_metrics_table(out.report, "Backtest " +
                                                              out.curve.dates.front() + " .. " +
                                                              out.curve.dates.back()));
    return out;
}

SweepOutcome run_sweep(const config::RunConfig& cfg,
                       const std::vector<std::pair<double, double>>& grid, std::ostream* diag) {
    if (grid.empty()) throw InvalidConfig("sweep grid is empty");
    cfg.validate();

    SweepOutcome out;
    out.pairs.resize(grid.size());
    const fs::path sweep_root = fs::path(cfg.out_dir) / "sweep";
    fs::create_directories(sweep_root);

    std::mutex diag_mutex;
    std::atomic<std::size_t> next{0};
    const std::size_t workers = std::min(thread_cap(), grid.size());

    auto worker = [&]() {
        for (std::size_t i = next.fetch_add(1); i < grid.size(); i = next.fetch_add(1)) {
            SweepPair& pair = out.pairs[i];
            pair.alpha = grid[i].first;
            pair.beta = grid[i].second;
            config::RunConfig sub = cfg;
            sub.reward.alpha = pair.alpha;
            sub.reward.beta = pair.beta;
            sub.out_dir = (sweep_root / ("alpha" + trim_number(pair.alpha) + "_beta" +
                                         trim_number(pair.beta)))
                              .string();
            pair.dir = sub.out_dir;
            try {
                const auto trained = run_train(sub, nullptr);
                const auto tested =
                    run_backtest(sub, trained.checkpoint_path.string(), nullptr);
                pair.report = tested.report;
                pair.ok = true;
            } catch (const std::exception& e) {
                pair.ok = false;
                pair.message = e.what();
            }
            if (diag != nullptr) {
                std::lock_guard<std::mutex> lock(diag_mutex);
                *diag << "sweep (alpha=" << pair.alpha << ", beta=" << pair.beta << "): "
                      << (pair.ok ? "ok" : std::string("FAILED: ") + pair.message) << '\n';
            }
        }
    };

    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    std::ostringstream table;
    table << "alpha   beta    cum_return  max_drawdown  rachev  info_ratio  cvar_5  "
             "outperf_freq\n";
    json summary = json::array();
    for (const auto& pair : out.pairs) {
        json row;
        row["alpha"] = pair.alpha;
        row["beta"] = pair.beta;
        row["ok"] = pair.ok;
        table << std::left << std::setw(8) << trim_number(pair.alpha) << std::setw(8)
              << trim_number(pair.beta);
        if (pair.ok) {
            ++out.succeeded;
            const auto& r = pair.report;
            auto cell = [](double v) {
                std::ostringstream s;
                s.setf(std::ios::fixed);
                s.precision(4);
                s << v;
                return s.str();
            };
            table << std::setw(12) << cell(r.cumulative_return) << std::setw(14)
                  << cell(r.max_drawdown) << std::setw(8) << cell(r.rachev_ratio) << std::setw(12)
                  << (r.information_ratio ? cell(*r.information_ratio) : "n/a") << std::setw(8)
                  << cell(r.cvar_5)
                  << (r.outperformance_frequency ? cell(*r.outperformance_frequency) : "n/a")
                  << '\n';
            row["metrics"] = metrics_to_json(r);
        } else {
            table << "FAILED: " << pair.message << '\n';
            row["error"] = pair.message;
        }
        summary.push_back(row);
    }

    out.table_path = sweep_root / "sweep_table.txt";
    out.summary_path = sweep_root / "sweep_summary.json";
    write_file(out.table_path, table.str());
    write_file(out.summary_path, summary.dump(2) + "\n");
    if (diag != nullptr) *diag << table.str();
    return out;
}

void write_equity_csv(const backtest::EquityCurve& curve, const fs::path& path) {
    std::ostringstream out;
    out << "date,total_assets,return,benchmark_return\n";
    for (std::size_t t = 0; t < curve.dates.size(); ++t) {
        out << curve.dates[t] << ',' << format_double(curve.total_assets[t]) << ',';
        if (t > 0) out << format_double(curve.returns[t - 1]);
        out << ',';
        if (t > 0 && !curve.benchmark_returns.empty())
            out << format_double(curve.benchmark_returns[t - 1]);
        out << '\n';
    }
    write_file(path, out.str());
}

backtest::EquityCurve read_equity_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    backtest::EquityCurve curve;
    std::string line;
    if (!std::getline(in, line)) throw Error("empty equity csv: " + path.string());
    bool any_benchmark = false;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string date, assets, ret, bench;
        std::getline(ss, date, ',');
        std::getline(ss, assets, ',');
        std::getline(ss, ret, ',');
        std::getline(ss, bench, ',');
        if (date.empty() || assets.empty()) throw MalformedRow(line_no, "equity csv row");
        curve.dates.push_back(date);
        curve.total_assets.push_back(std::stod(assets));
        if (!ret.empty()) curve.returns.push_back(std::stod(ret));
        if (!bench.empty()) {
            curve.benchmark_returns.push_back(std::stod(bench));
            any_benchmark = true;
        }
    }
    if (!any_benchmark) curve.benchmark_returns.clear();
    return curve;
}

ReportOutcome run_report(const std::string& run_dir, std::ostream* diag) {
    const fs::path root(run_dir);
    if (!fs::exists(root)) throw Error("run directory does not exist: " + run_dir);

    std::vector<std::pair<std::string, fs::path>> found;
    if (fs::exists(root / "equity.csv")) found.emplace_back("strategy", root / "equity.csv");
    const fs::path sweep_root = root / "sweep";
    if (fs::exists(sweep_root)) {
        std::vector<fs::path> subdirs;
        for (const auto& entry : fs::directory_iterator(sweep_root)) {
            if (entry.is_directory() && fs::exists(entry.path() / "equity.csv"))
                subdirs.push_back(entry.path());
        }
        std::sort(subdirs.begin(), subdirs.end());
        for (const auto& dir : subdirs)
            found.emplace_back(dir.filename().string(), dir / "equity.csv");
    }
    if (found.empty()) throw Error("no equity curves found under " + run_dir);

    ReportOutcome out;
    out.curves = found.size();

    std::vector<chart::Series> series;
    std::vector<std::string> x_labels;
    std::ostringstream text;
    std::optional<std::vector<double>> benchmark_cum;
    for (const auto& [label, path] : found) {
        const auto curve = read_equity_csv(path);
        chart::Series s;
        s.label = label;
        s.values.reserve(curve.total_assets.size());
        for (double v : curve.total_assets) s.values.push_back(v / curve.total_assets.front() - 1.0);
        if (curve.dates.size() > x_labels.size()) x_labels = curve.dates;
        series.push_back(std::move(s));
        try {
            text << backtest::format_metrics_table(backtest::compute_metrics(curve), label)
                 << '\n';
        } catch (const Error& e) {
            text << label << ": metrics unavailable (" << e.what() << ")\n\n";
        }
        if (!benchmark_cum && !curve.benchmark_returns.empty()) {
            std::vector<double> cum{0.0};
            double acc = 1.0;
            for (double r : curve.benchmark_returns) {
                acc *= 1.0 + r;
                cum.push_back(acc - 1.0);
            }
            benchmark_cum = std::move(cum);
        }
    }
    if (benchmark_cum) {
        series.push_back({"benchmark", *benchmark_cum});
        out.has_benchmark = true;
    } else if (diag != nullptr) {
        *diag << "WARN: no benchmark series found; chart omits the benchmark\n";
    }

    const std::string svg = chart::render_line_chart(series, x_labels, "Cumulative return",
                                                     "cumulative return");
    out.svg_path = root / "report.svg";
    out.text_path = root / "report.txt";
    write_file(out.svg_path, svg);
    write_file(out.text_path, text.str());
    return out;
}

}  // namespace finrl_dapo::experiment
