#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <random>

#include "finrl_dapo/backtest_metrics.hpp"
#include "finrl_dapo/dapo_optimizer.hpp"
#include "finrl_dapo/data_ingest.hpp"
#include "finrl_dapo/errors.hpp"
#include "finrl_dapo/experiment.hpp"
#include "finrl_dapo/policy_net.hpp"
#include "finrl_dapo/run_config.hpp"
#include "finrl_dapo/signal_reward.hpp"
#include "finrl_dapo/trading_env.hpp"

namespace py = pybind11;
using namespace finrl_dapo;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Group-relative policy optimization for multi-asset trading: data alignment, "
              "trading environment, sentiment-risk reward shaping, decoupled-clip optimizer "
              "and backtest metrics.";

    py::register_exception<Error>(m, "FinrlDapoError", PyExc_RuntimeError);

    // ---- data ----
    py::class_<data::PriceRecord>(m, "PriceRecord")
        .def(py::init<>())
        .def_readwrite("date", &data::PriceRecord::date)
        .def_readwrite("ticker", &data::PriceRecord::ticker)
        .def_readwrite("close", &data::PriceRecord::close)
        .def_readwrite("indicators", &data::PriceRecord::indicators);
    py::class_<data::PriceData>(m, "PriceData")
        .def(py::init<>())
        .def_readwrite("indicator_names", &data::PriceData::indicator_names)
        .def_readwrite("records", &data::PriceData::records);
    py::class_<data::SignalRecord>(m, "SignalRecord")
        .def(py::init<>())
        .def_readwrite("date", &data::SignalRecord::date)
        .def_readwrite("ticker", &data::SignalRecord::ticker)
        .def_readwrite("sentiment_score", &data::SignalRecord::sentiment_score)
        .def_readwrite("risk_score", &data::SignalRecord::risk_score);
    py::class_<data::MarketFrame>(m, "MarketFrame")
        .def_readonly("dates", &data::MarketFrame::dates)
        .def_readonly("tickers", &data::MarketFrame::tickers)
        .def_readonly("indicator_names", &data::MarketFrame::indicator_names)
        .def("close_at", &data::MarketFrame::close_at)
        .def("indicator_at", &data::MarketFrame::indicator_at)
        .def("num_days", &data::MarketFrame::num_days)
        .def("num_tickers", &data::MarketFrame::num_tickers);
    py::class_<data::SignalFrame>(m, "SignalFrame")
        .def_readonly("dates", &data::SignalFrame::dates)
        .def_readonly("tickers", &data::SignalFrame::tickers)
        .def("sentiment_at", &data::SignalFrame::sentiment_at)
        .def("risk_at", &data::SignalFrame::risk_at);
    m.def("parse_prices", &data::parse_prices, py::arg("path"));
    m.def("parse_signals", &data::parse_signals, py::arg("path"));
    m.def(
        "align",
        [](const data::PriceData& prices, const std::vector<data::SignalRecord>& signals,
           int neutral_score) {
            return data::align(prices, signals, {neutral_score}, nullptr);
        },
        py::arg("prices"), py::arg("signals"), py::arg("neutral_score") = 3);
    m.def("slice_frames", &data::slice, py::arg("market"), py::arg("signals"), py::arg("start"),
          py::arg("end"));

    // ---- environment ----
    py::class_<env::EnvConfig>(m, "EnvConfig")
        .def(py::init<>())
        .def_readwrite("initial_cash", &env::EnvConfig::initial_cash)
        .def_readwrite("hmax", &env::EnvConfig::hmax)
        .def_readwrite("transaction_cost_rate", &env::EnvConfig::transaction_cost_rate)
        .def_readwrite("reward_scale", &env::EnvConfig::reward_scale)
        .def_readwrite("tickers", &env::EnvConfig::tickers);
    py::class_<env::EnvState>(m, "EnvState")
        .def_readonly("day_index", &env::EnvState::day_index)
        .def_readonly("cash", &env::EnvState::cash)
        .def_readonly("holdings", &env::EnvState::holdings)
        .def_readonly("prices", &env::EnvState::prices)
        .def_readonly("sentiment_feat", &env::EnvState::sentiment_feat)
        .def_readonly("risk_feat", &env::EnvState::risk_feat)
        .def("total_assets", &env::EnvState::total_assets);
    py::class_<env::StepOutcome>(m, "StepOutcome")
        .def_readonly("next_state", &env::StepOutcome::next_state)
        .def_readonly("raw_reward", &env::StepOutcome::raw_reward)
        .def_readonly("portfolio_return", &env::StepOutcome::portfolio_return)
        .def_readonly("done", &env::StepOutcome::done);
    m.def("env_reset", &env::reset, py::arg("market"), py::arg("signals"), py::arg("config"));
    m.def("env_step", &env::step, py::arg("state"), py::arg("action"), py::arg("market"),
          py::arg("signals"), py::arg("config"));
    m.def(
        "env_peek_group",
        [](const env::EnvState& state, const std::vector<env::ActionVector>& actions,
           const data::MarketFrame& market, const data::SignalFrame& signals,
           const env::EnvConfig& config) {
            return env::peek_group(state, actions, market, signals, config);
        },
        py::arg("state"), py::arg("actions"), py::arg("market"), py::arg("signals"),
        py::arg("config"));
    m.def("observation_dim", &env::observation_dim);
    m.def("flatten_observation", &env::flatten_observation);

    // ---- reward shaping ----
    py::class_<reward::RewardConfig>(m, "RewardConfig")
        .def(py::init<>())
        .def_readwrite("alpha", &reward::RewardConfig::alpha)
        .def_readwrite("beta", &reward::RewardConfig::beta)
        .def_readwrite("denom_epsilon", &reward::RewardConfig::denom_epsilon)
        .def_readwrite("pre_trade_weights", &reward::RewardConfig::pre_trade_weights);
    py::class_<reward::SignalAggregate>(m, "SignalAggregate")
        .def(py::init<>())
        .def_readwrite("S", &reward::SignalAggregate::S)
        .def_readwrite("R", &reward::SignalAggregate::R)
        .def_readwrite("weights", &reward::SignalAggregate::weights);
    m.def("score_to_factor", &reward::score_to_factor, py::arg("score"));
    m.def(
        "aggregate_signals",
        [](const std::vector<double>& holdings_value, const std::vector<int>& sentiment,
           const std::vector<int>& risk) { return reward::aggregate(holdings_value, sentiment, risk); },
        py::arg("holdings_value"), py::arg("sentiment"), py::arg("risk"));
    m.def("shape_reward", &reward::shape_reward, py::arg("raw"), py::arg("aggregate"),
          py::arg("config"));

    // ---- policy ----
    py::class_<policy::PolicyShape>(m, "PolicyShape")
        .def(py::init<>())
        .def_readwrite("input_dim", &policy::PolicyShape::input_dim)
        .def_readwrite("hidden", &policy::PolicyShape::hidden)
        .def_readwrite("output_dim", &policy::PolicyShape::output_dim)
        .def("param_count", &policy::PolicyShape::param_count);
    py::class_<policy::PolicyParams>(m, "PolicyParams")
        .def_readwrite("shape", &policy::PolicyParams::shape)
        .def_readwrite("value", &policy::PolicyParams::value);
    py::class_<policy::ObsNormalizer>(m, "ObsNormalizer")
        .def(py::init<std::size_t>(), py::arg("dim"))
        .def("update",
             [](policy::ObsNormalizer& n, const std::vector<double>& obs) { n.update(obs); })
        .def("normalize", [](const policy::ObsNormalizer& n, const std::vector<double>& obs) {
            return n.normalize(obs);
        })
        .def_property_readonly("count", &policy::ObsNormalizer::count);
    py::class_<policy::Policy>(m, "Policy")
        .def(py::init<>())
        .def_readwrite("params", &policy::Policy::params)
        .def_readwrite("normalizer", &policy::Policy::normalizer);
    m.def("init_params", &policy::init_params, py::arg("shape"), py::arg("seed"),
          py::arg("log_std_init") = -0.5);
    m.def(
        "policy_forward",
        [](const policy::PolicyParams& params, const std::vector<double>& obs) {
            const auto head = policy::forward(params, obs);
            return py::make_tuple(head.mean, head.std);
        },
        py::arg("params"), py::arg("obs"));
    m.def(
        "sample_group",
        [](const policy::PolicyParams& params, const std::vector<double>& obs, std::size_t n,
           std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            return policy::sample_group(params, obs, n, rng);
        },
        py::arg("params"), py::arg("obs"), py::arg("n"), py::arg("seed"));
    m.def(
        "log_prob",
        [](const policy::PolicyParams& params, const std::vector<double>& obs,
           const env::ActionVector& action) { return policy::log_prob(params, obs, action); },
        py::arg("params"), py::arg("obs"), py::arg("action"));
    m.def(
        "grad_log_prob",
        [](const policy::PolicyParams& params, const std::vector<double>& obs,
           const env::ActionVector& action) { return policy::grad_log_prob(params, obs, action); },
        py::arg("params"), py::arg("obs"), py::arg("action"));
    m.def("save_checkpoint", &policy::save_checkpoint, py::arg("policy"), py::arg("path"));
    m.def("load_checkpoint", &policy::load_checkpoint, py::arg("path"));

    // ---- optimizer ----
    py::class_<dapo::OptimizerConfig>(m, "OptimizerConfig")
        .def(py::init<>())
        .def_readwrite("group_size", &dapo::OptimizerConfig::group_size)
        .def_readwrite("adv_epsilon", &dapo::OptimizerConfig::adv_epsilon)
        .def_readwrite("eps_low", &dapo::OptimizerConfig::eps_low)
        .def_readwrite("eps_high", &dapo::OptimizerConfig::eps_high)
        .def_readwrite("learning_rate", &dapo::OptimizerConfig::learning_rate)
        .def_readwrite("epochs", &dapo::OptimizerConfig::epochs)
        .def_readwrite("steps_per_epoch", &dapo::OptimizerConfig::steps_per_epoch)
        .def_readwrite("minibatch_groups", &dapo::OptimizerConfig::minibatch_groups)
        .def_readwrite("seed", &dapo::OptimizerConfig::seed);
    py::class_<dapo::GroupSample>(m, "GroupSample")
        .def(py::init<>())
        .def_readwrite("obs", &dapo::GroupSample::obs)
        .def_readwrite("actions", &dapo::GroupSample::actions)
        .def_readwrite("raw_rewards", &dapo::GroupSample::raw_rewards)
        .def_readwrite("shaped_rewards", &dapo::GroupSample::shaped_rewards)
        .def_readwrite("old_log_probs", &dapo::GroupSample::old_log_probs)
        .def_readwrite("advantages", &dapo::GroupSample::advantages)
        .def_readwrite("kept", &dapo::GroupSample::kept);
    py::class_<dapo::LossResult>(m, "LossResult")
        .def_readonly("loss", &dapo::LossResult::loss)
        .def_readonly("grad", &dapo::LossResult::grad)
        .def_readonly("ratios", &dapo::LossResult::ratios)
        .def_readonly("terms", &dapo::LossResult::terms);
    py::class_<dapo::EpochStats>(m, "EpochStats")
        .def_readonly("epoch", &dapo::EpochStats::epoch)
        .def_readonly("mean_raw_reward", &dapo::EpochStats::mean_raw_reward)
        .def_readonly("mean_shaped_reward", &dapo::EpochStats::mean_shaped_reward)
        .def_readonly("filtered_fraction", &dapo::EpochStats::filtered_fraction)
        .def_readonly("loss", &dapo::EpochStats::loss)
        .def_readonly("wall_seconds", &dapo::EpochStats::wall_seconds);
    py::class_<dapo::TrainResult>(m, "TrainResult")
        .def_readonly("policy", &dapo::TrainResult::policy)
        .def_readonly("log", &dapo::TrainResult::log);
    m.def(
        "group_advantage",
        [](const std::vector<double>& rewards, double adv_epsilon) {
            return dapo::group_advantage(rewards, adv_epsilon);
        },
        py::arg("rewards"), py::arg("adv_epsilon") = 1e-8);
    m.def(
        "uniform_rewards",
        [](const std::vector<double>& rewards) { return dapo::uniform_rewards(rewards); },
        py::arg("rewards"));
    m.def("dynamic_filter", &dapo::dynamic_filter, py::arg("groups"));
    m.def("clipped_surrogate_term", &dapo::clipped_surrogate_term, py::arg("ratio"),
          py::arg("advantage"), py::arg("eps_low"), py::arg("eps_high"));
    m.def(
        "dapo_loss",
        [](const policy::PolicyParams& params, const std::vector<dapo::GroupSample>& batch,
           const dapo::OptimizerConfig& cfg) { return dapo::dapo_loss(params, batch, cfg); },
        py::arg("params"), py::arg("batch"), py::arg("config"));
    m.def("sgd_update", &dapo::sgd_update, py::arg("params"), py::arg("grad"),
          py::arg("learning_rate"));
    m.def(
        "train",
        [](const data::MarketFrame& market, const data::SignalFrame& signals,
           const env::EnvConfig& env_cfg, const reward::RewardConfig& reward_cfg,
           const dapo::OptimizerConfig& opt_cfg, const policy::Policy& initial) {
            return dapo::train(market, signals, env_cfg, reward_cfg, opt_cfg, initial, nullptr);
        },
        py::arg("market"), py::arg("signals"), py::arg("env_config"), py::arg("reward_config"),
        py::arg("optimizer_config"), py::arg("initial_policy"));

    // ---- backtest ----
    py::enum_<backtest::Mode>(m, "Mode")
        .value("Deterministic", backtest::Mode::Deterministic)
        .value("Stochastic", backtest::Mode::Stochastic);
    py::class_<backtest::EquityCurve>(m, "EquityCurve")
        .def(py::init<>())
        .def_readwrite("dates", &backtest::EquityCurve::dates)
        .def_readwrite("total_assets", &backtest::EquityCurve::total_assets)
        .def_readwrite("returns", &backtest::EquityCurve::returns)
        .def_readwrite("benchmark_returns", &backtest::EquityCurve::benchmark_returns);
    py::class_<backtest::MetricsReport>(m, "MetricsReport")
        .def_readonly("cumulative_return", &backtest::MetricsReport::cumulative_return)
        .def_readonly("max_drawdown", &backtest::MetricsReport::max_drawdown)
        .def_readonly("rachev_ratio", &backtest::MetricsReport::rachev_ratio)
        .def_readonly("information_ratio", &backtest::MetricsReport::information_ratio)
        .def_readonly("information_ratio_annualized",
                      &backtest::MetricsReport::information_ratio_annualized)
        .def_readonly("cvar_5", &backtest::MetricsReport::cvar_5)
        .def_readonly("outperformance_frequency",
                      &backtest::MetricsReport::outperformance_frequency);
    m.def("run_backtest", &backtest::run_backtest, py::arg("policy"), py::arg("market"),
          py::arg("signals"), py::arg("config"), py::arg("mode") = backtest::Mode::Deterministic,
          py::arg("seed") = 0);
    m.def("cumulative_return", py::overload_cast<const backtest::EquityCurve&>(
                                   &backtest::cumulative_return));
    m.def("max_drawdown",
          [](const std::vector<double>& assets) { return backtest::max_drawdown(assets); });
    m.def(
        "cvar", [](const std::vector<double>& r, double level) { return backtest::cvar(r, level); },
        py::arg("returns"), py::arg("level") = 0.05);
    m.def(
        "rachev_ratio",
        [](const std::vector<double>& r, double tail) { return backtest::rachev_ratio(r, tail); },
        py::arg("returns"), py::arg("tail") = 0.05);
    m.def(
        "information_ratio",
        [](const std::vector<double>& r, const std::vector<double>& b, bool annualize) {
            return backtest::information_ratio(r, b, annualize);
        },
        py::arg("returns"), py::arg("benchmark_returns"), py::arg("annualize") = false);
    m.def(
        "outperformance_frequency",
        [](const std::vector<double>& r, const std::vector<double>& b) {
            return backtest::outperformance_frequency(r, b);
        },
        py::arg("returns"), py::arg("benchmark_returns"));
    m.def("compute_metrics", &backtest::compute_metrics, py::arg("curve"),
          py::arg("cvar_level") = 0.05, py::arg("rachev_tail") = 0.05);
    m.def("format_metrics_table", &backtest::format_metrics_table, py::arg("report"),
          py::arg("title"));

    // ---- experiment drivers ----
    py::class_<config::RunConfig>(m, "RunConfig")
        .def_static(
            "load",
            [](const std::string& path, const std::vector<std::string>& overrides) {
                return config::RunConfig::load(path, overrides);
            },
            py::arg("path"), py::arg("overrides") = std::vector<std::string>{})
        .def_readwrite("out_dir", &config::RunConfig::out_dir)
        .def_readwrite("seed", &config::RunConfig::seed)
        .def_readwrite("env", &config::RunConfig::env)
        .def_readwrite("reward", &config::RunConfig::reward)
        .def_readwrite("optimizer", &config::RunConfig::optimizer)
        .def("to_toml", &config::RunConfig::to_toml);
    m.def(
        "run_train",
        [](const config::RunConfig& cfg) {
            const auto out = experiment::run_train(cfg, nullptr);
            return py::make_tuple(out.checkpoint_path.string(), out.log_path.string(),
                                  out.summary_path.string());
        },
        py::arg("config"));
    m.def(
        "run_backtest_cmd",
        [](const config::RunConfig& cfg, const std::string& checkpoint) {
            const auto out = experiment::run_backtest(cfg, checkpoint, nullptr);
            return py::make_tuple(out.report, out.equity_path.string(),
                                  out.metrics_json_path.string());
        },
        py::arg("config"), py::arg("checkpoint"));

    m.attr("__version__") = "0.1.0";
}
