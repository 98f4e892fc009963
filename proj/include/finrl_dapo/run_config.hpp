#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "finrl_dapo/backtest_metrics.hpp"
#include "finrl_dapo/dapo_optimizer.hpp"
#include "finrl_dapo/errors.hpp"
#include "finrl_dapo/signal_reward.hpp"
#include "finrl_dapo/trading_env.hpp"

namespace finrl_dapo::config {

/// One parsed config value. Strings may be quoted or bare; arrays hold
/// numbers or strings.
using Value = std::variant<std::string, double, bool, std::vector<double>,
                           std::vector<std::string>>;

/// Minimal TOML-style file: `[section]` headers, `key = value` lines and
/// `#` comments. Supported values: quoted/bare strings, numbers, booleans
/// and flat arrays. Keys before any section header land in section "".
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_text(const std::string& text, const std::string& origin);

    /// Apply one `section.key=value` override (the CLI --set form).
    void set(const std::string& dotted_key, const std::string& raw_value);

    bool has(const std::string& section, const std::string& key) const;
    double number(const std::string& section, const std::string& key, double fallback) const;
    std::int64_t integer(const std::string& section, const std::string& key,
                         std::int64_t fallback) const;
    std::string text(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
    bool boolean(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> numbers(const std::string& section, const std::string& key,
                                std::vector<double> fallback) const;

private:
    const Value* find(const std::string& section, const std::string& key) const;
    std::map<std::string, std::map<std::string, Value>> sections_;
};

/// Inclusive ISO-date range; empty strings leave the side unbounded.
struct DateRange {
    std::string start;
    std::string end;
    bool empty() const { return start.empty() && end.empty(); }
};

/// Fully resolved run configuration: every knob of a train/backtest/sweep
/// run with defaults materialized.
struct RunConfig {
    // [data]
    std::string prices_path;
    std::string signals_path;
    std::string benchmark_path;  // optional
    DateRange train_range;

    // [env] / [reward] / [optimizer]
    env::EnvConfig env;
    reward::RewardConfig reward;
    dapo::OptimizerConfig optimizer;

    // [policy]
    std::vector<std::size_t> hidden = {64, 64};
    double log_std_init = -0.5;

    // [eval]
    DateRange eval_range;
    backtest::Mode eval_mode = backtest::Mode::Deterministic;
    bool annualize_ir = false;

    // top-level
    std::string out_dir = "runs/out";
    std::uint64_t seed = 42;

    /// Parse a file and apply `section.key=value` overrides, which always win
    /// over file values. `optimizer.seed` follows the top-level seed unless
    /// set explicitly.
    static RunConfig load(const std::string& path, const std::vector<std::string>& overrides);

    void validate() const;

    /// Serialize the resolved configuration back to TOML.
    std::string to_toml() const;
};

}  // namespace finrl_dapo::config
