#include "finrl_dapo/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace finrl_dapo::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string strip_comment(const std::string& line) {
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_quote = !in_quote;
        if (line[i] == '#' && !in_quote) return line.substr(0, i);
    }
    return line;
}

bool try_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    try {
        std::size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

Value parse_scalar(const std::string& raw, const std::string& origin, std::size_t line_no) {
    const std::string t = trim(raw);
    if (t.empty())
        throw InvalidConfig(origin + ":" + std::to_string(line_no) + ": empty value");
    if (t.size() >= 2 && t.front() == '"' && t.back() == '"') return t.substr(1, t.size() - 2);
    if (t == "true") return true;
    if (t == "false") return false;
    if (double num = 0.0; try_number(t, num)) return num;
    return t;  // bare string
}

Value parse_value(const std::string& raw, const std::string& origin, std::size_t line_no) {
    const std::string t = trim(raw);
    if (!t.empty() && t.front() == '[') {
        if (t.back() != ']')
            throw InvalidConfig(origin + ":" + std::to_string(line_no) + ": unterminated array");
        std::vector<double> nums;
        std::vector<std::string> strs;
        bool numeric = true;
        std::string inner = t.substr(1, t.size() - 2);
        std::stringstream ss(inner);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string e = trim(item);
            if (e.empty()) continue;
            Value v = parse_scalar(e, origin, line_no);
            if (std::holds_alternative<double>(v)) {
                nums.push_back(std::get<double>(v));
                strs.push_back(e);
            } else {
                numeric = false;
                strs.push_back(std::holds_alternative<std::string>(v) ? std::get<std::string>(v)
                                                                      : e);
            }
        }
        if (numeric) return nums;
        return strs;
    }
    return parse_scalar(t, origin, line_no);
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_text(buffer.str(), path);
}

ConfigFile ConfigFile::parse_text(const std::string& text, const std::string& origin) {
    ConfigFile cfg;
    std::stringstream ss(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const std::string body = trim(strip_comment(line));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']')
                throw InvalidConfig(origin + ":" + std::to_string(line_no) +
                                    ": unterminated section header");
            section = trim(body.substr(1, body.size() - 2));
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw InvalidConfig(origin + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(body.substr(0, eq));
        if (key.empty())
            throw InvalidConfig(origin + ":" + std::to_string(line_no) + ": empty key");
        cfg.sections_[section][key] = parse_value(body.substr(eq + 1), origin, line_no);
    }
    return cfg;
}

void ConfigFile::set(const std::string& dotted_key, const std::string& raw_value) {
    const auto dot = dotted_key.find('.');
    const std::string section = dot == std::string::npos ? "" : dotted_key.substr(0, dot);
    const std::string key = dot == std::string::npos ? dotted_key : dotted_key.substr(dot + 1);
    if (key.empty()) throw InvalidConfig("--set: empty key in '" + dotted_key + "'");
    sections_[section][key] = parse_value(raw_value, "--set " + dotted_key, 0);
}

const Value* ConfigFile::find(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    return &k->second;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

double ConfigFile::number(const std::string& section, const std::string& key,
                          double fallback) const {
    const Value* v = find(section, key);
    if (v == nullptr) return fallback;
    if (const double* d = std::get_if<double>(v)) return *d;
    throw InvalidConfig("[" + section + "] " + key + " must be a number");
}

std::int64_t ConfigFile::integer(const std::string& section, const std::string& key,
                                 std::int64_t fallback) const {
    const double d = number(section, key, static_cast<double>(fallback));
    const auto i = static_cast<std::int64_t>(std::llround(d));
    if (static_cast<double>(i) != d)
        throw InvalidConfig("[" + section + "] " + key + " must be an integer");
    return i;
}

std::string ConfigFile::text(const std::string& section, const std::string& key,
                             const std::string& fallback) const {
    const Value* v = find(section, key);
    if (v == nullptr) return fallback;
    if (const std::string* s = std::get_if<std::string>(v)) return *s;
    throw InvalidConfig("[" + section + "] " + key + " must be a string");
}

bool ConfigFile::boolean(const std::string& section, const std::string& key, bool fallback) const {
    const Value* v = find(section, key);
    if (v == nullptr) return fallback;
    if (const bool* b = std::get_if<bool>(v)) return *b;
    throw InvalidConfig("[" + section + "] " + key + " must be true or false");
}

std::vector<double> ConfigFile::numbers(const std::string& section, const std::string& key,
                                        std::vector<double> fallback) const {
    const Value* v = find(section, key);
    if (v == nullptr) return fallback;
    if (const auto* a = std::get_if<std::vector<double>>(v)) return *a;
    if (const double* d = std::get_if<double>(v)) return {*d};
    throw InvalidConfig("[" + section + "] " + key + " must be a numeric array");
}

RunConfig RunConfig::load(const std::string& path, const std::vector<std::string>& overrides) {
    ConfigFile file = ConfigFile::parse_file(path);
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw InvalidConfig("--set expects section.key=value, got '" + ov + "'");
        file.set(trim(ov.substr(0, eq)), ov.substr(eq + 1));
    }

    RunConfig cfg;
    cfg.prices_path = file.text("data", "prices", "");
    cfg.signals_path = file.text("data", "signals", "");
    cfg.benchmark_path = file.text("data", "benchmark", "");
    cfg.train_range.start = file.text("data", "train_start", "");
    cfg.train_range.end = file.text("data", "train_end", "");

    cfg.env.initial_cash = file.number("env", "initial_cash", cfg.env.initial_cash);
    cfg.env.hmax = file.integer("env", "hmax", cfg.env.hmax);
    cfg.env.transaction_cost_rate =
        file.number("env", "transaction_cost_rate", cfg.env.transaction_cost_rate);
    cfg.env.reward_scale = file.number("env", "reward_scale", cfg.env.reward_scale);

    cfg.reward.alpha = file.number("reward", "alpha", cfg.reward.alpha);
    cfg.reward.beta = file.number("reward", "beta", cfg.reward.beta);
    cfg.reward.denom_epsilon = file.number("reward", "denom_epsilon", cfg.reward.denom_epsilon);
    cfg.reward.pre_trade_weights =
        file.boolean("reward", "pre_trade_weights", cfg.reward.pre_trade_weights);

    cfg.optimizer.group_size = static_cast<std::size_t>(
        file.integer("optimizer", "group_size", static_cast<std::int64_t>(cfg.optimizer.group_size)));
    cfg.optimizer.adv_epsilon = file.number("optimizer", "adv_epsilon", cfg.optimizer.adv_epsilon);
    cfg.optimizer.eps_low = file.number("optimizer", "eps_low", cfg.optimizer.eps_low);
    cfg.optimizer.eps_high = file.number("optimizer", "eps_high", cfg.optimizer.eps_high);
    cfg.optimizer.learning_rate =
        file.number("optimizer", "learning_rate", cfg.optimizer.learning_rate);
    cfg.optimizer.epochs = static_cast<std::size_t>(
        file.integer("optimizer", "epochs", static_cast<std::int64_t>(cfg.optimizer.epochs)));
    cfg.optimizer.steps_per_epoch = static_cast<std::size_t>(file.integer(
        "optimizer", "steps_per_epoch", static_cast<std::int64_t>(cfg.optimizer.steps_per_epoch)));
    cfg.optimizer.minibatch_groups = static_cast<std::size_t>(file.integer(
        "optimizer", "minibatch_groups", static_cast<std::int64_t>(cfg.optimizer.minibatch_groups)));

    const auto hidden = file.numbers("policy", "hidden", {64.0, 64.0});
    cfg.hidden.clear();
    for (double h : hidden) {
        if (h < 1.0) throw InvalidConfig("[policy] hidden sizes must be >= 1");
        cfg.hidden.push_back(static_cast<std::size_t>(h));
    }
    cfg.log_std_init = file.number("policy", "log_std_init", cfg.log_std_init);

    cfg.eval_range.start = file.text("eval", "start", "");
    cfg.eval_range.end = file.text("eval", "end", "");
    const std::string mode = file.text("eval", "mode", "deterministic");
    if (mode == "deterministic") {
        cfg.eval_mode = backtest::Mode::Deterministic;
    } else if (mode == "stochastic") {
        cfg.eval_mode = backtest::Mode::Stochastic;
    } else {
        throw InvalidConfig("[eval] mode must be deterministic or stochastic");
    }
    cfg.annualize_ir = file.boolean("eval", "annualize_ir", cfg.annualize_ir);

    cfg.out_dir = file.text("", "out", cfg.out_dir);
    cfg.seed = static_cast<std::uint64_t>(
        file.integer("", "seed", static_cast<std::int64_t>(cfg.seed)));
    // The optimizer draws from the run seed unless pinned separately.
    cfg.optimizer.seed = static_cast<std::uint64_t>(file.integer(
        "optimizer", "seed", static_cast<std::int64_t>(cfg.seed)));

    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    if (prices_path.empty()) throw InvalidConfig("[data] prices is required");
    if (signals_path.empty()) throw InvalidConfig("[data] signals is required");
    env.validate();
    reward.validate();
    optimizer.validate();
    if (hidden.empty()) throw InvalidConfig("[policy] hidden must name at least one layer");
    if (!train_range.empty() && !eval_range.empty()) {
        const std::string t_start = train_range.start.empty() ? "0000-00-00" : train_range.start;
        const std::string t_end = train_range.end.empty() ? "9999-99-99" : train_range.end;
        const std::string e_start = eval_range.start.empty() ? "0000-00-00" : eval_range.start;
        const std::string e_end = eval_range.end.empty() ? "9999-99-99" : eval_range.end;
        if (t_start <= e_end && e_start <= t_end)
            throw InvalidConfig("train and eval date ranges overlap");
    }
}

std::string RunConfig::to_toml() const {
    std::ostringstream out;
    out.precision(17);
    auto str = [](const std::string& s) { return '"' + s + '"'; };
    out << "out = " << str(out_dir) << '\n';
    out << "seed = " << seed << "\n\n";
    out << "[data]\n";
    out << "prices = " << str(prices_path) << '\n';
    out << "signals = " << str(signals_path) << '\n';
    if (!benchmark_path.empty()) out << "benchmark = " << str(benchmark_path) << '\n';
    if (!train_range.start.empty()) out << "train_start = " << str(train_range.start) << '\n';
    if (!train_range.end.empty()) out << "train_end = " << str(train_range.end) << '\n';
    out << "\n[env]\n";
    out << "initial_cash = " << env.initial_cash << '\n';
    out << "hmax = " << env.hmax << '\n';
    out << "transaction_cost_rate = " << env.transaction_cost_rate << '\n';
    out << "reward_scale = " << env.reward_scale << '\n';
    out << "\n[reward]\n";
    out << "alpha = " << reward.alpha << '\n';
    out << "beta = " << reward.beta << '\n';
    out << "denom_epsilon = " << reward.denom_epsilon << '\n';
    out << "pre_trade_weights = " << (reward.pre_trade_weights ? "true" : "false") << '\n';
    out << "\n[optimizer]\n";
    out << "group_size = " << optimizer.group_size << '\n';
    out << "adv_epsilon = " << optimizer.adv_epsilon << '\n';
    out << "eps_low = " << optimizer.eps_low << '\n';
    out << "eps_high = " << optimizer.eps_high << '\n';
    out << "learning_rate = " << optimizer.learning_rate << '\n';
    out << "epochs = " << optimizer.epochs << '\n';
    out << "steps_per_epoch = " << optimizer.steps_per_epoch << '\n';
    out << "minibatch_groups = " << optimizer.minibatch_groups << '\n';
    out << "seed = " << optimizer.seed << '\n';
    out << "\n[policy]\n";
    out << "hidden = [";
    for (std::size_t i = 0; i < hidden.size(); ++i) out << (i ? ", " : "") << hidden[i];
    out << "]\n";
    out << "log_std_init = " << log_std_init << '\n';
    out << "\n[eval]\n";
    if (!eval_range.start.empty()) out << "start = " << str(eval_range.start) << '\n';
    if (!eval_range.end.empty()) out << "end = " << str(eval_range.end) << '\n';
    out << "mode = "
        << str(eval_mode == backtest::Mode::Deterministic ? "deterministic" : "stochastic")
        << '\n';
    out << "annualize_ir = " << (annualize_ir ? "true" : "false") << '\n';
    return out.str();
}

}  // namespace finrl_dapo::config
