#include "finrl_dapo/data_ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

namespace finrl_dapo::data {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool is_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    int month = (s[5] - '0') * 10 + (s[6] - '0');
    int day = (s[8] - '0') * 10 + (s[9] - '0');
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

double parse_double(const std::string& s, std::size_t line) {
    const std::string t = trim(s);
    if (t.empty()) throw MalformedRow(line, "empty numeric field");
    try {
        std::size_t pos = 0;
        double v = std::stod(t, &pos);
        if (pos != t.size()) throw MalformedRow(line, "trailing characters in number '" + t + "'");
        return v;
    } catch (const MalformedRow&) {
        throw;
    } catch (const std::exception&) {
        throw MalformedRow(line, "not a number: '" + t + "'");
    }
}

int parse_score(const std::string& s, std::size_t line) {
    const std::string t = trim(s);
    int value = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size())
        throw MalformedRow(line, "not an integer score: '" + t + "'");
    if (value < 1 || value > 5) throw ScoreOutOfRange(line, value);
    return value;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::size_t require_column(const std::vector<std::string>& header, const std::string& name,
                           const std::string& path) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        std::string h = header[i];
        std::transform(h.begin(), h.end(), h.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (h == name) return i;
    }
    throw MissingColumn(name, path);
}

void warn(std::ostream* diag, const std::string& message) {
    if (diag != nullptr) *diag << "WARN: " << message << '\n';
}

}  // namespace

PriceData parse_prices(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw Error("empty prices file: " + path);

    const auto header = split_csv(lines[0]);
    const std::size_t date_col = require_column(header, "date", path);
    const std::size_t ticker_col = require_column(header, "ticker", path);
    const std::size_t close_col = require_column(header, "close", path);

    PriceData out;
    std::set<std::size_t> reserved{date_col, ticker_col, close_col};
    std::vector<std::size_t> indicator_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (reserved.count(i) == 0 && !header[i].empty()) {
            indicator_cols.push_back(i);
            out.indicator_names.push_back(header[i]);
        }
    }

    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty()) continue;
        const std::size_t line_no = li + 1;
        const auto fields = split_csv(lines[li]);
        if (fields.size() < header.size())
            throw MalformedRow(line_no, "expected " + std::to_string(header.size()) +
                                            " fields, got " + std::to_string(fields.size()));
        PriceRecord rec;
        rec.date = fields[date_col];
        rec.ticker = fields[ticker_col];
        if (!is_iso_date(rec.date)) throw MalformedRow(line_no, "bad date '" + rec.date + "'");
        if (rec.ticker.empty()) throw MalformedRow(line_no, "empty ticker");
        rec.close = parse_double(fields[close_col], line_no);
        if (rec.close <= 0.0) throw NonPositivePrice(line_no, rec.close);
        for (std::size_t c : indicator_cols) rec.indicators.push_back(parse_double(fields[c], line_no));
        if (!seen.insert({rec.date, rec.ticker}).second) throw DuplicateKey(rec.date, rec.ticker);
        out.records.push_back(std::move(rec));
    }
    return out;
}

std::vector<SignalRecord> parse_signals(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw Error("empty signals file: " + path);

    const auto header = split_csv(lines[0]);
    const std::size_t date_col = require_column(header, "date", path);
    const std::size_t ticker_col = require_column(header, "ticker", path);
    const std::size_t sent_col = require_column(header, "sentiment", path);
    const std::size_t risk_col = require_column(header, "risk", path);

    std::vector<SignalRecord> out;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty()) continue;
        const std::size_t line_no = li + 1;
        const auto fields = split_csv(lines[li]);
        if (fields.size() < header.size())
            throw MalformedRow(line_no, "expected " + std::to_string(header.size()) +
                                            " fields, got " + std::to_string(fields.size()));
        SignalRecord rec;
        rec.date = fields[date_col];
        rec.ticker = fields[ticker_col];
        if (!is_iso_date(rec.date)) throw MalformedRow(line_no, "bad date '" + rec.date + "'");
        if (rec.ticker.empty()) throw MalformedRow(line_no, "empty ticker");
        rec.sentiment_score = parse_score(fields[sent_col], line_no);
        rec.risk_score = parse_score(fields[risk_col], line_no);
        out.push_back(std::move(rec));
    }
    return out;
}

std::pair<MarketFrame, SignalFrame> align(const PriceData& prices,
                                          const std::vector<SignalRecord>& signals,
                                          const FillPolicy& policy,
                                          std::ostream* diag) {
    if (policy.neutral_score < 1 || policy.neutral_score > 5)
        throw InvalidConfig("neutral_score must lie in {1..5}");

    std::set<std::string> price_tickers;
    std::set<std::string> signal_tickers;
    for (const auto& r : prices.records) price_tickers.insert(r.ticker);
    for (const auto& r : signals) signal_tickers.insert(r.ticker);

    std::vector<std::string> tickers;
    std::set_intersection(price_tickers.begin(), price_tickers.end(), signal_tickers.begin(),
                          signal_tickers.end(), std::back_inserter(tickers));
    if (tickers.empty()) throw EmptyIntersection("ticker sets do not overlap");

    // Date axis: the price file's trading calendar, clipped to the range
    // covered by both files.
    std::string price_lo, price_hi, signal_lo, signal_hi;
    for (const auto& r : prices.records) {
        if (price_lo.empty() || r.date < price_lo) price_lo = r.date;
        if (price_hi.empty() || r.date > price_hi) price_hi = r.date;
    }
    for (const auto& r : signals) {
        if (signal_lo.empty() || r.date < signal_lo) signal_lo = r.date;
        if (signal_hi.empty() || r.date > signal_hi) signal_hi = r.date;
    }
    const std::string lo = std::max(price_lo, signal_lo);
    const std::string hi = std::min(price_hi, signal_hi);

    std::set<std::string> date_set;
    for (const auto& r : prices.records) {
        if (r.date >= lo && r.date <= hi) date_set.insert(r.date);
    }
    if (date_set.empty()) throw EmptyIntersection("date ranges do not overlap");
    std::vector<std::string> dates(date_set.begin(), date_set.end());

    const std::size_t k = prices.indicator_names.size();
    std::map<std::string, std::size_t> date_index;
    for (std::size_t d = 0; d < dates.size(); ++d) date_index[dates[d]] = d;
    std::map<std::string, std::size_t> ticker_index;
    for (std::size_t t = 0; t < tickers.size(); ++t) ticker_index[tickers[t]] = t;

    // Sparse scatter of price rows, then per-ticker forward fill.
    const double kMissing = -1.0;  // close > 0 always, so -1 marks a gap
    std::vector<double> close(dates.size() * tickers.size(), kMissing);
    std::vector<double> indicators(dates.size() * tickers.size() * k, 0.0);
    std::vector<char> has_price(dates.size() * tickers.size(), 0);
    for (const auto& r : prices.records) {
        auto di = date_index.find(r.date);
        auto ti = ticker_index.find(r.ticker);
        if (di == date_index.end() || ti == ticker_index.end()) continue;
        if (r.indicators.size() != k)
            throw ShapeMismatch("price row for (" + r.date + "," + r.ticker + ") carries " +
                                std::to_string(r.indicators.size()) + " indicators, header names " +
                                std::to_string(k));
        const std::size_t cell = di->second * tickers.size() + ti->second;
        close[cell] = r.close;
        has_price[cell] = 1;
        for (std::size_t j = 0; j < k; ++j) indicators[cell * k + j] = r.indicators[j];
    }

    std::vector<std::string> kept;
    std::vector<std::size_t> kept_cols;
    for (std::size_t t = 0; t < tickers.size(); ++t) {
        if (!has_price[t]) {
            warn(diag, "dropping ticker " + tickers[t] + ": no price on first aligned day " +
                           dates.front());
            continue;
        }
        kept.push_back(tickers[t]);
        kept_cols.push_back(t);
    }
    if (kept.empty()) throw EmptyIntersection("every ticker lacks a price on the first day");

    MarketFrame market;
    market.dates = dates;
    market.tickers = kept;
    market.indicator_names = prices.indicator_names;
    market.close.resize(dates.size() * kept.size());
    market.indicators.resize(dates.size() * kept.size() * k);

    std::size_t filled_gaps = 0;
    for (std::size_t tc = 0; tc < kept_cols.size(); ++tc) {
        const std::size_t t = kept_cols[tc];
        double last_close = 0.0;
        std::vector<double> last_ind(k, 0.0);
        for (std::size_t d = 0; d < dates.size(); ++d) {
            const std::size_t cell = d * tickers.size() + t;
            if (has_price[cell]) {
                last_close = close[cell];
                for (std::size_t j = 0; j < k; ++j) last_ind[j] = indicators[cell * k + j];
            } else {
                ++filled_gaps;
            }
            const std::size_t out_cell = d * kept.size() + tc;
            market.close[out_cell] = last_close;
            for (std::size_t j = 0; j < k; ++j) market.indicators[out_cell * k + j] = last_ind[j];
        }
    }
    if (filled_gaps > 0)
        warn(diag, "forward-filled " + std::to_string(filled_gaps) + " missing price cells");

    SignalFrame frame;
    frame.dates = dates;
    frame.tickers = kept;
    frame.sentiment.assign(dates.size() * kept.size(), policy.neutral_score);
    frame.risk.assign(dates.size() * kept.size(), policy.neutral_score);

    std::map<std::string, std::size_t> kept_index;
    for (std::size_t t = 0; t < kept.size(); ++t) kept_index[kept[t]] = t;
    std::set<std::pair<std::string, std::string>> seen_signal;
    for (const auto& r : signals) {
        auto di = date_index.find(r.date);
        auto ti = kept_index.find(r.ticker);
        if (di == date_index.end() || ti == kept_index.end()) continue;
        if (!seen_signal.insert({r.date, r.ticker}).second)
            warn(diag, "duplicate signal row for (" + r.date + "," + r.ticker +
                           "); keeping the last one");
        const std::size_t cell = di->second * kept.size() + ti->second;
        frame.sentiment[cell] = r.sentiment_score;
        frame.risk[cell] = r.risk_score;
    }

    return {std::move(market), std::move(frame)};
}

std::pair<MarketFrame, SignalFrame> slice(const MarketFrame& market, const SignalFrame& signals,
                                          const std::string& start, const std::string& end) {
    if (market.dates != signals.dates || market.tickers != signals.tickers)
        throw ShapeMismatch("slice: frames have different axes");
    std::size_t lo = 0;
    std::size_t hi = market.dates.size();
    while (lo < hi && !start.empty() && market.dates[lo] < start) ++lo;
    while (hi > lo && !end.empty() && market.dates[hi - 1] > end) --hi;
    if (lo >= hi) throw EmptyIntersection("no trading days inside [" + start + ", " + end + "]");

    const std::size_t m = market.num_tickers();
    const std::size_t k = market.num_indicators();
    MarketFrame mkt;
    mkt.tickers = market.tickers;
    mkt.indicator_names = market.indicator_names;
    mkt.dates.assign(market.dates.begin() + static_cast<std::ptrdiff_t>(lo),
                     market.dates.begin() + static_cast<std::ptrdiff_t>(hi));
    mkt.close.assign(market.close.begin() + static_cast<std::ptrdiff_t>(lo * m),
                     market.close.begin() + static_cast<std::ptrdiff_t>(hi * m));
    mkt.indicators.assign(market.indicators.begin() + static_cast<std::ptrdiff_t>(lo * m * k),
                          market.indicators.begin() + static_cast<std::ptrdiff_t>(hi * m * k));

    SignalFrame sig;
    sig.tickers = signals.tickers;
    sig.dates = mkt.dates;
    sig.sentiment.assign(signals.sentiment.begin() + static_cast<std::ptrdiff_t>(lo * m),
                         signals.sentiment.begin() + static_cast<std::ptrdiff_t>(hi * m));
    sig.risk.assign(signals.risk.begin() + static_cast<std::ptrdiff_t>(lo * m),
                    signals.risk.begin() + static_cast<std::ptrdiff_t>(hi * m));
    return {std::move(mkt), std::move(sig)};
}

}  // namespace finrl_dapo::data
