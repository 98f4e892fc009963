#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "finrl_dapo/errors.hpp"

namespace finrl_dapo::data {

/// One row of the prices CSV. `indicators` holds the values of the optional
/// indicator columns, in header order.
struct PriceRecord {
    std::string date;   // ISO-8601 calendar day
    std::string ticker;
    double close = 0.0;  // strictly positive
    std::vector<double> indicators;
};

/// Parsed prices file: the indicator column names plus all rows in file order.
struct PriceData {
    std::vector<std::string> indicator_names;
    std::vector<PriceRecord> records;
};

/// One row of the signals CSV. Scores are discrete 1..5.
struct SignalRecord {
    std::string date;
    std::string ticker;
    int sentiment_score = 3;
    int risk_score = 3;
};

/// Dense date x ticker price frame. `close[d*tickers.size() + t]` is the close
/// of ticker t on day d; `indicators` is [date x ticker x indicator], row-major.
struct MarketFrame {
    std::vector<std::string> dates;    // strictly increasing
    std::vector<std::string> tickers;  // sorted, unique
    std::vector<std::string> indicator_names;
    std::vector<double> close;
    std::vector<double> indicators;

    std::size_t num_days() const { return dates.size(); }
    std::size_t num_tickers() const { return tickers.size(); }
    std::size_t num_indicators() const { return indicator_names.size(); }

    double close_at(std::size_t day, std::size_t ticker) const {
        return close[day * tickers.size() + ticker];
    }
    double indicator_at(std::size_t day, std::size_t ticker, std::size_t k) const {
        return indicators[(day * tickers.size() + ticker) * indicator_names.size() + k];
    }
};

/// Dense date x ticker signal frame mirroring a MarketFrame's axes.
/// All entries lie in {1..5}.
struct SignalFrame {
    std::vector<std::string> dates;
    std::vector<std::string> tickers;
    std::vector<int> sentiment;
    std::vector<int> risk;

    std::size_t num_days() const { return dates.size(); }
    std::size_t num_tickers() const { return tickers.size(); }

    int sentiment_at(std::size_t day, std::size_t ticker) const {
        return sentiment[day * tickers.size() + ticker];
    }
    int risk_at(std::size_t day, std::size_t ticker) const {
        return risk[day * tickers.size() + ticker];
    }
};

/// Gap-filling knobs for align(). Defaults implement the documented behavior:
/// price gaps forward-filled, signal gaps set to the neutral score.
struct FillPolicy {
    int neutral_score = 3;
};

/// Parse a prices CSV with header `date,ticker,close[,<indicator names...>]`.
/// Row order is preserved. Throws MissingColumn, MalformedRow,
/// NonPositivePrice, DuplicateKey.
PriceData parse_prices(const std::string& path);

/// Parse a signals CSV with header `date,ticker,sentiment,risk`.
/// Throws MissingColumn, MalformedRow, ScoreOutOfRange.
std::vector<SignalRecord> parse_signals(const std::string& path);

/// Align parsed records into dense frames sharing identical date/ticker axes.
///
/// The ticker axis is the intersection of the tickers present in both inputs;
/// the date axis is the price-file trading calendar clipped to the date range
/// covered by both files. Price gaps are forward-filled; tickers without a
/// price on the first aligned day are dropped and reported. Signal gaps take
/// the neutral score; duplicate signal rows keep the last one.
///
/// Warnings go to `diag` (one line each, prefixed "WARN:") when non-null.
/// Throws EmptyIntersection when nothing survives.
std::pair<MarketFrame, SignalFrame> align(const PriceData& prices,
                                          const std::vector<SignalRecord>& signals,
                                          const FillPolicy& policy = {},
                                          std::ostream* diag = nullptr);

/// Restrict both frames to the inclusive [start, end] date window; empty
/// strings leave that side unbounded. Throws EmptyIntersection when no day
/// survives.
std::pair<MarketFrame, SignalFrame> slice(const MarketFrame& market, const SignalFrame& signals,
                                          const std::string& start, const std::string& end);

}  // namespace finrl_dapo::data
