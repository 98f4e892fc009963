#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace finrl_dapo {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// ---- data_ingest ----

class MissingColumn : public Error {
public:
    explicit MissingColumn(const std::string& column, const std::string& path)
        : Error("missing required column '" + column + "' in " + path), column_(column) {}
    const std::string& column() const { return column_; }

private:
    std::string column_;
};

class MalformedRow : public Error {
public:
    MalformedRow(std::size_t line, const std::string& detail)
        : Error("malformed row at line " + std::to_string(line) + ": " + detail), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class NonPositivePrice : public Error {
public:
    NonPositivePrice(std::size_t line, double value)
        : Error("non-positive close price " + std::to_string(value) + " at line " +
                std::to_string(line)),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class DuplicateKey : public Error {
public:
    DuplicateKey(const std::string& date, const std::string& ticker)
        : Error("duplicate (date,ticker) key: (" + date + "," + ticker + ")") {}
};

class ScoreOutOfRange : public Error {
public:
    explicit ScoreOutOfRange(std::size_t line, int value)
        : Error("score " + std::to_string(value) + " outside {1..5} at line " +
                std::to_string(line)),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class EmptyIntersection : public Error {
public:
    explicit EmptyIntersection(const std::string& detail)
        : Error("no common dates/tickers survive alignment: " + detail) {}
};

// ---- trading_env ----

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& detail) : Error("shape mismatch: " + detail) {}
};

class EpisodeFinished : public Error {
public:
    EpisodeFinished() : Error("episode already reached the final day") {}
};

class InvalidConfig : public Error {
public:
    explicit InvalidConfig(const std::string& detail) : Error("invalid config: " + detail) {}
};

class InvalidAction : public Error {
public:
    explicit InvalidAction(const std::string& detail) : Error("invalid action: " + detail) {}
};

// ---- signal_reward ----

class EmptyUniverse : public Error {
public:
    EmptyUniverse() : Error("signal aggregation over an empty ticker universe") {}
};

// ---- policy_net ----

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& detail)
        : Error("dimension mismatch: " + detail) {}
};

class ActionOnBoundary : public Error {
public:
    ActionOnBoundary() : Error("action component on the squash boundary |x| = 1") {}
};

class CheckpointError : public Error {
public:
    explicit CheckpointError(const std::string& detail) : Error("checkpoint: " + detail) {}
};

// ---- dapo_optimizer ----

class AllFiltered : public Error {
public:
    AllFiltered() : Error("dynamic sampling filtered every group of the epoch") {}
};

class NonFiniteLoss : public Error {
public:
    explicit NonFiniteLoss(const std::string& detail) : Error("non-finite loss: " + detail) {}
};

// ---- backtest_metrics ----

class InsufficientData : public Error {
public:
    explicit InsufficientData(const std::string& detail) : Error("insufficient data: " + detail) {}
};

class ZeroLossTail : public Error {
public:
    ZeroLossTail() : Error("lower tail has no losses; Rachev ratio undefined") {}
};

class ZeroTrackingError : public Error {
public:
    ZeroTrackingError() : Error("excess returns have zero variance; IR undefined") {}
};

}  // namespace finrl_dapo
