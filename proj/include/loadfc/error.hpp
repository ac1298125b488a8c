#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace loadfc {

enum class ErrorKind {
    Parse,
    Ordering,
    Quality,
    Coverage,
    Statistic,
    Standardization,
    EmptyMatrix,
    Horizon,
    Config,
    Data,
    Schema,
    Version,
    Partition,
    Calendar,
    Alignment,
    Optimization,
    Span,
    Policy,
    Metric,
    InsufficientData,
    Io,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Ordering: return "ordering";
    case ErrorKind::Quality: return "quality";
    case ErrorKind::Coverage: return "coverage";
    case ErrorKind::Statistic: return "statistic";
    case ErrorKind::Standardization: return "standardization";
    case ErrorKind::EmptyMatrix: return "empty-matrix";
    case ErrorKind::Horizon: return "horizon";
    case ErrorKind::Config: return "config";
    case ErrorKind::Data: return "data";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Version: return "version";
    case ErrorKind::Partition: return "partition";
    case ErrorKind::Calendar: return "calendar";
    case ErrorKind::Alignment: return "alignment";
    case ErrorKind::Optimization: return "optimization";
    case ErrorKind::Span: return "span";
    case ErrorKind::Policy: return "policy";
    case ErrorKind::Metric: return "metric";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

/// Every failure raised by the library. `kind()` identifies the error class so
/// callers (and tests) can branch without parsing the message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind), detail_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// Message without the "<kind> error: " prefix.
    const std::string& detail() const noexcept { return detail_; }

    /// Same kind, message prefixed with `context`.
    Error with_context(const std::string& context) const { return Error(kind_, context + ": " + detail_); }

private:
    ErrorKind kind_;
    std::string detail_;
};

/// Error annotated with the consumer and pipeline stage it came from.
class StageError : public Error {
public:
    StageError(const Error& cause, std::string consumer_id, std::string stage)
        : Error(cause.kind(), "consumer '" + consumer_id + "' at stage '" + stage + "': " + cause.detail()),
          consumer_id_(std::move(consumer_id)), stage_(std::move(stage)) {}

    const std::string& consumer_id() const noexcept { return consumer_id_; }
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string consumer_id_;
    std::string stage_;
};

} // namespace loadfc
