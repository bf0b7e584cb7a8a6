#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cxrssl {

/// Root of every error the toolkit raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration values or unknown keys.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Tensor or grid dimensions that do not fit the operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Manifest, image or split problems.
class DataError : public Error {
public:
    using Error::Error;
};

/// Text document that failed to parse; carries the 1-based line number.
class ParseError : public DataError {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Checkpoints and other persisted artifacts that are missing, corrupt or of the wrong version.
class ArtifactError : public Error {
public:
    using Error::Error;
};

/// Non-finite losses and similar numeric breakdowns.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Metric that is undefined for the given input (e.g. AUC with a single class).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

}  // namespace cxrssl
