#pragma once

#include <stdexcept>
#include <string>

namespace vgiq {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration or invalid parameter values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Problems with input data: parse failures, dangling references, duplicates.
class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& column, const std::string& what)
        : DataError(file + ":" + std::to_string(line) + ": column '" + column + "': " + what),
          line_(line), column_(column) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] const std::string& column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::string column_;
};

class ReferentialError : public DataError {
public:
    using DataError::DataError;
};

class DuplicateError : public DataError {
public:
    using DataError::DataError;
};

class EmptyDataset : public DataError {
public:
    using DataError::DataError;
};

class TooFewStations : public DataError {
public:
    using DataError::DataError;
};

class KTooLarge : public DataError {
public:
    using DataError::DataError;
};

class EmptyErrors : public DataError {
public:
    using DataError::DataError;
};

/// Numerical failure: the Gram matrix could not be factorized.
class CholeskyFailure : public Error {
public:
    CholeskyFailure(const std::string& what, double last_jitter, double min_diagonal, double max_diagonal)
        : Error(what), last_jitter_(last_jitter), min_diagonal_(min_diagonal), max_diagonal_(max_diagonal) {}

    [[nodiscard]] double last_jitter() const noexcept { return last_jitter_; }
    [[nodiscard]] double min_diagonal() const noexcept { return min_diagonal_; }
    [[nodiscard]] double max_diagonal() const noexcept { return max_diagonal_; }

private:
    double last_jitter_;
    double min_diagonal_;
    double max_diagonal_;
};

}  // namespace vgiq
