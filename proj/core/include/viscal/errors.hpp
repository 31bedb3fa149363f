#pragma once

#include <stdexcept>
#include <string>

namespace viscal {

/// Invalid law or model parameters (non-positive shape, scale, ...).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the support or admissible range of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Input file could not be parsed; carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Row parses but violates the archive schema (e.g. partially missing ensemble).
class SchemaError : public ParseError {
public:
    using ParseError::ParseError;
};

/// Operation requires ensemble members that are absent for this case.
class MissingForecastError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Beta moments with sd^2 >= mean*(x_max-mean) have no beta law.
class InfeasibleMomentsError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Link functions produced a non-positive gamma mean/variance or normal scale.
class InfeasibleLinkError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Parameter estimation failed or was refused.
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Score is not defined for the given forecast type (e.g. LogS of an ensemble).
class UnsupportedScoreError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace viscal
