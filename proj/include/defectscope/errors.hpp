#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace defectscope {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// num_kernel
class OutOfBounds : public Error {
public:
    using Error::Error;
};
class NoConvergence : public Error {
public:
    using Error::Error;
};

// sabr_model
class ExpansionBreakdown : public Error {
public:
    using Error::Error;
};

// defect_indicator
class TauTooSmall : public Error {
public:
    using Error::Error;
};
class NuDegenerate : public Error {
public:
    using Error::Error;
};

// market_data
class ParseError : public Error {
public:
    ParseError(std::size_t row, std::string column, const std::string& what)
        : Error("row " + std::to_string(row) + (column.empty() ? "" : ", column '" + column + "'") +
                ": " + what),
          row_(row), column_(std::move(column)) {}

    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};
class MissingMetadata : public Error {
public:
    using Error::Error;
};
class EmptyAfterFilter : public Error {
public:
    using Error::Error;
};
class NoBracketingStrikes : public Error {
public:
    using Error::Error;
};

// bayes_engine
class NoPositiveRoot : public Error {
public:
    using Error::Error;
};
class InfeasibleStart : public Error {
public:
    using Error::Error;
};
class InvalidInit : public Error {
public:
    using Error::Error;
};
class DegenerateSample : public Error {
public:
    using Error::Error;
};
class EmptyChain : public Error {
public:
    using Error::Error;
};

}  // namespace defectscope
