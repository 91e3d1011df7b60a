#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace patchprobe {

/// Base class for every error the library reports.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or ill-typed expression (width mismatch, bad operand kind).
class ExprError : public Error {
public:
    using Error::Error;
};

/// Text input that fails to parse. Line and column are 1-based; a column of 0
/// means the whole line.
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& what)
        : Error(format(line, column, what)), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(std::size_t line, std::size_t column, const std::string& what) {
        std::string out = "line " + std::to_string(line);
        if (column != 0) out += ", column " + std::to_string(column);
        return out + ": " + what;
    }

    std::size_t line_;
    std::size_t column_;
};

/// The x86 lifter met something it cannot translate.
class LiftError : public Error {
public:
    using Error::Error;
};

/// A function named by a signature file is absent from the target.
class MissingFunctionError : public Error {
public:
    explicit MissingFunctionError(const std::string& name)
        : Error("target has no function named '" + name + "'"), name_(name) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

} // namespace patchprobe
