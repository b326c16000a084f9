#pragma once

#include <stdexcept>
#include <string>

namespace argmine {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A required input (file, version, model component) does not exist.
class MissingInputError : public Error {
public:
    using Error::Error;
};

// Input exists but violates a documented precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Network or IO failure while reading a comment source.
class SourceError : public Error {
public:
    SourceError(const std::string& source, const std::string& what, bool retryable)
        : Error(source + ": " + what), source_(source), retryable_(retryable) {}

    const std::string& source() const noexcept { return source_; }
    bool retryable() const noexcept { return retryable_; }

private:
    std::string source_;
    bool retryable_;
};

class GrammarError : public Error {
public:
    GrammarError(const std::string& what, int line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

} // namespace argmine
