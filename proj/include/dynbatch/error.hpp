#pragma once

#include <stdexcept>
#include <string>

namespace dynbatch {

/// Base for every error the library raises. `exit_code()` is what the CLI returns.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept = 0;
};

/// Bad arguments: dimension mismatches, duplicate points, malformed files.
class UsageError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// A factorization failed even after jitter escalation.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double last_jitter)
        : Error(what + " (last jitter tried: " + std::to_string(last_jitter) + ")"),
          last_jitter_(last_jitter) {}
    int exit_code() const noexcept override { return 3; }
    double last_jitter() const noexcept { return last_jitter_; }

private:
    double last_jitter_;
};

/// Ask/tell calls made out of order.
class ProtocolError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

}  // namespace dynbatch
