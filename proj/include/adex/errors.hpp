#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace adex {

// Domain error with a stable machine-readable code alongside the message.
// ValidationError maps to client mistakes (bad input, malformed documents);
// ConflictError maps to state-machine violations and duplicate resources.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

private:
    std::string code_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

}  // namespace adex
