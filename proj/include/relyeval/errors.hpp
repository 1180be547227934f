#pragma once

#include <stdexcept>
#include <string>

namespace relyeval {

// Record could not be decoded at all (bad JSON, missing/mistyped field).
// The message names the offending field.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Record decoded fine but breaks a domain invariant
// (duplicate tool name, mid-sequence final answer, ...).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller broke a precondition (e.g. indexed a non-invocation step).
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Judge backend unreachable or failing after the configured retries.
class BackendError : public std::runtime_error {
public:
    explicit BackendError(const std::string& msg) : std::runtime_error(msg) {}
};

// Backend replied, but no verdict token could be extracted even after a re-ask.
class VerdictParseError : public std::runtime_error {
public:
    explicit VerdictParseError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace relyeval
