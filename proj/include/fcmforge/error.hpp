#pragma once

#include <stdexcept>
#include <string>

namespace fcmforge {

// Category drives CLI exit codes and HTTP status mapping.
enum class ErrorKind {
    validation,   // invariant or input-contract violation
    backend,      // LLM transport or unusable LLM output
    degenerate,   // structurally empty or singular beyond recovery
    io,           // missing files, unreadable artifacts
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

struct BackendError : Error {
    explicit BackendError(const std::string& what) : Error(ErrorKind::backend, what) {}
};

struct DegenerateError : Error {
    explicit DegenerateError(const std::string& what) : Error(ErrorKind::degenerate, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

}  // namespace fcmforge
