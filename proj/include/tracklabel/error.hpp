#pragma once

#include <stdexcept>
#include <string>

namespace tracklabel {

// Base for every error the engine raises. Callers that only need a message
// can catch this; the subclasses let the CLI and service map failures to
// exit codes and HTTP statuses.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* kind() const noexcept { return "error"; }
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, int line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const noexcept { return line_; }
    const char* kind() const noexcept override { return "parse"; }

private:
    int line_;
};

class ConfigError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "config"; }
};

class DomainError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "domain"; }
};

class TrainingError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "training"; }
};

// Two human decisions that cannot both hold (e.g. two forced-on edges
// sharing an endpoint, or accept and reject on the same detection).
class ConflictError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "conflict"; }
};

// Stale, duplicate or otherwise out-of-protocol annotator traffic.
class ProtocolError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "protocol"; }
};

class NotFoundError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "not-found"; }
};

}  // namespace tracklabel
