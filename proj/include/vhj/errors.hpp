#pragma once

#include <stdexcept>
#include <string>

namespace vhj {

// Base for every error the library reports; `kind()` is a short stable tag
// used in CLI payloads and JSON diagnostics.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct ParameterError : Error {
    explicit ParameterError(const std::string& w) : Error("parameter", w) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& w) : Error("domain", w) {}
};

// A Hamiltonian does not have the single-crossing structure the two-well
// and multi-well formulas assume.
struct StructureError : Error {
    explicit StructureError(const std::string& w) : Error("structure", w) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error("config", w) {}
};

struct NumericError : Error {
    NumericError(const std::string& w, long step)
        : Error("numeric", w + " (step " + std::to_string(step) + ")"), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

struct IterationError : Error {
    explicit IterationError(const std::string& w) : Error("iteration", w) {}
};

struct RootNotBracketedError : Error {
    explicit RootNotBracketedError(const std::string& w) : Error("root-not-bracketed", w) {}
};

struct PreconditionError : Error {
    explicit PreconditionError(const std::string& w) : Error("precondition", w) {}
};

}  // namespace vhj
