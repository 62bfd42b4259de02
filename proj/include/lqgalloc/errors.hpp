#pragma once

#include <stdexcept>
#include <string>

namespace lqgalloc {

// Failure taxonomy shared by the numerical solvers. Callers that can recover
// (e.g. the capacity sweep, the arbitrage check) catch SolverError and inspect
// the code; everything else lets it propagate.
class SolverError : public std::runtime_error {
  public:
    enum class Code {
        NotStabilizable,
        NotDetectable,
        RNotInvertible,
        NoStabilizingSolution,
        MaxIterExceeded,
        UnstableA,
        UnstableClosedLoop,
        ConvergenceFailure,
        FactorizationFailure,
    };

    SolverError(Code code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    Code code() const { return code_; }

    static const char* code_name(Code c) {
        switch (c) {
            case Code::NotStabilizable: return "NotStabilizable";
            case Code::NotDetectable: return "NotDetectable";
            case Code::RNotInvertible: return "RNotInvertible";
            case Code::NoStabilizingSolution: return "NoStabilizingSolution";
            case Code::MaxIterExceeded: return "MaxIterExceeded";
            case Code::UnstableA: return "UnstableA";
            case Code::UnstableClosedLoop: return "UnstableClosedLoop";
            case Code::ConvergenceFailure: return "ConvergenceFailure";
            case Code::FactorizationFailure: return "FactorizationFailure";
        }
        return "Unknown";
    }

  private:
    Code code_;
};

// Configuration / input validation problems. `field` names the offending key
// so CLI diagnostics can point at it.
class ConfigError : public std::runtime_error {
  public:
    ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(field) {}

    const std::string& field() const { return field_; }

  private:
    std::string field_;
};

} // namespace lqgalloc
