#pragma once

#include <stdexcept>
#include <string>

namespace iml {

enum class ErrorKind {
    InvalidInput,
    IndexOutOfRange,
    Precondition,
    NonIntegralDegree,
    SpectrumMismatch,
    RankBudgetExceeded,
    InconsistentCandidate,
    FlagDegenerate,
    SingularGauge,
    NonFuchsianGauge,
    NonTermination,
    GeometryTooTight,
    StepUnderflow,
    ConfigurationCollision,
    ChartExit,
    OrderingCutCrossed,
};

const char* to_string(ErrorKind kind);

/// True for kinds that mean "the input was malformed or violates a precondition"
/// (CLI exit code 2); the rest are numerical failures (exit code 3).
bool is_validation_error(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace iml
