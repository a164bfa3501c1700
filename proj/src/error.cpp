#include "iml/error.hpp"

namespace iml {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "InvalidInput";
        case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorKind::Precondition: return "Precondition";
        case ErrorKind::NonIntegralDegree: return "NonIntegralDegree";
        case ErrorKind::SpectrumMismatch: return "SpectrumMismatch";
        case ErrorKind::RankBudgetExceeded: return "RankBudgetExceeded";
        case ErrorKind::InconsistentCandidate: return "InconsistentCandidate";
        case ErrorKind::FlagDegenerate: return "FlagDegenerate";
        case ErrorKind::SingularGauge: return "SingularGauge";
        case ErrorKind::NonFuchsianGauge: return "NonFuchsianGauge";
        case ErrorKind::NonTermination: return "NonTermination";
        case ErrorKind::GeometryTooTight: return "GeometryTooTight";
        case ErrorKind::StepUnderflow: return "StepUnderflow";
        case ErrorKind::ConfigurationCollision: return "ConfigurationCollision";
        case ErrorKind::ChartExit: return "ChartExit";
        case ErrorKind::OrderingCutCrossed: return "OrderingCutCrossed";
    }
    return "Unknown";
}

bool is_validation_error(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput:
        case ErrorKind::IndexOutOfRange:
        case ErrorKind::Precondition:
        case ErrorKind::NonIntegralDegree:
        case ErrorKind::SpectrumMismatch:
        case ErrorKind::InconsistentCandidate:
        case ErrorKind::ConfigurationCollision:
        case ErrorKind::GeometryTooTight:
        case ErrorKind::OrderingCutCrossed:
            return true;
        default:
            return false;
    }
}

}  // namespace iml
