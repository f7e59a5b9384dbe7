#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gfspec {

enum class ErrorKind {
    DomainError,
    QuadratureDivergence,
    RangeExtensionFailure,
    CriterionViolated,
    MomentDivergence,
    EntranceBoundaryAbsent,
    UnboundedAbove,
    MajorantOverflow,
    RejectionStall,
    ExplosionGuard,
    CFLViolation,
    CFLUnsatisfiable,
    NegativeMass,
    Reducible,
    NoConvergence,
    BoundViolated,
    RatePositive,
    InconsistentEta,
    Extinction,
    ConfigError,
};

constexpr std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::QuadratureDivergence: return "QuadratureDivergence";
    case ErrorKind::RangeExtensionFailure: return "RangeExtensionFailure";
    case ErrorKind::CriterionViolated: return "CriterionViolated";
    case ErrorKind::MomentDivergence: return "MomentDivergence";
    case ErrorKind::EntranceBoundaryAbsent: return "EntranceBoundaryAbsent";
    case ErrorKind::UnboundedAbove: return "UnboundedAbove";
    case ErrorKind::MajorantOverflow: return "MajorantOverflow";
    case ErrorKind::RejectionStall: return "RejectionStall";
    case ErrorKind::ExplosionGuard: return "ExplosionGuard";
    case ErrorKind::CFLViolation: return "CFLViolation";
    case ErrorKind::CFLUnsatisfiable: return "CFLUnsatisfiable";
    case ErrorKind::NegativeMass: return "NegativeMass";
    case ErrorKind::Reducible: return "Reducible";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::BoundViolated: return "BoundViolated";
    case ErrorKind::RatePositive: return "RatePositive";
    case ErrorKind::InconsistentEta: return "InconsistentEta";
    case ErrorKind::Extinction: return "Extinction";
    case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above so that
/// callers (and the CLI) can dispatch on it without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind),
          message_(what)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }
    std::string_view name() const noexcept { return to_string(kind_); }
    /// The text without the kind prefix.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

}  // namespace gfspec
