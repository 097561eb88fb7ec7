#pragma once

#include <stdexcept>
#include <string>

namespace hlap {

enum class ErrorKind {
    SingularPoint,
    ParseError,
    Unsupported,
    InvalidArgument,
    OrderOverflow,
    Inconclusive,
    JetUnstable,
    NoStableBasis,
    NotEquivalent,
    RankDeficient,
    NonSymbolicCholesky,
    SupportViolation,
    NotInvolutive,
    DegreeOverflow,
    DensityMismatch,
    CoefficientSingularOnGrid,
    NoConvergence,
    ConfigParse,
    UnknownAnalysis,
    UnknownLabel,
};

const char* error_kind_name(ErrorKind k);

// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what), kind_(kind)
    {
    }
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind k)
{
    switch (k) {
    case ErrorKind::SingularPoint: return "SingularPoint";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::Unsupported: return "Unsupported";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::OrderOverflow: return "OrderOverflow";
    case ErrorKind::Inconclusive: return "Inconclusive";
    case ErrorKind::JetUnstable: return "JetUnstable";
    case ErrorKind::NoStableBasis: return "NoStableBasis";
    case ErrorKind::NotEquivalent: return "NotEquivalent";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::NonSymbolicCholesky: return "NonSymbolicCholesky";
    case ErrorKind::SupportViolation: return "SupportViolation";
    case ErrorKind::NotInvolutive: return "NotInvolutive";
    case ErrorKind::DegreeOverflow: return "DegreeOverflow";
    case ErrorKind::DensityMismatch: return "DensityMismatch";
    case ErrorKind::CoefficientSingularOnGrid: return "CoefficientSingularOnGrid";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::ConfigParse: return "ConfigParse";
    case ErrorKind::UnknownAnalysis: return "UnknownAnalysis";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    }
    return "Error";
}

} // namespace hlap
