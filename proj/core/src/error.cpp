#include "gridflow/error.hpp"

namespace gridflow {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ZeroReactance: return "ZeroReactance";
        case ErrorKind::DanglingBranch: return "DanglingBranch";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::SyntaxError: return "SyntaxError";
        case ErrorKind::MissingTable: return "MissingTable";
        case ErrorKind::BadBusType: return "BadBusType";
        case ErrorKind::NoSlack: return "NoSlack";
        case ErrorKind::SchemaError: return "SchemaError";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::SingularBMatrix: return "SingularBMatrix";
        case ErrorKind::UnconvergedLabel: return "UnconvergedLabel";
        case ErrorKind::RetryBudgetExhausted: return "RetryBudgetExhausted";
        case ErrorKind::AsymmetricInput: return "AsymmetricInput";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::LayoutMismatch: return "LayoutMismatch";
        case ErrorKind::EmptySplit: return "EmptySplit";
        case ErrorKind::VersionMismatch: return "VersionMismatch";
        case ErrorKind::ConfigMismatch: return "ConfigMismatch";
        case ErrorKind::ZeroVariance: return "ZeroVariance";
        case ErrorKind::ZeroVector: return "ZeroVector";
        case ErrorKind::MixedTopology: return "MixedTopology";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace gridflow
