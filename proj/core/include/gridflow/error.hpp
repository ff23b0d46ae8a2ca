#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridflow {

enum class ErrorKind {
    ZeroReactance,
    DanglingBranch,
    DimensionMismatch,
    SyntaxError,
    MissingTable,
    BadBusType,
    NoSlack,
    SchemaError,
    IoError,
    SingularBMatrix,
    UnconvergedLabel,
    RetryBudgetExhausted,
    AsymmetricInput,
    ShapeMismatch,
    LayoutMismatch,
    EmptySplit,
    VersionMismatch,
    ConfigMismatch,
    ZeroVariance,
    ZeroVector,
    MixedTopology,
    InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/// Domain error carrying a machine-checkable kind. All library failures that
/// callers are expected to handle are reported through this type.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, std::string const& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

}  // namespace gridflow
