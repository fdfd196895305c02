#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dlcox {

enum class ErrorCode {
    MissingColumn,
    NonNumericCell,
    EmptyFile,
    FileNotFound,
    InvalidDataset,
    ConstantColumn,
    EmptyRiskSet,
    NonFiniteLinearPredictor,
    NonFiniteObjective,
    MaxIterExceeded,
    SingularHessian,
    MonotoneLikelihood,
    FoldWithoutEvents,
    Infeasible,
    NotPositiveDefinite,
    MaxActiveSetChanges,
    NonPositiveDiagonal,
    NonPositiveVariance,
    DimensionMismatch,
    RankDeficientA,
    NonPdF,
    EmptySupport,
    InvalidArgument,
    ConfigError,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace dlcox
