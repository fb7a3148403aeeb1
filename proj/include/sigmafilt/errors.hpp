#pragma once

#include <stdexcept>
#include <string>

namespace sigmafilt {

/// Base class for all errors thrown by this library.
struct FilterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// n + kappa <= 0, so the scaled matrix square root is not real.
struct NonPositiveScaling : FilterError { using FilterError::FilterError; };

/// Safeguarded Cholesky failed even after exhausting the jitter schedule.
struct FactorizationFailure : FilterError { using FilterError::FilterError; };

struct DimensionMismatch : FilterError { using FilterError::FilterError; };

/// Innovation covariance is not positive definite beyond the jitter policy.
struct SingularInnovation : FilterError { using FilterError::FilterError; };

/// Fisher information recursion hit a singular solve.
struct SingularInformation : FilterError { using FilterError::FilterError; };

/// Feature Gram sums are singular even after ridge regularization.
struct SingularGram : FilterError { using FilterError::FilterError; };

struct InsufficientRuns : FilterError { using FilterError::FilterError; };
struct DegenerateInputs : FilterError { using FilterError::FilterError; };
struct EmptyInput : FilterError { using FilterError::FilterError; };

struct ConfigError : FilterError { using FilterError::FilterError; };
struct IoFailure : FilterError { using FilterError::FilterError; };

}  // namespace sigmafilt
