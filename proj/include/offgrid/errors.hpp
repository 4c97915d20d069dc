#pragma once

#include <stdexcept>
#include <string>

namespace offgrid {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Vectors from different measures, or wrong lengths.
struct AlignmentError : Error { using Error::Error; };
// Parameter outside its admissible set.
struct DomainError : Error { using Error::Error; };
// g_T fell below the degeneracy threshold.
struct DegeneracyError : Error { using Error::Error; };
// Quadrature or another numerical routine failed to converge.
struct NumericError : Error { using Error::Error; };
// Ill-conditioned certificate system.
struct ConditioningError : Error { using Error::Error; };
// Iterative solver ran out of budget.
struct IterationError : Error { using Error::Error; };
// Invalid experiment configuration.
struct ConfigError : Error { using Error::Error; };
// Bisection search not bracketed.
struct RangeError : Error { using Error::Error; };
// Noise model not realizable (e.g. covariance not PSD).
struct ModelError : Error { using Error::Error; };

}  // namespace offgrid
