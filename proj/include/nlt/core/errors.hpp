#pragma once

#include <stdexcept>
#include <string>

namespace nlt {

// Argument outside the mathematical domain of an operation (y <= 0, order > 2, ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Quadrature, root finding or iteration failed to converge.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A structural hypothesis of the model is violated (positivity floor, admissibility).
struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad configuration or schema.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace nlt

namespace nlt {

// Time step could not be completed (fixed point did not converge); retry with a smaller dt.
struct StepError : NumericError {
    using NumericError::NumericError;
};

}  // namespace nlt
