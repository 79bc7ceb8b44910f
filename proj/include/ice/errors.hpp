#pragma once

#include <stdexcept>
#include <string>

namespace ice {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Layout / input validation
struct InvalidInputError : Error { using Error::Error; };
struct InvalidLayoutError : Error { using Error::Error; };
struct InvalidBudgetError : Error { using Error::Error; };

// Numeric domains (e.g. corruption time outside [0,1])
struct DomainError : Error { using Error::Error; };

// Predictor surface
struct ShapeError : Error { using Error::Error; };
struct InconsistentStateError : Error { using Error::Error; };
struct LayoutIncompatibleError : Error { using Error::Error; };

// Decoding
struct UndefinedConfidenceError : Error { using Error::Error; };
struct PreconditionError : Error { using Error::Error; };

// CLI / experiment configuration
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

} // namespace ice
