#pragma once

#include <stdexcept>
#include <string>

namespace cpcc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// core numerics
struct ZeroNormRow : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct InsufficientRows : Error { using Error::Error; };

// clustering
struct TooFewPoints : Error { using Error::Error; };
struct EmptyClusterUnrecoverable : Error { using Error::Error; };

// assignment / weights
struct NonPositiveAlpha : Error { using Error::Error; };
struct DegenerateFrequency : Error { using Error::Error; };

// prototypes
struct EmptyPrototype : Error { using Error::Error; };

// losses
struct NonPositiveTau : Error { using Error::Error; };
struct BatchTooSmall : Error { using Error::Error; };
struct TooFewPrototypes : Error { using Error::Error; };

// model
struct StaleCache : Error { using Error::Error; };
struct InvalidMomentum : Error { using Error::Error; };

// metrics
struct LengthMismatch : Error { using Error::Error; };
struct TooFewSamples : Error { using Error::Error; };

// data
struct CenterPlacementFailed : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct RaggedRows : Error { using Error::Error; };
struct NonFiniteValue : Error { using Error::Error; };

// trainer / cli
struct ConfigInvalid : Error { using Error::Error; };

} // namespace cpcc
