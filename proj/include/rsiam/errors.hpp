#pragma once

#include <stdexcept>
#include <string>

namespace rsiam {

// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ZeroNormError : Error {
    using Error::Error;
};

struct DimensionMismatchError : Error {
    using Error::Error;
};

struct NonPositiveTemperatureError : Error {
    using Error::Error;
};

struct BatchTooSmallError : Error {
    using Error::Error;
};

struct MissingLabelError : Error {
    using Error::Error;
};

struct EmptyBankError : Error {
    using Error::Error;
};

struct IndexOutOfRangeError : Error {
    using Error::Error;
};

struct TooFewSamplesError : Error {
    using Error::Error;
};

struct InfeasibleConfigError : Error {
    using Error::Error;
};

struct InfeasibleSplitError : Error {
    using Error::Error;
};

struct InfeasibleGalleryError : Error {
    using Error::Error;
};

struct NoPositivesError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

} // namespace rsiam
