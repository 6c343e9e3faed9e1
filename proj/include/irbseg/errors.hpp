#ifndef IRBSEG_ERRORS_HPP
#define IRBSEG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace irbseg {

/// Base for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A caller violated an operation's preconditions.
struct ArgumentError : Error {
    using Error::Error;
};

/// Data on disk (or in memory) fails an invariant of its declared type.
struct ValidationError : Error {
    using Error::Error;
};

/// A file could not be found, opened, or decoded.
struct LoadError : Error {
    using Error::Error;
};

/// Writing or creating an output failed.
struct IoError : Error {
    using Error::Error;
};

/// A blend allocation asked for more images than a class bucket holds.
struct CapacityError : Error {
    using Error::Error;
};

/// A metric could not be computed (e.g. no defined classes).
struct EvaluationError : Error {
    using Error::Error;
};

/// Training produced a non-finite loss.
struct DivergenceError : Error {
    int epoch = -1;
    DivergenceError(const std::string& msg, int epoch_index) : Error(msg), epoch(epoch_index) {}
};

/// Two components disagree on a shared contract (e.g. class sets).
struct ContractError : Error {
    using Error::Error;
};

/// Assembling a derived dataset failed (duplicate ids, mismatched class sets).
struct BuildError : Error {
    using Error::Error;
};

/// A run configuration document is invalid; message names the field path.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace irbseg

#endif  // IRBSEG_ERRORS_HPP
