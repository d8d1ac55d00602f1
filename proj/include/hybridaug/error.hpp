#pragma once

#include <stdexcept>
#include <string>

namespace hybridaug {

/// Base class for every error raised by the toolkit. `kind()` is a stable
/// machine-readable tag used by the CLI's JSON error output.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Argument out of range or incompatible with the operation.
class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& message) : Error("invalid_argument", message) {}
};

/// Input or output file could not be read, decoded, or written.
class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io_error", message) {}
};

/// Manifest, config, or wire document violates its schema.
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& message) : Error("schema_error", message) {}
};

/// A placement could not be realized inside the background.
class PlacementError : public Error {
public:
    explicit PlacementError(const std::string& message) : Error("placement_error", message) {}
};

/// Optimizer produced a non-finite state.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& message) : Error("numerical_error", message) {}
};

/// A pipeline stage was invoked before the stages it depends on.
class PrerequisiteError : public Error {
public:
    explicit PrerequisiteError(const std::string& message) : Error("missing_prerequisite", message) {}
};

/// Lookup of an id that is not part of the current data set.
class NotFound : public Error {
public:
    explicit NotFound(const std::string& message) : Error("not_found", message) {}
};

}  // namespace hybridaug
