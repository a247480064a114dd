#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace circuitdiff {

/// Every failure the library reports carries one of these kinds so callers
/// (tests, the CLI exit-code mapping) can branch without parsing messages.
enum class ErrorKind {
    // data / schema
    ConstantColumn,
    TooFewRows,
    SchemaMismatch,
    HeaderMismatch,
    NonNumericCell,
    IoFailure,
    UnknownCircuit,
    // simulator
    DegenerateSampler,
    NonconductingDevice,
    // network
    ShapeMismatch,
    NonFiniteValue,
    BatchTooSmall,
    NoCachedForward,
    // diffusion
    InvalidRange,
    StepOutOfRange,
    NonFiniteLoss,
    UntrainedModel,
    // metrics / bench
    ZeroReference,
    LengthMismatch,
    EmptySample,
    LeakageDetected,
    // configuration / files
    InvalidConfig,
    MalformedCheckpoint,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// True for kinds that signal a numerical failure at runtime rather than bad
/// user input.
bool is_numerical(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace circuitdiff
