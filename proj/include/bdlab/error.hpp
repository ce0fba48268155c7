#pragma once

#include <stdexcept>
#include <string>

namespace bdlab {

// Every failure mode the library can signal. The CLI maps kinds to exit codes
// so callers can tell a parse problem from a missing artifact from a numeric
// blow-up without string matching.
enum class ErrorKind {
    ShapeMismatch,
    LabelOutOfRange,
    NonFiniteValue,
    NonFiniteFunctionValue,
    NonFiniteGradient,
    DivergedLoss,
    InvalidConfig,
    IoError,
    FormatError,
    EmptyEvaluationSet,
    TooFewCleanSamples,
    DegenerateDirection,
    NoLinearHead,
    ArchitectureMismatch,
    LineageMismatch,
    ConfigParseError,
    MissingArtifact,
    ImageTooSmall,
};

const char* to_string(ErrorKind kind);

// Exit code for the CLI: 0 is success, everything else is a stable small
// integer per kind (documented in the README).
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace bdlab
