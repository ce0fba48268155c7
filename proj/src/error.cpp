#include "bdlab/error.hpp"

namespace bdlab {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
        case ErrorKind::NonFiniteValue: return "NonFiniteValue";
        case ErrorKind::NonFiniteFunctionValue: return "NonFiniteFunctionValue";
        case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
        case ErrorKind::DivergedLoss: return "DivergedLoss";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::FormatError: return "FormatError";
        case ErrorKind::EmptyEvaluationSet: return "EmptyEvaluationSet";
        case ErrorKind::TooFewCleanSamples: return "TooFewCleanSamples";
        case ErrorKind::DegenerateDirection: return "DegenerateDirection";
        case ErrorKind::NoLinearHead: return "NoLinearHead";
        case ErrorKind::ArchitectureMismatch: return "ArchitectureMismatch";
        case ErrorKind::LineageMismatch: return "LineageMismatch";
        case ErrorKind::ConfigParseError: return "ConfigParseError";
        case ErrorKind::MissingArtifact: return "MissingArtifact";
        case ErrorKind::ImageTooSmall: return "ImageTooSmall";
    }
    return "UnknownError";
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ConfigParseError: return 2;
        case ErrorKind::MissingArtifact: return 3;
        case ErrorKind::LineageMismatch: return 4;
        case ErrorKind::InvalidConfig: return 5;
        case ErrorKind::IoError: return 6;
        case ErrorKind::FormatError: return 7;
        default: return 10;
    }
}

}  // namespace bdlab
