#include "circuitdiff/error.hpp"

namespace circuitdiff {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::ConstantColumn: return "ConstantColumn";
        case ErrorKind::TooFewRows: return "TooFewRows";
        case ErrorKind::SchemaMismatch: return "SchemaMismatch";
        case ErrorKind::HeaderMismatch: return "HeaderMismatch";
        case ErrorKind::NonNumericCell: return "NonNumericCell";
        case ErrorKind::IoFailure: return "IoFailure";
        case ErrorKind::UnknownCircuit: return "UnknownCircuit";
        case ErrorKind::DegenerateSampler: return "DegenerateSampler";
        case ErrorKind::NonconductingDevice: return "NonconductingDevice";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::NonFiniteValue: return "NonFiniteValue";
        case ErrorKind::BatchTooSmall: return "BatchTooSmall";
        case ErrorKind::NoCachedForward: return "NoCachedForward";
        case ErrorKind::InvalidRange: return "InvalidRange";
        case ErrorKind::StepOutOfRange: return "StepOutOfRange";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::UntrainedModel: return "UntrainedModel";
        case ErrorKind::ZeroReference: return "ZeroReference";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::EmptySample: return "EmptySample";
        case ErrorKind::LeakageDetected: return "LeakageDetected";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::MalformedCheckpoint: return "MalformedCheckpoint";
    }
    return "Unknown";
}

bool is_numerical(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::DegenerateSampler:
        case ErrorKind::NonconductingDevice:
        case ErrorKind::NonFiniteLoss:
        case ErrorKind::NonFiniteValue:
            return true;
        default:
            return false;
    }
}

}  // namespace circuitdiff
