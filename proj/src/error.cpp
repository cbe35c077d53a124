#include "shapelab/error.hpp"

namespace shapelab {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::NonSquareCells: return "NonSquareCells";
    case ErrorCode::BadResolution: return "BadResolution";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::NotSPD: return "NotSPD";
    case ErrorCode::NegativePotential: return "NegativePotential";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::StaleBasis: return "StaleBasis";
    case ErrorCode::ClusterSplit: return "ClusterSplit";
    case ErrorCode::NoDescent: return "NoDescent";
    case ErrorCode::EmptyShape: return "EmptyShape";
    case ErrorCode::EmptyBoundary: return "EmptyBoundary";
    case ErrorCode::OutOfChart: return "OutOfChart";
    case ErrorCode::QuadTooCoarse: return "QuadTooCoarse";
    case ErrorCode::DegenerateField: return "DegenerateField";
    case ErrorCode::NearZeroU1: return "NearZeroU1";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    }
    return "Unknown";
}

} // namespace shapelab
