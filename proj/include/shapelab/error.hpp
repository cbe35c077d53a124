#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shapelab {

enum class ErrorCode {
    NonSquareCells,
    BadResolution,
    OutOfDomain,
    DimensionMismatch,
    UnknownKind,
    BadParams,
    NotSPD,
    NegativePotential,
    NoConvergence,
    BadK,
    StaleBasis,
    ClusterSplit,
    NoDescent,
    EmptyShape,
    EmptyBoundary,
    OutOfChart,
    QuadTooCoarse,
    DegenerateField,
    NearZeroU1,
    TooFewSamples,
    ParseError,
    SchemaError,
    IoError,
    BadMagic,
    TruncatedFile,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace shapelab
