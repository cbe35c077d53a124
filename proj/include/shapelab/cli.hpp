#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "shapelab/diagnostics.hpp"
#include "shapelab/io.hpp"

namespace shapelab {

/// Entry point of the command-line tool. Returns 0 on success, 1 on a
/// runtime failure and 2 on a usage or configuration error.
int run(int argc, const char* const* argv);

/// Everything an optimize run directory holds, reloaded and re-derived.
struct RunData {
    std::filesystem::path dir;
    RunConfig config;
    Grid grid;
    CoefficientField cf;
    ShapeState state;
    Field u;
    ComponentMap components;
    BoundaryPolyline boundary;
    Field dist;
    nlohmann::json report;
};

RunData load_run(const std::filesystem::path& dir);

/// Per-point reports at `points` boundary points spread along the polyline,
/// or at the boundary point nearest `at`.
nlohmann::json diagnose_run(const RunData& run, int points, std::optional<Point> at = std::nullopt);

/// Quasi-minimality margins, perimeter and co-area averages, component audit.
nlohmann::json audit_run(const RunData& run, int trials, std::uint64_t seed);

} // namespace shapelab
