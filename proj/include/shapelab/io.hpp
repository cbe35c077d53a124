#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "shapelab/coeffs.hpp"
#include "shapelab/diagnostics.hpp"
#include "shapelab/optimizer.hpp"

namespace shapelab {

struct DiagnosticsConfig {
    int radii_count = 8;          // Weiss radii, geometric over [radii_min_h h, radii_max]
    double radii_min_h = 2.0;
    std::optional<double> radii_max; // unset: half the chart radius, at most 32h
    double delta_tol = 0.1;
    Quadrature quad;
    double d_in_h = 2.0;          // optimality probe offset in units of h
    int points = 20;              // boundary points reported by `diagnose`
    int blowup_resolution = 33;
    double harnack_radius_h = 16.0;
};

struct RunConfig {
    Point origin{0.0, 0.0};
    Point extent{1.0, 1.0};
    int nx = 0;
    CoefficientSpec coefficients;
    int k = 1;
    double Lambda = 0.0;
    std::optional<double> eps0;    // unset: 1 / lambda_1(D)
    std::optional<double> eps_min; // unset: h^2
    double eps_factor = 0.5;
    Phi0Spec phi0;
    double tol = 1e-6;
    int max_iters = 200;
    double step0 = 1.0;
    std::uint64_t seed = 1;
    int polish_rounds = 100;
    double eig_tol = 1e-8;
    DiagnosticsConfig diagnostics;
    /// "key.path=value" for every optional key that was absent.
    std::vector<std::string> applied_defaults;

    Grid grid() const;
    OptimizerOptions optimizer_options() const;
};

/// Strict parse: unknown keys, wrong types and out-of-range values raise
/// SchemaError naming the key path; malformed JSON raises ParseError.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// SSF1: "SSF1", u32 nx+1, ny+1, ncomp (little endian), then f64 values
/// component-major, row-major within a component. The grid geometry is
/// supplied by the reader.
void write_field(const Field& field, const std::filesystem::path& path);
Field read_field(const std::filesystem::path& path, const Grid& grid);
/// Header only: (nodes_x, nodes_y, ncomp).
std::tuple<std::uint32_t, std::uint32_t, std::uint32_t> read_field_header(const std::filesystem::path& path);

/// JSON with sorted keys, two-space indent and %.17g numbers. Non-finite
/// numbers become the strings "nan", "inf", "-inf" and each one adds an
/// entry to a top-level "warnings" array.
std::string serialize_report(const nlohmann::json& report);
void write_report(const nlohmann::json& report, const std::filesystem::path& path);

/// Binary PGM (P5, maxval 255), min-max normalized, top row at the largest y.
/// Constant fields map to 128.
std::string heatmap_pgm(const Field& field, int comp);
void render_heatmap(const Field& field, int comp, const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// A manifest in `dir` listing each file (relative path, bytes, sha256), sorted by path.
void write_manifest(const std::filesystem::path& dir, const std::vector<std::filesystem::path>& files,
                    const std::string& name = "manifest.json");

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

} // namespace shapelab
