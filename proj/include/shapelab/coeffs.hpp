#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "shapelab/grid.hpp"

namespace shapelab {

enum class CoefficientKind { identity, drift, anisotropic };

CoefficientKind parse_coefficient_kind(std::string_view name);
std::string_view to_string(CoefficientKind kind);

/// Closed-form potential Phi used by the drift family (A = e^-Phi Id, b = e^-Phi).
struct PotentialSpec {
    enum class Type { constant, linear, gaussian };
    Type type = Type::constant;
    double value = 0.0;       // constant value, or the offset of the linear form
    Point gradient{};         // linear: Phi(x) = value + gradient . x
    double amplitude = 0.0;   // gaussian: amplitude * exp(-|x - center|^2 / (2 sigma^2))
    Point center{};
    double sigma = 1.0;

    double operator()(Point p) const;
};

struct CoefficientSpec {
    CoefficientKind kind = CoefficientKind::identity;
    PotentialSpec phi;          // drift only
    double ratio = 1.0;         // anisotropic: eigenvalues ratio and 1/ratio
    double angle = 0.0;         // anisotropic: theta(x) = angle + angle_gradient . x
    Point angle_gradient{};
};

struct Sym2 {
    double a11 = 1.0;
    double a12 = 0.0;
    double a22 = 1.0;
};

/// Matrix field A, weight b and the structural constants of the family.
struct CoefficientField {
    Field a11;
    Field a12;
    Field a22;
    Field b;
    double lamA = 1.0;   // eigenvalues of A lie in [lamA^-2, lamA^2]
    double cA = 0.0;     // Hoelder constant of the entries
    double deltaA = 1.0; // Hoelder exponent
    double cb = 1.0;     // cb^-1 <= b <= cb

    const Grid& grid() const { return b.grid(); }
    /// A at p, bilinear in the nodal entries.
    Sym2 matrix_at(Point p) const;
    double weight_at(Point p) const { return bilinear_sample(b, 0, p); }
};

CoefficientField make_coefficients(const Grid& grid, const CoefficientSpec& spec);

struct CoefficientReport {
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
    double lamA_estimate = 1.0;
    double holder_quotient = 0.0;
    double b_min = 0.0;
    double b_max = 0.0;
    std::vector<std::string> violations;
};

/// Audits the hypotheses on (A, b) nodewise, with a Monte-Carlo Hoelder
/// quotient over `pairs` random node pairs.
CoefficientReport validate_coefficients(const CoefficientField& cf, int pairs, std::uint64_t seed);

/// Eigenvalues (ascending) of a symmetric 2x2 matrix.
std::pair<double, double> eigenvalues(const Sym2& a);

/// Principal square root of an SPD 2x2 matrix.
Sym2 spd_sqrt(const Sym2& a);

} // namespace shapelab
