#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "shapelab/coeffs.hpp"
#include "shapelab/eigensolve.hpp"
#include "shapelab/freeboundary.hpp"
#include "shapelab/optimizer.hpp"

namespace shapelab {

/// Affine chart F(xi) = x0 + A(x0)^{1/2} xi freezing the coefficients at x0.
struct FrozenChart {
    Point x0;
    Sym2 sqrtA;
    double lamA = 1.0;
    double r_valid = 0.0; // F maps the closed ball B_{r_valid} into D

    Point map(Point xi) const
    {
        return {x0.x + sqrtA.a11 * xi.x + sqrtA.a12 * xi.y, x0.y + sqrtA.a12 * xi.x + sqrtA.a22 * xi.y};
    }
};

FrozenChart make_chart(const CoefficientField& cf, Point x0);

/// Nodal eigenfunctions of a basis as one k-component field (zero on the box boundary).
Field eigen_field(const Grid& grid, const EigenBasis& basis);

/// Central-difference gradients of every component; entry c has components (d/dx, d/dy).
std::vector<Field> component_gradients(const Field& u);

/// U(F(xi)).
std::vector<double> frozen_sample(const Field& u, const FrozenChart& chart, Point xi);

/// Gradient of U o F at xi per component: sqrtA^T grad U(F(xi)).
std::vector<Point> frozen_gradient(const std::vector<Field>& grads, const FrozenChart& chart, Point xi);

struct Quadrature {
    int n_r = 64;
    int n_theta = 256;
};

/// Weiss energy W(r) = J(r)/r^2 - (1/r^3) int_{dB_r} |U|^2 in frozen coordinates,
/// with J(r) = int_{B_r} |grad U|^2 + Lambda |{chi o F > 1/2} cap B_r|.
double weiss(const Field& u, const Field& chi, const FrozenChart& chart, double r, double Lambda,
             Quadrature quad = {});

/// Same as weiss with precomputed gradients of u.
double weiss(const Field& u, const std::vector<Field>& grads, const Field& chi, const FrozenChart& chart, double r,
             double Lambda, Quadrature quad = {});

struct WeissProfile {
    Point x0;
    std::vector<double> radii;
    std::vector<double> W;
    double fitted_C = 0.0;          // least C >= 0 with W + C r^deltaA non-decreasing on the samples
    double max_backward_drop = 0.0; // max (W_i - W_{i+1})^+
    double limit = 0.0;             // intercept of the least-squares line of W against r
};

/// Monotonicity fit of a sampled profile.
WeissProfile fit_weiss_profile(std::vector<double> radii, std::vector<double> W, double deltaA);

WeissProfile weiss_monotonicity_audit(const Field& u, const Field& chi, const FrozenChart& chart,
                                      const std::vector<double>& radii, double Lambda, double deltaA,
                                      Quadrature quad = {});

/// n radii spaced geometrically over [lo, hi].
std::vector<double> geometric_radii(double lo, double hi, int n);

/// Radii for the density fit: [2h, min(r_valid / 4, 16h)], at least 2h.
std::vector<double> theta_radii(double h, double r_valid, int n = 8);

struct DensityEstimate {
    double theta = 0.0; // intercept at r = 0, clipped to [0, 1]
    std::vector<double> per_radius;
};

/// Density of {chi o F > 1/2} in B_r, for each r, and its extrapolation to r = 0.
DensityEstimate density_theta(const Field& chi, const FrozenChart& chart, const std::vector<double>& radii,
                              Quadrature quad = {});

enum class PointClass { regular, singular };

std::string_view to_string(PointClass c);

/// Regular iff |theta - 1/2| <= delta_tol.
PointClass classify_point(double theta, double delta_tol = 0.1);

struct BlowupAudit {
    std::vector<double> radii;
    /// Rescaled fields U(F(r xi)) / r on the reference lattice, one k-vector per sample.
    std::vector<std::vector<std::vector<double>>> rescaled;
    std::vector<Point> reference;                 // lattice points in the closed unit ball
    std::vector<double> homogeneity;              // H(r) over 1/4 <= |xi| <= 1
    std::vector<double> alignment;                // 1 - sigma_1^2 / sum sigma_j^2
};

/// Blow-up defects at the chart centre. `resolution` is the number of lattice
/// points per axis of the reference grid over [-1, 1]^2. Radii must be
/// descending and at least 2h.
BlowupAudit blowup_audit(const Field& u, const FrozenChart& chart, const std::vector<double>& radii,
                         int resolution = 33);

struct OptimalityResidual {
    std::vector<std::size_t> points; // indices into the boundary polyline
    std::vector<double> rho;         // NaN when skipped
    std::vector<bool> skipped;       // u_1 vanished at the probe
    double median = 0.0;
    double q90 = 0.0;
    double max = 0.0;
};

/// rho(p) = | |A^{1/2} grad u_1| - g sqrt(Lambda) | / sqrt(Lambda) at p - d_in nu,
/// with g = 1 / sqrt(1 + sum_{i>=2} (u_i/u_1)^2). Only inside_D points are probed.
OptimalityResidual optimality_residual(const Field& u, const CoefficientField& cf, double Lambda,
                                       const BoundaryPolyline& boundary, double d_in);

struct NondegeneracyReport {
    double c_lower = 0.0;              // min u_1 / dist over {chi = 1, 2h <= dist <= 8h}
    double C1 = 1.0;                   // max |U| / u_1 over {chi = 1, u_1 > 0} on components carrying u_1
    std::vector<double> C1_components; // max |u_i| / u_1 per eigenfunction
    double eta = 0.0;                  // min sup_{B_{lamA r}(p)} |U| / r over r in {4h, 8h, 16h}
    double density_min = 0.0;          // |{chi = 1} cap B_{8h}(p)| / |B_{8h}| over boundary points
    double density_max = 0.0;
};

/// Empirical non-degeneracy constants. `dist` is the distance to the free
/// boundary; boundary points farther than 2h from the box are used for eta
/// and the density band.
NondegeneracyReport nondegeneracy_audit(const Field& u, const ComponentMap& components, const Field& dist,
                                        const BoundaryPolyline& boundary, const CoefficientField& cf);

struct PerimeterEstimate {
    std::vector<double> levels;    // s_m = m t / 16, m = 1..16
    std::vector<double> perimeters;
    double perimeter = 0.0;        // at the lowest level t/16
    double coarea_average = 0.0;   // mean over the 16 levels
};

/// Length of {|u| = s} clipped to the window [lo, hi], for 16 levels in (0, t].
PerimeterEstimate perimeter_estimate(const Field& field, int comp, double t, Point lo, Point hi);

enum class CompetitorFamily { truncation, harmonic, flip };

std::string_view to_string(CompetitorFamily f);

struct Competitor {
    CompetitorFamily family;
    double margin = 0.0;
    Point center;
    double radius = 0.0; // truncation and harmonic replacement
    double t = 0.0;      // truncation level
};

struct QuasiminAudit {
    ShapeState base;        // the thresholded state chi at the state's eps
    SparseOperator K;       // penalized stiffness of base
    double reference = 0.0; // sum lambda_i(chi) + Lambda h^2 |{chi = 1, U != 0}|
    std::vector<Competitor> trials;
    double min_margin = 0.0;
};

/// Reference objective of the thresholded state chi at the state's eps.
QuasiminAudit quasimin_reference(const ShapeProblem& problem, const ShapeState& state, double eig_tol = 1e-8);

/// Margin of the soft truncation of U at level t under a cutoff equal to 1 on
/// B_radius(center) and vanishing outside B_{2 radius}(center).
Competitor truncation_competitor(const ShapeProblem& problem, const QuasiminAudit& ref,
                                 Point center, double radius, double t);

/// Margin of u_1 replaced by min(u_1, A-harmonic extension of its trace) on B_radius(center).
Competitor harmonic_competitor(const ShapeProblem& problem, const QuasiminAudit& ref,
                               Point center, double radius);

/// Margin of chi with the listed nodes flipped, eigenvalues re-solved.
Competitor flip_competitor(const ShapeProblem& problem, const QuasiminAudit& ref,
                           const std::vector<std::size_t>& nodes, double eig_tol = 1e-8);

/// `trials` competitors cycling through truncation, harmonic replacement and
/// cell flips near the free boundary. Returns every margin and the minimum.
QuasiminAudit quasimin_audit(const ShapeProblem& problem, const ShapeState& state, int trials, std::uint64_t seed,
                             double eig_tol = 1e-8);

struct HarnackAudit {
    std::size_t samples = 0;
    std::vector<double> q_max;   // max |u_i / u_1| per component i >= 2
    double alpha = 1.0;          // fitted Hoelder exponent, in [1e-3, 1]
    double seminorm = 0.0;       // max |q(x) - q(y)| / |x - y|^alpha
    double g = 1.0;              // 1 / sqrt(1 + |q|^2) at the sample closest to p
};

/// Quotients q_i = u_i / u_1 on {chi = 1} nodes of B_r(p).
HarnackAudit harnack_quotient_audit(const Field& u, const Field& chi, Point p, double r);

/// Least-squares line y = a + b x; returns (a, b).
std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y);

} // namespace shapelab
