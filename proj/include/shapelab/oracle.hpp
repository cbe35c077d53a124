#pragma once

#include <utility>
#include <vector>

#include "shapelab/grid.hpp"

namespace shapelab {

/// Dirichlet eigenvalues of -Laplace on [0,Lx]x[0,Ly], ascending with multiplicity.
std::vector<double> rectangle_eigenvalues(double lx, double ly, int count);

/// J0 by its power series.
double bessel_j0(double x);

/// First positive zero of J0.
double bessel_j01();

struct BallOptimum {
    double Lambda = 0.0;
    double R_star = 0.0;
    double J_star = 0.0;
};

/// Minimizer of j^2/R^2 + Lambda pi R^2 over disks.
BallOptimum optimal_ball(double Lambda);

/// U = sqrt(Lambda) (x2 - c)^+ and chi = 1{x2 > c}.
std::pair<Field, Field> halfplane_fixture(const Grid& grid, double Lambda, double offset);

} // namespace shapelab
