#include "shapelab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace shapelab {

std::vector<double> rectangle_eigenvalues(double lx, double ly, int count)
{
    if (!(lx > 0.0) || !(ly > 0.0) || count < 1) throw Error(ErrorCode::BadParams, "rectangle_eigenvalues arguments");
    // Any of the first `count` values has m, n <= count.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    std::vector<double> all;
    for (int m = 1; m <= count; ++m) {
        for (int n = 1; n <= count; ++n) all.push_back(pi2 * (m * m / (lx * lx) + n * n / (ly * ly)));
    }
    std::sort(all.begin(), all.end());
    all.resize(static_cast<std::size_t>(count));
    return all;
}

double bessel_j0(double x)
{
    const double q = -0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int m = 1; m < 200; ++m) {
        term *= q / (static_cast<double>(m) * m);
        sum += term;
        if (std::abs(term) < 1e-17 * std::max(1.0, std::abs(sum))) break;
    }
    return sum;
}

double bessel_j01()
{
    double lo = 2.0;
    double hi = 3.0;
    while (hi - lo > 1e-15) {
        const double mid = 0.5 * (lo + hi);
        if (bessel_j0(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

BallOptimum optimal_ball(double Lambda)
{
    if (!(Lambda > 0.0) || !std::isfinite(Lambda)) throw Error(ErrorCode::BadParams, "Lambda must be positive");
    const double j = bessel_j01();
    BallOptimum b;
    b.Lambda = Lambda;
    b.R_star = std::pow(j * j / (Lambda * std::numbers::pi), 0.25);
    b.J_star = 2.0 * j * j / (b.R_star * b.R_star);
    return b;
}

std::pair<Field, Field> halfplane_fixture(const Grid& grid, double Lambda, double offset)
{
    const double y0 = grid.origin().y;
    if (!(offset > y0 && offset < y0 + grid.extent().y)) throw Error(ErrorCode::BadParams, "offset outside the box");
    if (!(Lambda >= 0.0)) throw Error(ErrorCode::BadParams, "Lambda must be nonnegative");
    const double s = std::sqrt(Lambda);
    Field u = sample_function(grid, [&](Point p) { return s * std::max(0.0, p.y - offset); });
    Field chi = sample_function(grid, [&](Point p) { return p.y > offset ? 1.0 : 0.0; });
    return {std::move(u), std::move(chi)};
}

} // namespace shapelab
