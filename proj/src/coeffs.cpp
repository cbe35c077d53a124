#include "shapelab/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace shapelab {

CoefficientKind parse_coefficient_kind(std::string_view name)
{
    if (name == "identity") return CoefficientKind::identity;
    if (name == "drift") return CoefficientKind::drift;
    if (name == "anisotropic") return CoefficientKind::anisotropic;
    throw Error(ErrorCode::UnknownKind, "unknown coefficient kind '" + std::string(name) + "'");
}

std::string_view to_string(CoefficientKind kind)
{
    switch (kind) {
    case CoefficientKind::identity: return "identity";
    case CoefficientKind::drift: return "drift";
    case CoefficientKind::anisotropic: return "anisotropic";
    }
    return "identity";
}

double PotentialSpec::operator()(Point p) const
{
    switch (type) {
    case Type::constant: return value;
    case Type::linear: return value + gradient.dot(p);
    case Type::gaussian: {
        const Point d = p - center;
        return amplitude * std::exp(-d.dot(d) / (2.0 * sigma * sigma));
    }
    }
    return 0.0;
}

Sym2 CoefficientField::matrix_at(Point p) const
{
    return {bilinear_sample(a11, 0, p), bilinear_sample(a12, 0, p), bilinear_sample(a22, 0, p)};
}

namespace {

// Range and Lipschitz constant of Phi over the box, from the closed form.
struct PotentialBounds {
    double lo;
    double hi;
    double lipschitz;
};

PotentialBounds potential_bounds(const PotentialSpec& phi, const Grid& grid)
{
    switch (phi.type) {
    case PotentialSpec::Type::constant: return {phi.value, phi.value, 0.0};
    case PotentialSpec::Type::linear: {
        const Point o = grid.origin();
        const Point e = grid.extent();
        const double c[4] = {phi(o), phi({o.x + e.x, o.y}), phi({o.x, o.y + e.y}), phi(o + e)};
        return {*std::min_element(c, c + 4), *std::max_element(c, c + 4), phi.gradient.norm()};
    }
    case PotentialSpec::Type::gaussian:
        return {std::min(0.0, phi.amplitude), std::max(0.0, phi.amplitude),
                std::abs(phi.amplitude) / phi.sigma * std::exp(-0.5)};
    }
    return {0.0, 0.0, 0.0};
}

} // namespace

CoefficientField make_coefficients(const Grid& grid, const CoefficientSpec& spec)
{
    CoefficientField cf{Field(grid, 1), Field(grid, 1), Field(grid, 1), Field(grid, 1)};
    auto a11 = cf.a11.component(0);
    auto a12 = cf.a12.component(0);
    auto a22 = cf.a22.component(0);
    auto b = cf.b.component(0);

    switch (spec.kind) {
    case CoefficientKind::identity:
        std::fill(a11.begin(), a11.end(), 1.0);
        std::fill(a22.begin(), a22.end(), 1.0);
        std::fill(b.begin(), b.end(), 1.0);
        break;

    case CoefficientKind::drift: {
        if (spec.phi.type == PotentialSpec::Type::gaussian && !(spec.phi.sigma > 0.0)) {
            throw Error(ErrorCode::BadParams, "gaussian potential needs sigma > 0");
        }
        for (std::size_t n = 0; n < grid.node_count(); ++n) {
            const double w = std::exp(-spec.phi(grid.coord(n)));
            a11[n] = w;
            a22[n] = w;
            b[n] = w;
        }
        const auto bounds = potential_bounds(spec.phi, grid);
        const double amax = std::max(std::abs(bounds.lo), std::abs(bounds.hi));
        cf.lamA = std::max(1.0, std::exp(0.5 * amax));
        cf.cb = std::max(1.0, std::exp(amax));
        cf.cA = bounds.lipschitz * std::exp(-bounds.lo);
        cf.deltaA = 1.0;
        break;
    }

    case CoefficientKind::anisotropic: {
        if (!(spec.ratio > 0.0)) {
            throw Error(ErrorCode::BadParams, "anisotropy ratio must be positive");
        }
        const double r = spec.ratio;
        for (std::size_t n = 0; n < grid.node_count(); ++n) {
            const double th = spec.angle + spec.angle_gradient.dot(grid.coord(n));
            const double c = std::cos(th);
            const double s = std::sin(th);
            a11[n] = r * c * c + s * s / r;
            a22[n] = r * s * s + c * c / r;
            a12[n] = (r - 1.0 / r) * s * c;
            b[n] = 1.0;
        }
        cf.lamA = std::sqrt(std::max(r, 1.0 / r));
        cf.cA = std::abs(r - 1.0 / r) * spec.angle_gradient.norm();
        cf.deltaA = 1.0;
        cf.cb = 1.0;
        break;
    }
    }
    return cf;
}

std::pair<double, double> eigenvalues(const Sym2& a)
{
    const double mean = 0.5 * (a.a11 + a.a22);
    const double dev = std::hypot(0.5 * (a.a11 - a.a22), a.a12);
    return {mean - dev, mean + dev};
}

Sym2 spd_sqrt(const Sym2& a)
{
    const double det = a.a11 * a.a22 - a.a12 * a.a12;
    if (!(a.a11 > 0.0) || !(det > 0.0)) {
        throw Error(ErrorCode::NotSPD, "matrix is not symmetric positive definite");
    }
    const double s = std::sqrt(det);
    const double t = std::sqrt(a.a11 + a.a22 + 2.0 * s);
    return {(a.a11 + s) / t, a.a12 / t, (a.a22 + s) / t};
}

CoefficientReport validate_coefficients(const CoefficientField& cf, int pairs, std::uint64_t seed)
{
    const Grid& g = cf.grid();
    const auto a11 = cf.a11.component(0);
    const auto a12 = cf.a12.component(0);
    const auto a22 = cf.a22.component(0);
    const auto b = cf.b.component(0);
    const std::size_t nn = g.node_count();

    CoefficientReport rep;
    rep.min_eigenvalue = std::numeric_limits<double>::infinity();
    rep.max_eigenvalue = -std::numeric_limits<double>::infinity();
    rep.b_min = std::numeric_limits<double>::infinity();
    rep.b_max = -std::numeric_limits<double>::infinity();
    std::size_t not_spd = 0;
    std::size_t out_of_band = 0;
    const double lo = 1.0 / (cf.lamA * cf.lamA) * (1.0 - 1e-12);
    const double hi = cf.lamA * cf.lamA * (1.0 + 1e-12);
    for (std::size_t n = 0; n < nn; ++n) {
        const Sym2 m{a11[n], a12[n], a22[n]};
        const auto [e0, e1] = eigenvalues(m);
        if (!(m.a11 > 0.0) || !(m.a11 * m.a22 - m.a12 * m.a12 > 0.0)) ++not_spd;
        if (e0 < lo || e1 > hi) ++out_of_band;
        rep.min_eigenvalue = std::min(rep.min_eigenvalue, e0);
        rep.max_eigenvalue = std::max(rep.max_eigenvalue, e1);
        rep.b_min = std::min(rep.b_min, b[n]);
        rep.b_max = std::max(rep.b_max, b[n]);
    }
    if (rep.min_eigenvalue > 0.0) {
        rep.lamA_estimate = std::sqrt(std::max({1.0, rep.max_eigenvalue, 1.0 / rep.min_eigenvalue}));
    } else {
        rep.lamA_estimate = std::numeric_limits<double>::infinity();
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, nn - 1);
    for (int p = 0; p < pairs; ++p) {
        const std::size_t u = pick(rng);
        const std::size_t v = pick(rng);
        if (u == v) continue;
        const double dist = std::pow((g.coord(u) - g.coord(v)).norm(), cf.deltaA);
        const double diff = std::max({std::abs(a11[u] - a11[v]), std::abs(a12[u] - a12[v]),
                                      std::abs(a22[u] - a22[v])});
        rep.holder_quotient = std::max(rep.holder_quotient, diff / dist);
    }

    if (not_spd > 0) rep.violations.push_back("A not SPD at " + std::to_string(not_spd) + " nodes");
    if (out_of_band > 0) {
        rep.violations.push_back("eigenvalues of A outside [lamA^-2, lamA^2] at " + std::to_string(out_of_band)
                                 + " nodes");
    }
    if (rep.b_min < (1.0 / cf.cb) * (1.0 - 1e-12) || rep.b_max > cf.cb * (1.0 + 1e-12)) {
        rep.violations.push_back("weight b outside [1/cb, cb]");
    }
    if (rep.holder_quotient > cf.cA * (1.0 + 1e-9) + 1e-14) {
        rep.violations.push_back("empirical Hoelder quotient exceeds cA");
    }
    return rep;
}

} // namespace shapelab
