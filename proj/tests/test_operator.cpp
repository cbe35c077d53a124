#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "shapelab/operator.hpp"

using namespace shapelab;

namespace {

CoefficientField identity(const Grid& g) { return make_coefficients(g, {}); }

CoefficientField rotated_anisotropic(const Grid& g)
{
    CoefficientSpec spec;
    spec.kind = CoefficientKind::anisotropic;
    spec.ratio = 3.0;
    spec.angle = 0.3;
    spec.angle_gradient = {1.0, 2.0};
    return make_coefficients(g, spec);
}

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

TEST(AssembleStiffness, LaplacianStencil)
{
    // Hand assembly of the four Q1 cells around a node with A = Id:
    // center 4 * 2/3 = 8/3, edge neighbors 2 * (-1/6) = -1/3, diagonal neighbors -1/3.
    const Grid g = build_grid({0, 0}, {1, 1}, 8);
    const auto K = assemble_stiffness(g, identity(g));
    const std::size_t c = g.interior(4, 4);
    EXPECT_NEAR(K.entry(c, c), 8.0 / 3.0, 1e-14);
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            EXPECT_NEAR(K.entry(c, g.interior(4 + dx, 4 + dy)), -1.0 / 3.0, 1e-14) << dx << "," << dy;
        }
    }
    EXPECT_EQ(K.row_ptr()[c + 1] - K.row_ptr()[c], 9u);
}

TEST(AssembleStiffness, PartitionOfUnity)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 12);
    const auto K = assemble_stiffness(g, rotated_anisotropic(g));
    const std::vector<double> ones(K.size(), 1.0);
    const auto y = K.apply(ones);
    for (int j = 2; j < g.ny() - 1; ++j) {
        for (int i = 2; i < g.nx() - 1; ++i) EXPECT_NEAR(y[g.interior(i, j)], 0.0, 1e-12);
    }
}

TEST(AssembleStiffness, ConstantPotentialShiftsDiagonal)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 10);
    const auto cf = identity(g);
    const Field v = sample_function(g, [](Point) { return 7.5; });
    const auto k0 = assemble_stiffness(g, cf);
    const auto kv = assemble_stiffness(g, cf, &v);
    const double h2 = g.h() * g.h();
    for (std::size_t i = 0; i < k0.size(); ++i) {
        for (std::size_t p = k0.row_ptr()[i]; p < k0.row_ptr()[i + 1]; ++p) {
            const std::size_t j = k0.cols()[p];
            EXPECT_NEAR(kv.vals()[p] - k0.vals()[p], i == j ? 7.5 * h2 : 0.0, 1e-14);
        }
    }
}

TEST(AssembleStiffness, RejectsNegativePotential)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 8);
    Field v(g, 1);
    v.at(0, 3, 3) = -1e-9;
    try {
        assemble_stiffness(g, identity(g), &v);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NegativePotential);
    }
}

TEST(AssembleMass, LumpedEntries)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 8);
    const auto M = assemble_mass(g, identity(g));
    for (double d : M.diagonal()) EXPECT_DOUBLE_EQ(d, 1.0 / 64.0);
    EXPECT_EQ(M.nonzeros(), M.size());

    CoefficientSpec two;
    two.kind = CoefficientKind::drift;
    two.phi.value = -std::log(2.0);
    const auto M2 = assemble_mass(g, make_coefficients(g, two));
    for (double d : M2.diagonal()) EXPECT_NEAR(d, 2.0 / 64.0, 1e-15);
}

TEST(AssembleMass, DriftAtLn2)
{
    // Interior node at x1 = ln 2: origin shifted so that node i = 1 sits there.
    const Grid g = build_grid({std::log(2.0) - 0.125, 0}, {1, 1}, 8);
    CoefficientSpec spec;
    spec.kind = CoefficientKind::drift;
    spec.phi.type = PotentialSpec::Type::linear;
    spec.phi.gradient = {1.0, 0.0};
    const auto M = assemble_mass(g, make_coefficients(g, spec));
    EXPECT_NEAR(M.entry(g.interior(1, 3), g.interior(1, 3)), g.h() * g.h() / 2, 1e-15);
}

TEST(Apply, IdentityZeroAndMismatch)
{
    const std::vector<double> d(5, 1.0);
    const auto I = SparseOperator::diagonal_matrix(d);
    const std::vector<double> v{1, -2, 3, 0.5, 9};
    EXPECT_EQ(I.apply(v), v);
    const std::vector<double> z(5, 0.0);
    EXPECT_EQ(I.apply(z), z);
    try {
        I.apply(std::vector<double>(4, 1.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
    }
}

TEST(Apply, SineModeConsistency)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 32);
    const auto cf = identity(g);
    const auto K = assemble_stiffness(g, cf);
    const auto M = assemble_mass(g, cf);
    std::vector<double> v(K.size());
    for (int j = 1; j < g.ny(); ++j) {
        for (int i = 1; i < g.nx(); ++i) {
            const Point p = g.coord(i, j);
            v[g.interior(i, j)] = std::sin(std::numbers::pi * p.x) * std::sin(std::numbers::pi * p.y);
        }
    }
    const auto kv = K.apply(v);
    const auto mv = M.apply(v);
    const double lambda = 2 * std::numbers::pi * std::numbers::pi;
    const double rq = dot(v, kv) / dot(v, mv);
    // O(h^2) consistency: h = 1/32 gives well under 1%.
    EXPECT_NEAR(rq / lambda, 1.0, 5e-3);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(kv[i], lambda * mv[i], 5e-3 * lambda * mv[i] + 1e-12);
}

TEST(OperatorProperty, SymmetricPositiveDefinite)
{
    const Grid g = build_grid({0, 0}, {1.5, 1}, 18);
    const auto cf = rotated_anisotropic(g);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    Field pot(g, 1);
    for (double& x : pot.values()) x = 50 * (u(rng) + 1);
    for (const Field* v : std::array<const Field*, 2>{nullptr, &pot}) {
        const auto K = assemble_stiffness(g, cf, v);
        EXPECT_LE(K.asymmetry(), 1e-12 * K.max_abs());
        for (int t = 0; t < 100; ++t) {
            std::vector<double> x(K.size());
            for (double& xi : x) xi = u(rng);
            EXPECT_GT(dot(x, K.apply(x)), 0.0);
        }
    }
}

TEST(OperatorProperty, MassBoundedByWeightConstant)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 16);
    CoefficientSpec spec;
    spec.kind = CoefficientKind::drift;
    spec.phi.type = PotentialSpec::Type::gaussian;
    spec.phi.amplitude = 1.1;
    spec.phi.center = {0.5, 0.4};
    spec.phi.sigma = 0.2;
    const auto cf = make_coefficients(g, spec);
    const auto M = assemble_mass(g, cf);
    const double h2 = g.h() * g.h();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> x(M.size());
        for (double& xi : x) xi = u(rng);
        const double q = dot(x, M.apply(x));
        const double n2 = dot(x, x);
        EXPECT_GE(q, n2 * h2 / cf.cb * (1 - 1e-12));
        EXPECT_LE(q, n2 * h2 * cf.cb * (1 + 1e-12));
    }
}

TEST(SparseOperator, RestrictionKeepsPrincipalSubmatrix)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 6);
    const auto K = assemble_stiffness(g, identity(g));
    std::vector<bool> keep(K.size());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = (i % 3) != 1;
    const auto R = K.restrict_to(keep);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i]) idx.push_back(i);
    }
    ASSERT_EQ(R.size(), idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a) {
        for (std::size_t b = 0; b < idx.size(); ++b) EXPECT_EQ(R.entry(a, b), K.entry(idx[a], idx[b]));
    }
}
