#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "shapelab/optimizer.hpp"
#include "shapelab/oracle.hpp"

using namespace shapelab;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Field ones(const Grid& g) { return sample_function(g, [](Point) { return 1.0; }); }

Field random_density(const Grid& g, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.2, 0.8);
    Field f(g, 1);
    for (double& v : f.values()) v = u(rng);
    return f;
}

} // namespace

TEST(Objective, FullSquareApproachesFirstEigenvalue)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 32);
    const auto cf = make_coefficients(g, {});
    const ShapeProblem p0(g, cf, 1, 0.0);
    const auto s0 = p0.evaluate(ones(g), kInf, 1e-10, 1);
    const double j0 = objective(p0, s0);
    EXPECT_NEAR(j0 / (2 * std::numbers::pi * std::numbers::pi), 1.0, 1e-2);

    const ShapeProblem p10(g, cf, 1, 10.0);
    const auto s10 = p10.evaluate(ones(g), kInf, 1e-10, 1);
    const double vol = p10.volume(s10.phi);
    EXPECT_NEAR(vol, (31.0 / 32.0) * (31.0 / 32.0), 1e-12);
    EXPECT_NEAR(objective(p10, s10), j0 + 10 * vol, 1e-9);
}

TEST(Objective, StaleBasisDetected)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 16);
    const ShapeProblem p(g, make_coefficients(g, {}), 1, 5.0);
    auto s = p.evaluate(random_density(g, 3), 0.01, 1e-10, 1);
    EXPECT_NO_THROW(objective(p, s));
    s.phi.at(0, 8, 8) = 0.0;
    try {
        objective(p, s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::StaleBasis);
    }
}

TEST(ObjectiveGradient, UnpenalizedIsVolumeTerm)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 16);
    const ShapeProblem p(g, make_coefficients(g, {}), 1, 7.0);
    const auto s = p.evaluate(random_density(g, 5), kInf, 1e-10, 1);
    const Field gr = objective_gradient(p, s);
    const double h2 = g.h() * g.h();
    for (int j = 0; j <= g.ny(); ++j) {
        for (int i = 0; i <= g.nx(); ++i) EXPECT_DOUBLE_EQ(gr.at(0, i, j), g.on_boundary(i, j) ? 0.0 : 7.0 * h2);
    }
}

TEST(ObjectiveGradient, MatchesCentralDifferences)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 16);
    CoefficientSpec spec;
    spec.kind = CoefficientKind::drift;
    spec.phi.type = PotentialSpec::Type::gaussian;
    spec.phi.amplitude = 0.5;
    spec.phi.center = {0.4, 0.6};
    spec.phi.sigma = 0.3;
    for (int k : {1, 2}) {
        const ShapeProblem p(g, make_coefficients(g, spec), k, 50.0);
        const Field phi = random_density(g, 11);
        const double eps = 0.01;
        const auto s = p.evaluate(phi, eps, 1e-12, 1);
        const Field gr = objective_gradient(p, s);
        std::mt19937_64 rng(7);
        std::uniform_int_distribution<int> pick(1, 15);
        for (int t = 0; t < 20; ++t) {
            const int i = pick(rng);
            const int j = pick(rng);
            const double d = 1e-5;
            Field up = phi;
            Field dn = phi;
            up.at(0, i, j) += d;
            dn.at(0, i, j) -= d;
            const double jp = objective(p, p.evaluate(up, eps, 1e-12, 1), 1e-12);
            const double jm = objective(p, p.evaluate(dn, eps, 1e-12, 1), 1e-12);
            const double fd = (jp - jm) / (2 * d);
            EXPECT_NEAR(fd / gr.at(0, i, j), 1.0, 1e-4) << "k=" << k << " node " << i << "," << j;
        }
    }
}

TEST(ObjectiveGradient, MirrorSymmetric)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 20);
    const ShapeProblem p(g, make_coefficients(g, {}), 1, 30.0);
    Field phi = sample_function(g, [](Point x) { return 0.5 + 0.4 * std::cos(3 * x.y) * std::sin(std::numbers::pi * x.x); });
    const auto s = p.evaluate(phi, 0.02, 1e-12, 1);
    const Field gr = objective_gradient(p, s);
    double scale = 0.0;
    for (double v : gr.values()) scale = std::max(scale, std::abs(v));
    for (int j = 0; j <= g.ny(); ++j) {
        for (int i = 0; i <= g.nx(); ++i) EXPECT_NEAR(gr.at(0, i, j), gr.at(0, g.nx() - i, j), 1e-10 * scale);
    }
}

TEST(ObjectiveGradient, ClusterSplitOnSquare)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 24);
    const ShapeProblem p(g, make_coefficients(g, {}), 2, 1.0);
    const auto s = p.evaluate(ones(g), 0.05, 1e-10, 1);
    ASSERT_TRUE(std::isfinite(s.next_lambda));
    try {
        objective_gradient(p, s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ClusterSplit);
    }
    // k = 3 contains the whole (2, 3) cluster.
    const ShapeProblem p3(g, make_coefficients(g, {}), 3, 1.0);
    EXPECT_NO_THROW(objective_gradient(p3, p3.evaluate(ones(g), 0.05, 1e-10, 1)));
}

TEST(ShapeProblem, EigenvaluesDecreaseWithDensity)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 16);
    const ShapeProblem p(g, make_coefficients(g, {}), 3, 0.0);
    const Field phi = random_density(g, 21);
    const auto base = p.evaluate(phi, 0.01, 1e-12, 1);
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> pick(1, 15);
    for (int t = 0; t < 20; ++t) {
        Field up = phi;
        up.at(0, pick(rng), pick(rng)) += 0.1;
        const auto s = p.evaluate(up, 0.01, 1e-12, 1);
        for (int i = 0; i < 3; ++i) EXPECT_LE(s.basis.lambdas[static_cast<std::size_t>(i)], base.basis.lambdas[static_cast<std::size_t>(i)] + 1e-10);
    }
}

TEST(Optimize, ZeroLambdaKeepsFullDensity)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 16);
    OptimizerOptions o;
    o.k = 1;
    o.Lambda = 0.0;
    o.phi0.kind = Phi0Spec::Kind::constant;
    o.phi0.value = 1.0;
    o.polish_rounds = 0;
    const auto s = optimize(g, make_coefficients(g, {}), o);
    for (int j = 1; j < g.ny(); ++j) {
        for (int i = 1; i < g.nx(); ++i) EXPECT_EQ(s.phi.at(0, i, j), 1.0);
    }
}

TEST(Optimize, HistoryMonotoneWithinPhases)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 32);
    OptimizerOptions o;
    o.k = 1;
    o.Lambda = 500;
    o.eps0 = 1e-2;
    o.eps_min = 1e-3;
    const auto s = optimize(g, make_coefficients(g, {}), o);
    ASSERT_GE(s.history.size(), 2u);
    for (std::size_t i = 1; i < s.history.size(); ++i) {
        if (s.history[i].eps == s.history[i - 1].eps) {
            EXPECT_LE(s.history[i].objective, s.history[i - 1].objective * (1 + 1e-12));
        }
    }
    for (double v : s.phi.values()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Optimize, TwoSeedsMergeIntoOneComponent)
{
    // One disk beats two half-volume disks for k = 1:
    // J(one, area a) = j^2 pi / a + L a  <  J(two) = 2 j^2 pi / a + L a.
    const double j = bessel_j01();
    const double a = 0.15;
    EXPECT_LT(j * j * std::numbers::pi / a, 2 * j * j * std::numbers::pi / a);

    const Grid g = build_grid({0, 0}, {1, 1}, 40);
    OptimizerOptions o;
    o.k = 1;
    o.Lambda = 500;
    o.eps0 = 1e-2;
    o.eps_min = 1e-3;
    o.phi0.kind = Phi0Spec::Kind::two_disks;
    o.phi0.center = {0.25, 0.5};
    o.phi0.radius = 0.18;
    o.phi0.center2 = {0.75, 0.5};
    o.phi0.radius2 = 0.16;
    const auto s = optimize(g, make_coefficients(g, {}), o);
    const auto map = threshold_components(s.phi, 0.5, 1);
    EXPECT_EQ(map.count, 1);
    EXPECT_FALSE(map.too_many_components);
}

TEST(Optimize, RejectsBadOptions)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 16);
    OptimizerOptions o;
    o.Lambda = 10;
    o.eps_factor = 1.5;
    EXPECT_THROW(optimize(g, make_coefficients(g, {}), o), Error);
    o.eps_factor = 0.5;
    o.eps0 = 1e-4;
    o.eps_min = 1e-3;
    EXPECT_THROW(optimize(g, make_coefficients(g, {}), o), Error);
}

TEST(ThresholdComponents, Examples)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 40);
    const Field one = sample_function(g, [](Point x) { return std::exp(-20 * ((x - Point{0.5, 0.5}).norm() * (x - Point{0.5, 0.5}).norm())); });
    const auto m1 = threshold_components(one, 0.5, 1);
    EXPECT_EQ(m1.count, 1);

    const Field two = sample_function(g, [](Point x) {
        return std::max(std::exp(-80 * std::pow((x - Point{0.25, 0.5}).norm(), 2)),
                        std::exp(-80 * std::pow((x - Point{0.75, 0.5}).norm(), 2)));
    });
    const auto m2 = threshold_components(two, 0.5, 2);
    EXPECT_EQ(m2.count, 2);
    EXPECT_FALSE(m2.interior_contact);
    EXPECT_FALSE(m2.too_many_components);
    const auto m2k1 = threshold_components(two, 0.5, 1);
    EXPECT_TRUE(m2k1.too_many_components);

    const Field low = sample_function(g, [](Point) { return 0.3; });
    try {
        threshold_components(low, 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyShape);
    }
}

TEST(ThresholdComponents, DiagonalNeighborsTouch)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 8);
    Field f(g, 1);
    f.at(0, 3, 3) = 1.0;
    f.at(0, 4, 4) = 1.0;
    const auto m = threshold_components(f, 0.5, 2);
    EXPECT_EQ(m.count, 2);
    EXPECT_TRUE(m.interior_contact);
}

TEST(ThresholdComponents, ChebyshevVolumeBound)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 24);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Field f = random_density(g, seed);
        const ShapeProblem p(g, make_coefficients(g, {}), 1, 1.0);
        for (double level : {0.3, 0.5, 0.7}) {
            const auto m = threshold_components(f, level);
            EXPECT_LE(p.volume(m.chi), p.volume(f) / level);
        }
    }
}

TEST(ThresholdComponents, EigenContentSumsToOne)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 24);
    const ShapeProblem p(g, make_coefficients(g, {}), 2, 1.0);
    Phi0Spec two;
    two.kind = Phi0Spec::Kind::two_disks;
    two.center = {0.3, 0.5};
    two.radius = 0.15;
    two.center2 = {0.72, 0.5};
    two.radius2 = 0.15;
    const auto s = p.evaluate(make_phi0(g, two), 1e-4, 1e-10, 1);
    auto m = threshold_components(s.phi, 0.5, 2);
    attach_eigen_content(m, s.basis, p.mass());
    ASSERT_EQ(m.eigen_content.size(), 2u);
    EXPECT_NEAR(m.eigen_content[0] + m.eigen_content[1], 1.0, 1e-3);
    EXPECT_GT(m.eigen_content[0], 0.3);
    EXPECT_GT(m.eigen_content[1], 0.3);
}
