#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "shapelab/freeboundary.hpp"
#include "shapelab/parallel.hpp"

using namespace shapelab;

namespace {

Field vertical_interface(const Grid& g)
{
    const double h = g.h();
    return sample_function(g, [&](Point p) { return std::clamp(0.5 + (0.5 - p.x) / h * 0.5, 0.0, 1.0); });
}

Field radial_ramp(const Grid& g, Point c, double r)
{
    const double h = g.h();
    return sample_function(g, [&](Point p) { return std::clamp(0.5 + (r - (p - c).norm()) / (4 * h), 0.0, 1.0); });
}

} // namespace

TEST(ExtractBoundary, VerticalInterface)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 32);
    const auto b = extract_boundary(vertical_interface(g));
    ASSERT_GT(b.size(), 0u);
    for (std::size_t i = 0; i < b.size(); ++i) {
        EXPECT_NEAR(b.points[i].x, 0.5, 1e-9);
        EXPECT_NEAR(b.normals[i].x, 1.0, 1e-12);
        EXPECT_NEAR(b.normals[i].y, 0.0, 1e-12);
    }
    EXPECT_NEAR(b.length(), 1.0, 1e-9);
}

TEST(ExtractBoundary, CircleFromRadialRamp)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 128);
    const Point c{0.48, 0.53};
    const double r = 0.3;
    const Field phi = radial_ramp(g, c, r);
    const auto b = extract_boundary(phi);
    for (std::size_t i = 0; i < b.size(); ++i) {
        EXPECT_NEAR((b.points[i] - c).norm(), r, g.h());
        EXPECT_NEAR(b.normals[i].norm(), 1.0, 1e-9);
        const Point radial = (b.points[i] - c) * (1.0 / (b.points[i] - c).norm());
        EXPECT_GT(b.normals[i].dot(radial), 0.99);
        EXPECT_NEAR(bilinear_sample(phi, 0, b.points[i]), 0.5, 1e-9);
        EXPECT_TRUE(b.inside_D[i]);
    }
    EXPECT_NEAR(b.length() / (2 * std::numbers::pi * r), 1.0, 2e-2);
}

TEST(ExtractBoundary, InsideFlagNearBox)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 32);
    const auto b = extract_boundary(vertical_interface(g));
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double y = b.points[i].y;
        EXPECT_EQ(b.inside_D[i], y > 2 * g.h() + 1e-12 && y < 1 - 2 * g.h() - 1e-12);
    }
}

TEST(ExtractBoundary, EmptyWhenNoCrossing)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 8);
    const Field one = sample_function(g, [](Point) { return 1.0; });
    try {
        extract_boundary(one);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyBoundary);
    }
}

TEST(ExtractBoundary, SaddleResolvedByCellCentre)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 4);
    Field f(g, 1);
    // Cell (1,1): corners (1,1) and (2,2) high.
    f.at(0, 1, 1) = 1.0;
    f.at(0, 2, 2) = 1.0;
    const auto low = level_set_segments(f, 0, 0.6);  // centre 0.5 below: high corners separated
    const auto high = level_set_segments(f, 0, 0.4); // centre 0.5 above: high corners joined
    auto crosses_centre = [&](const std::vector<Segment>& s) {
        // Joined corners leave segments cutting off the two low corners (1,2) and (2,1).
        int cut = 0;
        for (const auto& seg : s) {
            const Point m = (seg.a + seg.b) * 0.5;
            if (m.x > 0.25 && m.x < 0.5 && m.y > 0.25 && m.y < 0.5) {
                const bool near_low = (m - g.coord(1, 2)).norm() < 0.15 || (m - g.coord(2, 1)).norm() < 0.15;
                cut += near_low ? 1 : 0;
            }
        }
        return cut;
    };
    EXPECT_EQ(crosses_centre(high), 2);
    EXPECT_EQ(crosses_centre(low), 0);
}

TEST(DistanceField, VerticalAndCircle)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 64);
    const auto d1 = distance_field(g, extract_boundary(vertical_interface(g)));
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        EXPECT_NEAR(d1.component(0)[n], std::abs(g.coord(n).x - 0.5), g.h() / 2);
        if (std::abs(g.coord(n).x - 0.5) < 1e-12) EXPECT_EQ(d1.component(0)[n], 0.0);
    }
    const Point c{0.5, 0.5};
    const double r = 0.27;
    const auto d2 = distance_field(g, extract_boundary(radial_ramp(g, c, r)));
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        EXPECT_NEAR(d2.component(0)[n], std::abs((g.coord(n) - c).norm() - r), g.h());
    }
}

TEST(DistanceField, LipschitzAcrossNeighbours)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 48);
    const auto d = distance_field(g, extract_boundary(radial_ramp(g, {0.4, 0.55}, 0.2)));
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            for (auto [a, b] : {std::pair{1, 0}, std::pair{0, 1}, std::pair{1, 1}}) {
                EXPECT_LE(std::abs(d.at(0, i, j) - d.at(0, i + a, j + b)), g.h() * std::sqrt(2.0) + 1e-12);
            }
        }
    }
}

TEST(DistanceField, IndependentOfWorkerCount)
{
    const Grid g = build_grid({0, 0}, {1, 1}, 40);
    const auto b = extract_boundary(radial_ramp(g, {0.5, 0.5}, 0.3));
    set_worker_threads(1);
    const auto one = distance_field(g, b);
    set_worker_threads(3);
    const auto three = distance_field(g, b);
    set_worker_threads(0);
    for (std::size_t n = 0; n < g.node_count(); ++n) EXPECT_EQ(one.component(0)[n], three.component(0)[n]);
}

TEST(ClippedLength, SquareAndWindow)
{
    const Grid g = build_grid({-1, -1}, {3, 3}, 60);
    const Field sq = sample_function(g, [](Point p) {
        return (p.x > 0.025 && p.x < 1.025 && p.y > 0.025 && p.y < 1.025) ? 1.0 : 0.0;
    });
    const auto segs = level_set_segments(sq, 0, 0.5);
    double total = 0.0;
    for (const auto& s : segs) total += (s.b - s.a).norm();
    // Corner cells cut a diagonal of length h/sqrt(2) instead of two half edges.
    const double h = g.h();
    EXPECT_NEAR(total, 4.0 - 4 * h * (1 - 1 / std::sqrt(2.0)), 1e-12);
    EXPECT_NEAR(clipped_length(segs, {-1, -1}, {2, 2}), total, 1e-12);
    const double left = clipped_length(segs, {-1, -1}, {0.5, 2});
    const double right = clipped_length(segs, {0.5, -1}, {2, 2});
    EXPECT_NEAR(left + right, total, 1e-12);
    // The square is centred at x = 0.525.
    EXPECT_NEAR(right - left, 4 * 0.025, 1e-12);
    EXPECT_EQ(clipped_length(segs, {1.5, 1.5}, {2, 2}), 0.0);
    const Field zero(g, 1);
    EXPECT_TRUE(level_set_segments(zero, 0, 0.0).empty());
}
