#include "shapelab/freeboundary.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "shapelab/parallel.hpp"

namespace shapelab {

namespace {

struct EdgeRef {
    std::size_t id;    // 2 * node + (0 horizontal, 1 vertical)
    std::size_t from;  // node indices of the endpoints
    std::size_t to;
};

struct CellPair {
    EdgeRef a;
    EdgeRef b;
};

// Visits every marching-squares segment as a pair of crossed edges.
template <typename Visit>
void march(const Grid& g, std::span<const double> f, double level, Visit&& visit)
{
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            const std::array<std::size_t, 4> c = {g.node(i, j), g.node(i + 1, j), g.node(i + 1, j + 1),
                                                  g.node(i, j + 1)};
            int mask = 0;
            for (int q = 0; q < 4; ++q) {
                if (f[c[static_cast<std::size_t>(q)]] > level) mask |= 1 << q;
            }
            if (mask == 0 || mask == 15) continue;
            // e0 bottom, e1 right, e2 top, e3 left.
            const std::array<EdgeRef, 4> e = {EdgeRef{2 * c[0], c[0], c[1]}, EdgeRef{2 * c[1] + 1, c[1], c[2]},
                                              EdgeRef{2 * c[3], c[3], c[2]}, EdgeRef{2 * c[0] + 1, c[0], c[3]}};
            if (mask == 5 || mask == 10) {
                const double centre = 0.25 * (f[c[0]] + f[c[1]] + f[c[2]] + f[c[3]]);
                const bool joined = (centre > level) == (mask == 5);
                if (joined) {
                    visit(CellPair{e[0], e[1]});
                    visit(CellPair{e[2], e[3]});
                } else {
                    visit(CellPair{e[3], e[0]});
                    visit(CellPair{e[1], e[2]});
                }
                continue;
            }
            std::array<int, 2> hit{};
            int count = 0;
            for (int q = 0; q < 4; ++q) {
                const auto& ed = e[static_cast<std::size_t>(q)];
                if ((f[ed.from] > level) != (f[ed.to] > level)) hit[static_cast<std::size_t>(count++)] = q;
            }
            visit(CellPair{e[static_cast<std::size_t>(hit[0])], e[static_cast<std::size_t>(hit[1])]});
        }
    }
}

double edge_parameter(std::span<const double> f, const EdgeRef& e, double level)
{
    const double fa = f[e.from];
    const double fb = f[e.to];
    return std::clamp((level - fa) / (fb - fa), 0.0, 1.0);
}

Point lerp(Point a, Point b, double t) { return a + (b - a) * t; }

double point_segment_distance(Point p, Point a, Point b)
{
    const Point d = b - a;
    const double l2 = d.dot(d);
    const double t = l2 > 0.0 ? std::clamp((p - a).dot(d) / l2, 0.0, 1.0) : 0.0;
    return (p - (a + d * t)).norm();
}

} // namespace

std::vector<Segment> level_set_segments(const Field& field, int comp, double level)
{
    const Grid& g = field.grid();
    const auto f = field.component(comp);
    std::vector<Segment> out;
    auto at = [&](const EdgeRef& e) { return lerp(g.coord(e.from), g.coord(e.to), edge_parameter(f, e, level)); };
    march(g, f, level, [&](const CellPair& p) { out.push_back({at(p.a), at(p.b)}); });
    return out;
}

double clipped_length(const std::vector<Segment>& segments, Point lo, Point hi)
{
    double total = 0.0;
    for (const auto& s : segments) {
        // Liang-Barsky clipping against the window.
        const Point d = s.b - s.a;
        double t0 = 0.0;
        double t1 = 1.0;
        const double p[4] = {-d.x, d.x, -d.y, d.y};
        const double q[4] = {s.a.x - lo.x, hi.x - s.a.x, s.a.y - lo.y, hi.y - s.a.y};
        bool visible = true;
        for (int k = 0; k < 4 && visible; ++k) {
            if (p[k] == 0.0) {
                visible = q[k] >= 0.0;
            } else {
                const double r = q[k] / p[k];
                if (p[k] < 0.0) {
                    t0 = std::max(t0, r);
                } else {
                    t1 = std::min(t1, r);
                }
            }
        }
        if (visible && t1 > t0) total += (t1 - t0) * d.norm();
    }
    return total;
}

double BoundaryPolyline::length() const
{
    double s = 0.0;
    for (const auto& [a, b] : segments) s += (points[b] - points[a]).norm();
    return s;
}

BoundaryPolyline extract_boundary(const Field& phi, double level)
{
    if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::BadParams, "boundary level in (0, 1)");
    const Grid& g = phi.grid();
    const auto f = phi.component(0);
    const Field grad = central_gradient(phi, 0);
    const auto gx = grad.component(0);
    const auto gy = grad.component(1);

    BoundaryPolyline out;
    std::unordered_map<std::size_t, std::size_t> index;
    auto point_of = [&](const EdgeRef& e) {
        const auto it = index.find(e.id);
        if (it != index.end()) return it->second;
        const double t = edge_parameter(f, e, level);
        const Point p = lerp(g.coord(e.from), g.coord(e.to), t);
        Point n{-((1 - t) * gx[e.from] + t * gx[e.to]), -((1 - t) * gy[e.from] + t * gy[e.to])};
        if (n.norm() == 0.0) {
            // Flat gradient: point from the node above the level to the one below.
            n = f[e.from] > level ? g.coord(e.to) - g.coord(e.from) : g.coord(e.from) - g.coord(e.to);
        }
        n = n * (1.0 / n.norm());
        out.points.push_back(p);
        out.normals.push_back(n);
        out.inside_D.push_back(g.distance_to_boundary(p) > 2.0 * g.h());
        index.emplace(e.id, out.points.size() - 1);
        return out.points.size() - 1;
    };
    march(g, f, level, [&](const CellPair& p) {
        const std::size_t a = point_of(p.a);
        const std::size_t b = point_of(p.b);
        out.segments.emplace_back(a, b);
    });
    if (out.points.empty()) throw Error(ErrorCode::EmptyBoundary, "the level set does not cross the grid");
    return out;
}

Field distance_field(const Grid& grid, const BoundaryPolyline& boundary)
{
    if (boundary.points.empty()) throw Error(ErrorCode::EmptyBoundary, "empty boundary");
    Field out(grid, 1);
    auto v = out.component(0);
    parallel_for(grid.node_count(), [&](std::size_t n) {
        const Point p = grid.coord(n);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [a, b] : boundary.segments) {
            best = std::min(best, point_segment_distance(p, boundary.points[a], boundary.points[b]));
        }
        for (const auto& q : boundary.points) best = std::min(best, (p - q).norm());
        v[n] = best;
    });
    return out;
}

} // namespace shapelab
