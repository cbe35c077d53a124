#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "shapelab/error.hpp"

namespace shapelab {

struct Point {
    double x = 0.0;
    double y = 0.0;

    Point operator+(Point o) const { return {x + o.x, y + o.y}; }
    Point operator-(Point o) const { return {x - o.x, y - o.y}; }
    Point operator*(double s) const { return {x * s, y * s}; }
    double dot(Point o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
};

/// Node-centered uniform lattice over the box D with square cells.
///
/// Nodes are numbered row-major: node (i, j) has index j * (nx + 1) + i and
/// sits at origin + (i h, j h). Interior nodes (1 <= i < nx, 1 <= j < ny) are
/// the unknowns of every solver; the boundary ring carries the Dirichlet
/// condition of D.
class Grid {
public:
    Grid() = default;
    Grid(Point origin, Point extent, int nx, int ny);

    Point origin() const { return origin_; }
    Point extent() const { return extent_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double h() const { return h_; }

    int nodes_x() const { return nx_ + 1; }
    int nodes_y() const { return ny_ + 1; }
    std::size_t node_count() const
    {
        return static_cast<std::size_t>(nx_ + 1) * static_cast<std::size_t>(ny_ + 1);
    }
    std::size_t node(int i, int j) const
    {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_ + 1) + static_cast<std::size_t>(i);
    }
    Point coord(int i, int j) const { return {origin_.x + i * h_, origin_.y + j * h_}; }
    Point coord(std::size_t node) const
    {
        return coord(static_cast<int>(node % static_cast<std::size_t>(nx_ + 1)),
                     static_cast<int>(node / static_cast<std::size_t>(nx_ + 1)));
    }
    bool on_boundary(int i, int j) const { return i == 0 || j == 0 || i == nx_ || j == ny_; }

    std::size_t interior_count() const
    {
        return static_cast<std::size_t>(nx_ - 1) * static_cast<std::size_t>(ny_ - 1);
    }
    /// Index of interior node (i, j) in solver vectors.
    std::size_t interior(int i, int j) const
    {
        return static_cast<std::size_t>(j - 1) * static_cast<std::size_t>(nx_ - 1) + static_cast<std::size_t>(i - 1);
    }
    /// Node index of interior unknown `k`.
    std::size_t node_of_interior(std::size_t k) const
    {
        const auto w = static_cast<std::size_t>(nx_ - 1);
        return node(static_cast<int>(k % w) + 1, static_cast<int>(k / w) + 1);
    }

    bool contains(Point p, double slack = 0.0) const;
    /// Euclidean distance from p to the boundary of the box (p inside).
    double distance_to_boundary(Point p) const;

    friend bool operator==(const Grid& a, const Grid& b)
    {
        return a.nx_ == b.nx_ && a.ny_ == b.ny_ && a.origin_.x == b.origin_.x && a.origin_.y == b.origin_.y
            && a.h_ == b.h_;
    }

private:
    Point origin_{};
    Point extent_{1.0, 1.0};
    int nx_ = 0;
    int ny_ = 0;
    double h_ = 0.0;
};

/// Builds a grid with nx cells along x; ny is derived so that cells are square.
Grid build_grid(Point origin, Point extent, int nx);

/// Nodal data with `ncomp` components, stored component-major
/// (component c occupies values[c * node_count, (c + 1) * node_count)).
class Field {
public:
    Field() = default;
    Field(const Grid& grid, int ncomp);
    Field(const Grid& grid, int ncomp, std::vector<double> values);

    const Grid& grid() const { return grid_; }
    int ncomp() const { return ncomp_; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    std::span<const double> component(int c) const
    {
        return std::span<const double>(values_).subspan(static_cast<std::size_t>(c) * grid_.node_count(),
                                                        grid_.node_count());
    }
    std::span<double> component(int c)
    {
        return std::span<double>(values_).subspan(static_cast<std::size_t>(c) * grid_.node_count(),
                                                  grid_.node_count());
    }

    double at(int c, int i, int j) const { return component(c)[grid_.node(i, j)]; }
    double& at(int c, int i, int j) { return component(c)[grid_.node(i, j)]; }

private:
    Grid grid_;
    int ncomp_ = 0;
    std::vector<double> values_;
};

/// Bilinear interpolant of every component at p.
std::vector<double> bilinear_sample(const Field& field, Point p);

/// Bilinear interpolant of one component at p.
double bilinear_sample(const Field& field, int comp, Point p);

/// Samples the scalar field f(x) on every node.
template <typename F>
Field sample_function(const Grid& grid, F&& f)
{
    Field out(grid, 1);
    auto v = out.component(0);
    for (int j = 0; j <= grid.ny(); ++j) {
        for (int i = 0; i <= grid.nx(); ++i) {
            v[grid.node(i, j)] = f(grid.coord(i, j));
        }
    }
    return out;
}

/// Nodal gradient by central differences (one-sided on the box boundary).
/// Returns a 2-component field (d/dx, d/dy) for component `comp`.
Field central_gradient(const Field& field, int comp);

} // namespace shapelab
