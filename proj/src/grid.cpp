#include "shapelab/grid.hpp"

#include <algorithm>
#include <sstream>

namespace shapelab {

Grid::Grid(Point origin, Point extent, int nx, int ny)
    : origin_(origin), extent_(extent), nx_(nx), ny_(ny), h_(extent.x / nx)
{
}

bool Grid::contains(Point p, double slack) const
{
    return p.x >= origin_.x - slack && p.x <= origin_.x + extent_.x + slack && p.y >= origin_.y - slack
        && p.y <= origin_.y + extent_.y + slack;
}

double Grid::distance_to_boundary(Point p) const
{
    const double dx = std::min(p.x - origin_.x, origin_.x + extent_.x - p.x);
    const double dy = std::min(p.y - origin_.y, origin_.y + extent_.y - p.y);
    return std::max(0.0, std::min(dx, dy));
}

Grid build_grid(Point origin, Point extent, int nx)
{
    if (nx < 4) {
        throw Error(ErrorCode::BadResolution, "nx must be at least 4, got " + std::to_string(nx));
    }
    if (!(extent.x > 0.0) || !(extent.y > 0.0)) {
        throw Error(ErrorCode::BadParams, "box extent must be positive");
    }
    const int ny = static_cast<int>(std::lround(nx * extent.y / extent.x));
    const double hx = extent.x / nx;
    if (ny < 4) {
        throw Error(ErrorCode::BadResolution, "derived ny must be at least 4, got " + std::to_string(ny));
    }
    const double hy = extent.y / ny;
    if (std::abs(hx - hy) > 1e-9 * hx) {
        std::ostringstream msg;
        msg << "extent (" << extent.x << ", " << extent.y << ") with nx=" << nx << " gives hx=" << hx
            << ", hy=" << hy;
        throw Error(ErrorCode::NonSquareCells, msg.str());
    }
    return Grid(origin, extent, nx, ny);
}

Field::Field(const Grid& grid, int ncomp)
    : grid_(grid), ncomp_(ncomp), values_(static_cast<std::size_t>(ncomp) * grid.node_count(), 0.0)
{
    if (ncomp < 1) {
        throw Error(ErrorCode::BadParams, "field needs at least one component");
    }
}

Field::Field(const Grid& grid, int ncomp, std::vector<double> values)
    : grid_(grid), ncomp_(ncomp), values_(std::move(values))
{
    if (ncomp < 1) {
        throw Error(ErrorCode::BadParams, "field needs at least one component");
    }
    if (values_.size() != static_cast<std::size_t>(ncomp) * grid.node_count()) {
        throw Error(ErrorCode::DimensionMismatch, "field value count does not match grid");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::BadParams, "field values must be finite");
        }
    }
}

namespace {

struct CellCoord {
    int i;
    int j;
    double tx;
    double ty;
};

// Snaps lattice coordinates that are within roundoff of a node so that node
// samples are reproduced exactly.
double snap(double s)
{
    const double r = std::round(s);
    return std::abs(s - r) < 1e-9 ? r : s;
}

CellCoord locate(const Grid& g, Point p)
{
    if (!g.contains(p, 1e-12 * std::max(g.extent().x, g.extent().y))) {
        std::ostringstream msg;
        msg << "point (" << p.x << ", " << p.y << ") lies outside the box";
        throw Error(ErrorCode::OutOfDomain, msg.str());
    }
    const double sx = std::clamp(snap((p.x - g.origin().x) / g.h()), 0.0, static_cast<double>(g.nx()));
    const double sy = std::clamp(snap((p.y - g.origin().y) / g.h()), 0.0, static_cast<double>(g.ny()));
    const int i = std::min(static_cast<int>(std::floor(sx)), g.nx() - 1);
    const int j = std::min(static_cast<int>(std::floor(sy)), g.ny() - 1);
    return {i, j, sx - i, sy - j};
}

double interpolate(std::span<const double> v, const Grid& g, const CellCoord& c)
{
    const double v00 = v[g.node(c.i, c.j)];
    const double v10 = v[g.node(c.i + 1, c.j)];
    const double v01 = v[g.node(c.i, c.j + 1)];
    const double v11 = v[g.node(c.i + 1, c.j + 1)];
    if (c.tx == 0.0 && c.ty == 0.0) return v00;
    if (c.tx == 1.0 && c.ty == 0.0) return v10;
    if (c.tx == 0.0 && c.ty == 1.0) return v01;
    if (c.tx == 1.0 && c.ty == 1.0) return v11;
    const double lo = (1.0 - c.tx) * v00 + c.tx * v10;
    const double hi = (1.0 - c.tx) * v01 + c.tx * v11;
    return (1.0 - c.ty) * lo + c.ty * hi;
}

} // namespace

std::vector<double> bilinear_sample(const Field& field, Point p)
{
    const auto c = locate(field.grid(), p);
    std::vector<double> out(static_cast<std::size_t>(field.ncomp()));
    for (int k = 0; k < field.ncomp(); ++k) {
        out[static_cast<std::size_t>(k)] = interpolate(field.component(k), field.grid(), c);
    }
    return out;
}

double bilinear_sample(const Field& field, int comp, Point p)
{
    if (comp < 0 || comp >= field.ncomp()) {
        throw Error(ErrorCode::DimensionMismatch, "component index out of range");
    }
    return interpolate(field.component(comp), field.grid(), locate(field.grid(), p));
}

Field central_gradient(const Field& field, int comp)
{
    const Grid& g = field.grid();
    const auto v = field.component(comp);
    Field out(g, 2);
    auto gx = out.component(0);
    auto gy = out.component(1);
    const double h = g.h();
    for (int j = 0; j <= g.ny(); ++j) {
        for (int i = 0; i <= g.nx(); ++i) {
            const int il = std::max(i - 1, 0);
            const int ir = std::min(i + 1, g.nx());
            const int jl = std::max(j - 1, 0);
            const int jr = std::min(j + 1, g.ny());
            gx[g.node(i, j)] = (v[g.node(ir, j)] - v[g.node(il, j)]) / ((ir - il) * h);
            gy[g.node(i, j)] = (v[g.node(i, jr)] - v[g.node(i, jl)]) / ((jr - jl) * h);
        }
    }
    return out;
}

} // namespace shapelab
