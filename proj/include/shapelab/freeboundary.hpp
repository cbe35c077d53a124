#pragma once

#include <utility>
#include <vector>

#include "shapelab/grid.hpp"

namespace shapelab {

struct Segment {
    Point a;
    Point b;
};

/// Marching-squares pieces of {f = level} for one component of a field.
/// Crossings are linear interpolation along cell edges; a saddle cell is
/// resolved by the average of its four corners.
std::vector<Segment> level_set_segments(const Field& field, int comp, double level);

/// Total length of the segments clipped to the box [lo, hi].
double clipped_length(const std::vector<Segment>& segments, Point lo, Point hi);

/// Discrete free boundary {phi = level} with outward normals (along -grad phi).
struct BoundaryPolyline {
    std::vector<Point> points;
    std::vector<Point> normals;
    std::vector<bool> inside_D; // farther than 2h from the box boundary
    std::vector<std::pair<std::size_t, std::size_t>> segments;

    std::size_t size() const { return points.size(); }
    double length() const;
};

BoundaryPolyline extract_boundary(const Field& phi, double level = 0.5);

/// Per node, the distance to the nearest boundary segment.
Field distance_field(const Grid& grid, const BoundaryPolyline& boundary);

} // namespace shapelab
