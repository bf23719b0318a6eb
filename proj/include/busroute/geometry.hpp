#pragma once

#include <span>
#include <vector>

#include "busroute/geo.hpp"

namespace busroute::geometry {

using geo::XY;

using Ring = std::vector<XY>;  // implicitly closed; outer rings counter-clockwise

struct Polygon {
  Ring outer;
  std::vector<Ring> holes;
};

using MultiPolygon = std::vector<Polygon>;

struct Box {
  double min_x = 0, min_y = 0, max_x = 0, max_y = 0;
  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
};

/// Bounding box grown by `fraction` of its size on every side (at least
/// `min_margin`).
Box bounding_box(std::span<XY const> pts, double fraction, double min_margin);

double signed_area(Ring const& r);

/// Convex cell with, per edge i (vertex i to i+1), the index of the site whose
/// bisector produced it, or -1 for the bounding box.
struct Cell {
  Ring vertices;
  std::vector<int> edge_site;
};

/// Voronoi cells of the sites clipped to `box`. Coincident sites must be
/// separated by the caller.
std::vector<Cell> voronoi_cells(std::span<XY const> sites, Box const& box);

/// Boundary of the union of the cells flagged in `member` (indexed like the
/// cells): edges shared between two member cells cancel, the remainder is
/// chained into rings and grouped into polygons with holes.
MultiPolygon union_cells(std::span<Cell const> cells, std::span<bool const> member,
                         double tolerance);

/// Even-odd test; points within `tolerance` of an edge count as inside.
bool contains(MultiPolygon const& mp, XY p, double tolerance);
bool ring_contains(Ring const& r, XY p);
double distance_to_segment(XY p, XY a, XY b);

}  // namespace busroute::geometry
