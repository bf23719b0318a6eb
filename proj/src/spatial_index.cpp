#include "busroute/spatial_index.hpp"

#include <algorithm>
#include <cmath>

namespace busroute {

SpatialIndex::SpatialIndex(std::span<geo::LatLon const> points, double cell_km)
    : points_(points.begin(), points.end()), cell_km_{cell_km} {
  if (points_.empty()) return;
  double lat = 0;
  for (auto const& p : points_) lat += p.lat;
  proj_ = geo::LocalProjection{{lat / points_.size(), points_.front().lon}};
  for (std::uint32_t i = 0; i < points_.size(); ++i) {
    auto const xy = proj_.forward(points_[i]);
    auto const ix = static_cast<std::int64_t>(std::floor(xy.x / cell_km_));
    auto const iy = static_cast<std::int64_t>(std::floor(xy.y / cell_km_));
    cells_[cell_key(ix, iy)].push_back(i);
  }
}

std::vector<std::uint32_t> SpatialIndex::within(geo::LatLon center,
                                                double radius_km) const {
  std::vector<std::uint32_t> out;
  if (points_.empty() || radius_km < 0) return out;
  // The projection distorts distances slightly away from the reference
  // latitude; widen the cell scan and filter exactly.
  double const r = radius_km * 1.05 + 0.01;
  auto const xy = proj_.forward(center);
  auto const x0 = static_cast<std::int64_t>(std::floor((xy.x - r) / cell_km_));
  auto const x1 = static_cast<std::int64_t>(std::floor((xy.x + r) / cell_km_));
  auto const y0 = static_cast<std::int64_t>(std::floor((xy.y - r) / cell_km_));
  auto const y1 = static_cast<std::int64_t>(std::floor((xy.y + r) / cell_km_));
  for (auto ix = x0; ix <= x1; ++ix) {
    for (auto iy = y0; iy <= y1; ++iy) {
      auto const it = cells_.find(cell_key(ix, iy));
      if (it == cells_.end()) continue;
      for (auto const i : it->second) {
        if (geo::haversine_km(center, points_[i]) <= radius_km) out.push_back(i);
      }
    }
  }
  std::sort(begin(out), end(out));
  return out;
}

}  // namespace busroute
