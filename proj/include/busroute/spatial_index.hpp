#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "busroute/geo.hpp"

namespace busroute {

/// Uniform grid over a local projection. Queries return candidates filtered by
/// exact haversine distance.
class SpatialIndex {
 public:
  SpatialIndex() = default;
  SpatialIndex(std::span<geo::LatLon const> points, double cell_km);

  /// Indices of points within `radius_km` (haversine) of `center`, ascending.
  std::vector<std::uint32_t> within(geo::LatLon center, double radius_km) const;

  std::size_t size() const { return points_.size(); }

 private:
  static std::uint64_t cell_key(std::int64_t ix, std::int64_t iy) {
    return (static_cast<std::uint64_t>(ix) << 32) ^
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(iy));
  }

  std::vector<geo::LatLon> points_;
  geo::LocalProjection proj_;
  double cell_km_ = 1.0;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

}  // namespace busroute
