#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace busroute::geo {

constexpr double kEarthRadiusKm = 6371.0088;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Great-circle distance in kilometres.
inline double haversine_km(LatLon a, LatLon b) {
  double const dlat = deg2rad(b.lat - a.lat);
  double const dlon = deg2rad(b.lon - a.lon);
  double const s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(deg2rad(a.lat)) * std::cos(deg2rad(b.lat)) *
                       std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

/// Initial bearing from `from` towards `to`, degrees clockwise from north in
/// [0, 360).
inline double bearing_deg(LatLon from, LatLon to) {
  double const p1 = deg2rad(from.lat);
  double const p2 = deg2rad(to.lat);
  double const dl = deg2rad(to.lon - from.lon);
  double const y = std::sin(dl) * std::cos(p2);
  double const x =
      std::cos(p1) * std::sin(p2) - std::sin(p1) * std::cos(p2) * std::cos(dl);
  double b = rad2deg(std::atan2(y, x));
  if (b < 0) b += 360.0;
  if (b >= 360.0) b -= 360.0;
  return b;
}

/// Compass sector (0 = north, clockwise) of a bearing for `sectors` equal bins
/// centred on the cardinal directions.
inline int bearing_sector(double bearing, int sectors = 16) {
  double const width = 360.0 / sectors;
  int s = static_cast<int>(std::floor((bearing + width / 2.0) / width));
  return ((s % sectors) + sectors) % sectors;
}

struct XY {
  double x = 0.0;
  double y = 0.0;
};

/// Local equirectangular projection (km) around a reference latitude. Good
/// enough at city scale, where all planar geometry in this library happens.
class LocalProjection {
 public:
  LocalProjection() = default;
  explicit LocalProjection(LatLon ref)
      : ref_{ref}, kx_{deg2rad(1.0) * kEarthRadiusKm * std::cos(deg2rad(ref.lat))},
        ky_{deg2rad(1.0) * kEarthRadiusKm} {}

  XY forward(LatLon p) const {
    return {(p.lon - ref_.lon) * kx_, (p.lat - ref_.lat) * ky_};
  }
  LatLon inverse(XY p) const {
    return {ref_.lat + p.y / ky_, ref_.lon + p.x / kx_};
  }

 private:
  LatLon ref_{};
  double kx_ = 1.0;
  double ky_ = 1.0;
};

}  // namespace busroute::geo
