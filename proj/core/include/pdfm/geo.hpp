#pragma once

namespace pdfm {

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

/// Mean Earth radius in miles used for all geodesic math.
inline constexpr double kEarthRadiusMiles = 3958.761;

/// Haversine great-circle distance between two points, in miles.
/// Throws ValidationError for coordinates outside [-90,90] x [-180,180].
double geodesic_distance_miles(const LatLon& a, const LatLon& b);

}  // namespace pdfm
