#include "pdfm/geo.hpp"

#include <cmath>
#include <string>

#include "pdfm/errors.hpp"

namespace pdfm {

namespace {

constexpr double kDegToRad = 0.017453292519943295769;

void check(const LatLon& p) {
  if (!(p.lat >= -90.0 && p.lat <= 90.0))
    throw ValidationError("latitude out of range: " + std::to_string(p.lat));
  if (!(p.lon >= -180.0 && p.lon <= 180.0))
    throw ValidationError("longitude out of range: " + std::to_string(p.lon));
}

}  // namespace

double geodesic_distance_miles(const LatLon& a, const LatLon& b) {
  check(a);
  check(b);
  if (a.lat == b.lat && a.lon == b.lon) return 0.0;
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlam = (b.lon - a.lon) * kDegToRad;
  const double sp = std::sin(0.5 * dphi);
  const double sl = std::sin(0.5 * dlam);
  const double h = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
  return 2.0 * kEarthRadiusMiles * std::asin(std::min(1.0, std::sqrt(h)));
}

}  // namespace pdfm
