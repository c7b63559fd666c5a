#include "pdfm/svg_map.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pdfm/csv.hpp"
#include "pdfm/errors.hpp"

namespace pdfm::bench {

namespace {

struct Rgb {
  int r, g, b;
};

// Linear blue -> white -> red ramp over [0, 1].
Rgb ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  if (t < 0.5) {
    const double u = t / 0.5;
    return {static_cast<int>(49 + u * (247 - 49)), static_cast<int>(54 + u * (247 - 54)),
            static_cast<int>(149 + u * (247 - 149))};
  }
  const double u = (t - 0.5) / 0.5;
  return {static_cast<int>(247 + u * (165 - 247)), static_cast<int>(247 + u * (0 - 247)),
          static_cast<int>(247 + u * (38 - 247))};
}

std::string hex(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

}  // namespace

void write_choropleth_svg(const std::filesystem::path& path,
                          const std::vector<MapPoint>& points, const std::string& title,
                          int grid_width) {
  if (points.empty()) throw ValidationError("write_choropleth_svg: no points");
  if (grid_width < 2) throw ConfigError("choropleth grid width must be >= 2");

  double lat_lo = points[0].pos.lat, lat_hi = lat_lo;
  double lon_lo = points[0].pos.lon, lon_hi = lon_lo;
  double vmin = points[0].value, vmax = vmin;
  for (const auto& p : points) {
    lat_lo = std::min(lat_lo, p.pos.lat);
    lat_hi = std::max(lat_hi, p.pos.lat);
    lon_lo = std::min(lon_lo, p.pos.lon);
    lon_hi = std::max(lon_hi, p.pos.lon);
    vmin = std::min(vmin, p.value);
    vmax = std::max(vmax, p.value);
  }
  if (vmax == vmin) vmax = vmin + 1.0;
  const double mid_lat = 0.5 * (lat_lo + lat_hi);
  const double kx = std::cos(mid_lat * 0.017453292519943295);
  const double span_x = std::max((lon_hi - lon_lo) * kx, 1e-9);
  const double span_y = std::max(lat_hi - lat_lo, 1e-9);

  const int nx = grid_width;
  const int ny = std::max(2, static_cast<int>(std::lround(nx * span_y / span_x)));
  std::vector<double> sum(static_cast<std::size_t>(nx) * ny, 0.0);
  std::vector<int> count(static_cast<std::size_t>(nx) * ny, 0);
  for (const auto& p : points) {
    int cx = static_cast<int>((p.pos.lon - lon_lo) * kx / span_x * nx);
    int cy = static_cast<int>((p.pos.lat - lat_lo) / span_y * ny);
    cx = std::clamp(cx, 0, nx - 1);
    cy = std::clamp(cy, 0, ny - 1);
    sum[static_cast<std::size_t>(cy) * nx + cx] += p.value;
    count[static_cast<std::size_t>(cy) * nx + cx] += 1;
  }

  const int cell = 10;
  const int margin = 30;
  const int legend_h = 46;
  const int width = nx * cell + 2 * margin;
  const int height = ny * cell + 2 * margin + legend_h;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << margin << "\" y=\"" << margin - 10
      << "\" font-family=\"sans-serif\" font-size=\"13\">" << title << "</text>\n";
  for (int cy = 0; cy < ny; ++cy) {
    for (int cx = 0; cx < nx; ++cx) {
      const auto idx = static_cast<std::size_t>(cy) * nx + cx;
      if (count[idx] == 0) continue;
      const double mean = sum[idx] / count[idx];
      const double t = (mean - vmin) / (vmax - vmin);
      // y axis points north-up.
      const int px = margin + cx * cell;
      const int py = margin + (ny - 1 - cy) * cell;
      svg << "<rect x=\"" << px << "\" y=\"" << py << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"" << hex(ramp(t)) << "\"/>\n";
    }
  }
  // Legend: gradient bar with min / mid / max labels.
  const int ly = margin + ny * cell + 16;
  const int lw = nx * cell;
  const int steps = 48;
  for (int s = 0; s < steps; ++s) {
    const double t = (s + 0.5) / steps;
    svg << "<rect x=\"" << margin + s * lw / steps << "\" y=\"" << ly << "\" width=\""
        << (lw + steps - 1) / steps << "\" height=\"12\" fill=\"" << hex(ramp(t))
        << "\"/>\n";
  }
  svg << "<text x=\"" << margin << "\" y=\"" << ly + 26
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << format_double(vmin)
      << "</text>\n";
  svg << "<text x=\"" << margin + lw / 2 << "\" y=\"" << ly + 26
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
      << format_double(0.5 * (vmin + vmax)) << "</text>\n";
  svg << "<text x=\"" << margin + lw << "\" y=\"" << ly + 26
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
      << format_double(vmax) << "</text>\n";
  svg << "</svg>\n";
  write_text_file(path, svg.str());
}

}  // namespace pdfm::bench
