#pragma once

#include <cmath>
#include <string>

#include "zonecast/geometry.hpp"

namespace zonecast {

/// Maps input coordinates into the plane the geometry runs in.
///
/// `planar` passes coordinates through untouched (synthetic scenarios emit
/// planar units directly). `equirectangular` treats inputs as (lon, lat)
/// degrees and projects about a reference point — adequate at zone scale,
/// where distances are what matter, not global shape.
struct Projection {
    enum class Mode { planar, equirectangular };

    Mode mode = Mode::planar;
    double lon0 = 0.0;  // reference point, degrees (equirectangular only)
    double lat0 = 0.0;

    static constexpr double kEarthRadiusMeters = 6371000.0;

    geom::Point apply(double x_or_lon, double y_or_lat) const {
        if (mode == Mode::planar)
            return {x_or_lon, y_or_lat};
        constexpr double deg = 3.14159265358979323846 / 180.0;
        const double k = kEarthRadiusMeters * deg;
        return {(x_or_lon - lon0) * k * std::cos(lat0 * deg), (y_or_lat - lat0) * k};
    }

    void project(geom::Ring& r) const {
        for (geom::Point& p : r)
            p = apply(p.x, p.y);
    }
    void project(geom::Polygon& p) const {
        project(p.exterior);
        for (geom::Ring& h : p.holes)
            project(h);
    }
    void project(geom::MultiPolygon& mp) const {
        for (geom::Polygon& p : mp)
            project(p);
    }

    /// Projection centered on the mean vertex of the region exterior.
    static Projection equirectangular_about(const geom::Polygon& region_degrees) {
        Projection proj;
        proj.mode = Mode::equirectangular;
        double sx = 0.0, sy = 0.0;
        for (const geom::Point& p : region_degrees.exterior) {
            sx += p.x;
            sy += p.y;
        }
        const double n = static_cast<double>(region_degrees.exterior.size());
        proj.lon0 = sx / n;
        proj.lat0 = sy / n;
        return proj;
    }
};

}  // namespace zonecast
