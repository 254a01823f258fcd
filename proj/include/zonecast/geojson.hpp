#pragma once

#include <string>
#include <utility>
#include <vector>

#include "zonecast/geometry.hpp"

namespace zonecast::geo_io {

/// Ordered key/value pairs rendered into the `_meta` object that leads every
/// JSON output file.
using MetaFields = std::vector<std::pair<std::string, std::string>>;

/// Reads a FeatureCollection of Polygon/MultiPolygon features, each carrying
/// a `zone_id` property. Rings are validated and orientations normalized;
/// areas are filled from the file's coordinate system (callers re-derive them
/// after any projection). Throws FormatError on schema problems, GeometryError
/// on bad rings.
std::vector<geom::Zone> load_zones(const std::string& path);

/// Reads the clipping region: a single Feature (or FeatureCollection of one,
/// or a bare geometry object) with Polygon geometry and no holes.
geom::BoundingRegion load_region(const std::string& path);

/// Writes the tessellation as a FeatureCollection with `site_id` and `area`
/// properties per cell, `_meta` first.
void write_cells(const std::string& path, const geom::VoronoiTessellation& tess,
                 const MetaFields& meta);

/// Writes zones back out (used by the scenario generator).
void write_zones(const std::string& path, const std::vector<geom::Zone>& zones,
                 const MetaFields& meta);

/// Writes a single-feature region file.
void write_region(const std::string& path, const geom::BoundingRegion& region,
                  const MetaFields& meta);

}  // namespace zonecast::geo_io
