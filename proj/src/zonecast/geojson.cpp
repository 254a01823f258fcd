#include "zonecast/geojson.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "zonecast/errors.hpp"

namespace zonecast::geo_io {

using json = nlohmann::ordered_json;

namespace {

json parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError(path + ": cannot open file");
    try {
        return json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

geom::Ring parse_ring(const json& arr, const std::string& where) {
    if (!arr.is_array() || arr.size() < 3)
        throw FormatError(where + ": ring must be an array of at least 3 positions");
    geom::Ring ring;
    ring.reserve(arr.size());
    for (const json& pos : arr) {
        if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number())
            throw FormatError(where + ": position must be a [x, y] number pair");
        ring.push_back({pos[0].get<double>(), pos[1].get<double>()});
    }
    // GeoJSON rings repeat the first position at the end; store open.
    if (ring.size() >= 2 && ring.front().x == ring.back().x && ring.front().y == ring.back().y)
        ring.pop_back();
    return ring;
}

geom::Polygon parse_polygon_coords(const json& coords, const std::string& where) {
    if (!coords.is_array() || coords.empty())
        throw FormatError(where + ": Polygon coordinates must be a non-empty array of rings");
    geom::Polygon poly;
    poly.exterior = parse_ring(coords[0], where + " ring 0");
    for (std::size_t i = 1; i < coords.size(); ++i)
        poly.holes.push_back(parse_ring(coords[i], where + " ring " + std::to_string(i)));
    return poly;
}

geom::MultiPolygon parse_geometry(const json& geometry, const std::string& where) {
    if (!geometry.is_object() || !geometry.contains("type") || !geometry.contains("coordinates"))
        throw FormatError(where + ": geometry must have type and coordinates");
    const std::string type = geometry["type"].get<std::string>();
    geom::MultiPolygon mp;
    if (type == "Polygon") {
        mp.push_back(parse_polygon_coords(geometry["coordinates"], where));
    } else if (type == "MultiPolygon") {
        const json& parts = geometry["coordinates"];
        if (!parts.is_array() || parts.empty())
            throw FormatError(where + ": MultiPolygon coordinates must be a non-empty array");
        for (std::size_t i = 0; i < parts.size(); ++i)
            mp.push_back(parse_polygon_coords(parts[i], where + " part " + std::to_string(i)));
    } else {
        throw FormatError(where + ": unsupported geometry type '" + type + "'");
    }
    return mp;
}

std::string zone_id_from_properties(const json& feature, const std::string& where) {
    if (!feature.contains("properties") || !feature["properties"].is_object())
        throw FormatError(where + ": feature has no properties object");
    const json& props = feature["properties"];
    if (!props.contains("zone_id"))
        throw FormatError(where + ": properties lack zone_id");
    const json& zid = props["zone_id"];
    if (zid.is_string())
        return zid.get<std::string>();
    if (zid.is_number_integer())
        return std::to_string(zid.get<long long>());
    throw FormatError(where + ": zone_id must be a string or integer");
}

json ring_to_json(const geom::Ring& r) {
    json arr = json::array();
    for (const geom::Point& p : r)
        arr.push_back(json::array({p.x, p.y}));
    if (!r.empty())
        arr.push_back(json::array({r.front().x, r.front().y}));  // close per GeoJSON
    return arr;
}

json polygon_to_json(const geom::Polygon& p) {
    json coords = json::array();
    coords.push_back(ring_to_json(p.exterior));
    for (const geom::Ring& h : p.holes)
        coords.push_back(ring_to_json(h));
    return json{{"type", "Polygon"}, {"coordinates", std::move(coords)}};
}

json multipolygon_to_json(const geom::MultiPolygon& mp) {
    if (mp.size() == 1)
        return polygon_to_json(mp[0]);
    json coords = json::array();
    for (const geom::Polygon& p : mp) {
        json rings = json::array();
        rings.push_back(ring_to_json(p.exterior));
        for (const geom::Ring& h : p.holes)
            rings.push_back(ring_to_json(h));
        coords.push_back(std::move(rings));
    }
    return json{{"type", "MultiPolygon"}, {"coordinates", std::move(coords)}};
}

json meta_to_json(const MetaFields& meta) {
    json m = json::object();
    for (const auto& [k, v] : meta)
        m[k] = v;
    return m;
}

void write_json_file(const std::string& path, const json& doc) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw FormatError(path + ": cannot open for writing");
    out << doc.dump(1, '\t') << '\n';
    if (!out)
        throw FormatError(path + ": write failed");
}

}  // namespace

std::vector<geom::Zone> load_zones(const std::string& path) {
    const json doc = parse_file(path);
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
        !doc.contains("features") || !doc["features"].is_array())
        throw FormatError(path + ": expected a FeatureCollection with a features array");

    std::vector<geom::Zone> zones;
    std::set<std::string> seen;
    std::size_t idx = 0;
    for (const json& feature : doc["features"]) {
        const std::string where = path + " feature " + std::to_string(idx);
        if (!feature.is_object() || feature.value("type", "") != "Feature")
            throw FormatError(where + ": expected a Feature object");
        geom::Zone z;
        z.id = zone_id_from_properties(feature, where);
        if (!seen.insert(z.id).second)
            throw FormatError(path + ": duplicate zone_id '" + z.id + "'");
        if (!feature.contains("geometry"))
            throw FormatError(where + ": feature has no geometry");
        z.shape = parse_geometry(feature["geometry"], where);
        for (std::size_t pi = 0; pi < z.shape.size(); ++pi) {
            geom::validate_polygon(z.shape[pi], "zone " + z.id + (z.shape.size() > 1
                                       ? " part " + std::to_string(pi)
                                       : std::string()));
            geom::normalize_orientation(z.shape[pi]);
        }
        z.area = geom::multipolygon_area(z.shape);
        if (z.area <= 0.0)
            throw GeometryError("zone " + z.id + " has zero area");
        zones.push_back(std::move(z));
        ++idx;
    }
    if (zones.empty())
        throw FormatError(path + ": no features in zone file");
    return zones;
}

geom::BoundingRegion load_region(const std::string& path) {
    const json doc = parse_file(path);
    const json* geometry = nullptr;
    if (doc.is_object() && doc.value("type", "") == "FeatureCollection") {
        if (!doc.contains("features") || !doc["features"].is_array() || doc["features"].size() != 1)
            throw FormatError(path + ": region FeatureCollection must contain exactly one feature");
        geometry = &doc["features"][0].at("geometry");
    } else if (doc.is_object() && doc.value("type", "") == "Feature") {
        if (!doc.contains("geometry"))
            throw FormatError(path + ": region feature has no geometry");
        geometry = &doc["geometry"];
    } else if (doc.is_object() && (doc.value("type", "") == "Polygon")) {
        geometry = &doc;
    } else {
        throw FormatError(path + ": expected a Feature, single-feature FeatureCollection, or Polygon");
    }

    const geom::MultiPolygon mp = parse_geometry(*geometry, path + " region");
    if (mp.size() != 1)
        throw FormatError(path + ": region must be a single polygon");
    geom::BoundingRegion region;
    region.shape = mp[0];
    if (!region.shape.holes.empty())
        throw GeometryError("bounding region must not contain holes");
    geom::validate_polygon(region.shape, "bounding region");
    geom::normalize_orientation(region.shape);
    return region;
}

void write_cells(const std::string& path, const geom::VoronoiTessellation& tess,
                 const MetaFields& meta) {
    json doc;
    doc["_meta"] = meta_to_json(meta);
    doc["type"] = "FeatureCollection";
    json features = json::array();
    for (const geom::VoronoiCell& c : tess.cells) {
        json f;
        f["type"] = "Feature";
        f["properties"] = json{{"site_id", c.site}, {"area", c.area}};
        f["geometry"] = polygon_to_json(c.shape);
        features.push_back(std::move(f));
    }
    doc["features"] = std::move(features);
    write_json_file(path, doc);
}

void write_zones(const std::string& path, const std::vector<geom::Zone>& zones,
                 const MetaFields& meta) {
    json doc;
    doc["_meta"] = meta_to_json(meta);
    doc["type"] = "FeatureCollection";
    json features = json::array();
    for (const geom::Zone& z : zones) {
        json f;
        f["type"] = "Feature";
        f["properties"] = json{{"zone_id", z.id}};
        f["geometry"] = multipolygon_to_json(z.shape);
        features.push_back(std::move(f));
    }
    doc["features"] = std::move(features);
    write_json_file(path, doc);
}

void write_region(const std::string& path, const geom::BoundingRegion& region,
                  const MetaFields& meta) {
    json doc;
    doc["_meta"] = meta_to_json(meta);
    doc["type"] = "Feature";
    doc["properties"] = json::object();
    doc["geometry"] = polygon_to_json(region.shape);
    write_json_file(path, doc);
}

}  // namespace zonecast::geo_io
