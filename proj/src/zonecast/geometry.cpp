#include "zonecast/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>

#include "zonecast/errors.hpp"
#include "zonecast/parallel.hpp"

namespace zonecast::geom {

namespace {

inline double cross3(Point o, Point a, Point b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline double dist2(Point a, Point b) {
    const double dx = a.x - b.x, dy = a.y - b.y;
    return dx * dx + dy * dy;
}

inline bool same_point(Point a, Point b) {
    return a.x == b.x && a.y == b.y;
}

double point_segment_dist2(Point p, Point a, Point b) {
    const double abx = b.x - a.x, aby = b.y - a.y;
    const double apx = p.x - a.x, apy = p.y - a.y;
    const double len2 = abx * abx + aby * aby;
    double t = len2 > 0.0 ? (apx * abx + apy * aby) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double cx = a.x + t * abx, cy = a.y + t * aby;
    const double dx = p.x - cx, dy = p.y - cy;
    return dx * dx + dy * dy;
}

// Collinearity with (a, b) is assumed; checks p against the segment's box.
bool on_segment(Point a, Point b, Point p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

// Any contact at all, proper crossings and endpoint touches alike.
bool segments_intersect(Point p1, Point p2, Point q1, Point q2) {
    const double d1 = cross3(q1, q2, p1);
    const double d2 = cross3(q1, q2, p2);
    const double d3 = cross3(p1, p2, q1);
    const double d4 = cross3(p1, p2, q2);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
        ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    if (d1 == 0 && on_segment(q1, q2, p1))
        return true;
    if (d2 == 0 && on_segment(q1, q2, p2))
        return true;
    if (d3 == 0 && on_segment(p1, p2, q1))
        return true;
    if (d4 == 0 && on_segment(p1, p2, q2))
        return true;
    return false;
}

int ring_winding(const Ring& r, Point p) {
    int wn = 0;
    const std::size_t n = r.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = r[i];
        const Point& b = r[(i + 1) % n];
        if (a.y <= p.y) {
            if (b.y > p.y && cross3(a, b, p) > 0)
                ++wn;
        } else {
            if (b.y <= p.y && cross3(a, b, p) < 0)
                --wn;
        }
    }
    return wn;
}

bool ring_near_boundary(const Ring& r, Point p, double eps) {
    const std::size_t n = r.size();
    const double e2 = eps * eps;
    for (std::size_t i = 0; i < n; ++i) {
        if (point_segment_dist2(p, r[i], r[(i + 1) % n]) <= e2)
            return true;
    }
    return false;
}

// Keeps the side where (p - m)·d <= 0, i.e. points nearer the owning site.
Ring clip_half_plane(const Ring& in, Point m, Point d) {
    Ring out;
    out.reserve(in.size() + 2);
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = in[i];
        const Point& b = in[(i + 1) % n];
        const double fa = (a.x - m.x) * d.x + (a.y - m.y) * d.y;
        const double fb = (b.x - m.x) * d.x + (b.y - m.y) * d.y;
        const bool ina = fa <= 0.0;
        const bool inb = fb <= 0.0;
        if (ina)
            out.push_back(a);
        if (ina != inb) {
            const double t = fa / (fa - fb);
            out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
        }
    }
    return out;
}

// Lexicographic order on the flattened coordinate sequence; used to pick a
// canonical argument order so intersection areas commute bit-exactly.
int compare_rings(const Ring& a, const Ring& b) {
    if (a.size() != b.size())
        return a.size() < b.size() ? -1 : 1;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].x != b[i].x)
            return a[i].x < b[i].x ? -1 : 1;
        if (a[i].y != b[i].y)
            return a[i].y < b[i].y ? -1 : 1;
    }
    return 0;
}

int compare_polygons(const Polygon& a, const Polygon& b) {
    if (int c = compare_rings(a.exterior, b.exterior); c != 0)
        return c;
    if (a.holes.size() != b.holes.size())
        return a.holes.size() < b.holes.size() ? -1 : 1;
    for (std::size_t i = 0; i < a.holes.size(); ++i) {
        if (int c = compare_rings(a.holes[i], b.holes[i]); c != 0)
            return c;
    }
    return 0;
}

int compare_multipolygons(const MultiPolygon& a, const MultiPolygon& b) {
    if (a.size() != b.size())
        return a.size() < b.size() ? -1 : 1;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (int c = compare_polygons(a[i], b[i]); c != 0)
            return c;
    }
    return 0;
}

}  // namespace

double ring_signed_area(const Ring& r) {
    const std::size_t n = r.size();
    if (n < 3)
        return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = r[i];
        const Point& b = r[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    return 0.5 * acc;
}

double polygon_area(const Polygon& p) {
    double area = std::abs(ring_signed_area(p.exterior));
    for (const Ring& h : p.holes)
        area -= std::abs(ring_signed_area(h));
    return area;
}

double multipolygon_area(const MultiPolygon& mp) {
    double area = 0.0;
    for (const Polygon& p : mp)
        area += polygon_area(p);
    return area;
}

Bbox ring_bbox(const Ring& r) {
    Bbox b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const Point& p : r) {
        b.min_x = std::min(b.min_x, p.x);
        b.min_y = std::min(b.min_y, p.y);
        b.max_x = std::max(b.max_x, p.x);
        b.max_y = std::max(b.max_y, p.y);
    }
    return b;
}

Bbox polygon_bbox(const Polygon& p) {
    return ring_bbox(p.exterior);  // holes lie inside the exterior
}

Bbox multipolygon_bbox(const MultiPolygon& mp) {
    Bbox b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const Polygon& p : mp) {
        const Bbox pb = polygon_bbox(p);
        b.min_x = std::min(b.min_x, pb.min_x);
        b.min_y = std::min(b.min_y, pb.min_y);
        b.max_x = std::max(b.max_x, pb.max_x);
        b.max_y = std::max(b.max_y, pb.max_y);
    }
    return b;
}

int winding_number(const Polygon& p, Point pt) {
    int wn = ring_winding(p.exterior, pt);
    for (const Ring& h : p.holes)
        wn += ring_winding(h, pt);
    return wn;
}

int winding_number(const MultiPolygon& mp, Point pt) {
    int wn = 0;
    for (const Polygon& p : mp)
        wn += winding_number(p, pt);
    return wn;
}

bool point_on_boundary(const Polygon& p, Point pt, double eps) {
    if (ring_near_boundary(p.exterior, pt, eps))
        return true;
    for (const Ring& h : p.holes) {
        if (ring_near_boundary(h, pt, eps))
            return true;
    }
    return false;
}

void normalize_orientation(Polygon& p) {
    if (ring_signed_area(p.exterior) < 0.0)
        std::reverse(p.exterior.begin(), p.exterior.end());
    for (Ring& h : p.holes) {
        if (ring_signed_area(h) > 0.0)
            std::reverse(h.begin(), h.end());
    }
}

void validate_ring(const Ring& r, const std::string& what) {
    const std::size_t n = r.size();
    if (n < 3)
        throw GeometryError(what + ": ring has " + std::to_string(n) + " vertices, need at least 3");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(r[i].x) || !std::isfinite(r[i].y))
            throw GeometryError(what + ": vertex " + std::to_string(i) + " is not finite");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (same_point(r[i], r[(i + 1) % n]))
            throw GeometryError(what + ": zero-length edge at vertex " + std::to_string(i));
    }
    // A spike is an adjacent edge pair that folds straight back on itself.
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = r[i];
        const Point b = r[(i + 1) % n];
        const Point c = r[(i + 2) % n];
        if (cross3(a, b, c) == 0.0 && (a.x - b.x) * (c.x - b.x) + (a.y - b.y) * (c.y - b.y) > 0.0)
            throw GeometryError(what + ": spike at vertex " + std::to_string((i + 1) % n));
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent)
                continue;
            if (segments_intersect(r[i], r[(i + 1) % n], r[j], r[(j + 1) % n]))
                throw GeometryError(what + ": edges " + std::to_string(i) + " and " +
                                    std::to_string(j) + " intersect");
        }
    }
    if (ring_signed_area(r) == 0.0)
        throw GeometryError(what + ": ring has zero area");
}

void validate_polygon(const Polygon& p, const std::string& what) {
    validate_ring(p.exterior, what + " exterior");
    for (std::size_t i = 0; i < p.holes.size(); ++i)
        validate_ring(p.holes[i], what + " hole " + std::to_string(i));
}

// --- TriangleFan -----------------------------------------------------------
//
// A ring fans into triangles (v0, vi, vi+1) whose orientation-signed
// indicators sum to the ring's winding number. Holes keep their negative
// sign, so for shapes whose winding is {0,1} almost everywhere,
//   area(A ∩ B) = Σ_i Σ_j s_i s_j area(T_i ∩ T_j),
// and each summand is a convex clip of one triangle against another.

void TriangleFan::add_ring(const Ring& r) {
    const std::size_t n = r.size();
    if (n < 3)
        return;
    const Point v0 = r[0];
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double c = cross3(v0, r[i], r[i + 1]);
        if (c == 0.0)
            continue;
        Tri t;
        if (c > 0.0) {
            t.a = v0;
            t.b = r[i];
            t.c = r[i + 1];
            t.sign = 1.0;
        } else {
            t.a = v0;
            t.b = r[i + 1];
            t.c = r[i];
            t.sign = -1.0;
        }
        t.box = ring_bbox({t.a, t.b, t.c});
        tris_.push_back(t);
    }
}

TriangleFan::TriangleFan(const Polygon& p) {
    add_ring(p.exterior);
    if (ring_signed_area(p.exterior) < 0.0) {
        for (Tri& t : tris_)
            t.sign = -t.sign;
    }
    for (const Ring& h : p.holes) {
        const std::size_t first = tris_.size();
        add_ring(h);
        // Holes must contribute negative winding regardless of stored order.
        if (ring_signed_area(h) > 0.0) {
            for (std::size_t i = first; i < tris_.size(); ++i)
                tris_[i].sign = -tris_[i].sign;
        }
    }
    bbox_ = polygon_bbox(p);
}

TriangleFan::TriangleFan(const MultiPolygon& mp) {
    for (const Polygon& p : mp) {
        TriangleFan part(p);
        tris_.insert(tris_.end(), part.tris_.begin(), part.tris_.end());
    }
    bbox_ = multipolygon_bbox(mp);
}

namespace {

// Area of the intersection of two CCW triangles via half-plane clipping.
double tri_tri_intersection_area(const Point* ta, const Point* tb) {
    std::array<Point, 16> buf_a;
    std::array<Point, 16> buf_b;
    buf_a[0] = ta[0];
    buf_a[1] = ta[1];
    buf_a[2] = ta[2];
    std::size_t n = 3;
    Point* cur = buf_a.data();
    Point* nxt = buf_b.data();
    for (int e = 0; e < 3 && n >= 3; ++e) {
        const Point e0 = tb[e];
        const Point e1 = tb[(e + 1) % 3];
        std::size_t m = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const Point a = cur[i];
            const Point b = cur[(i + 1) % n];
            const double fa = cross3(e0, e1, a);
            const double fb = cross3(e0, e1, b);
            const bool ina = fa >= 0.0;
            const bool inb = fb >= 0.0;
            if (ina)
                nxt[m++] = a;
            if (ina != inb) {
                const double t = fa / (fa - fb);
                nxt[m++] = {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
            }
        }
        std::swap(cur, nxt);
        n = m;
    }
    if (n < 3)
        return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = cur[i];
        const Point& b = cur[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    return 0.5 * acc;
}

}  // namespace

double TriangleFan::intersection_area(const TriangleFan& a, const TriangleFan& b) {
    if (!a.bbox_.overlaps(b.bbox_))
        return 0.0;
    double total = 0.0;
    for (const Tri& ta : a.tris_) {
        if (!ta.box.overlaps(b.bbox_))
            continue;
        const Point pa[3] = {ta.a, ta.b, ta.c};
        for (const Tri& tb : b.tris_) {
            if (!ta.box.overlaps(tb.box))
                continue;
            const Point pb[3] = {tb.a, tb.b, tb.c};
            const double piece = tri_tri_intersection_area(pa, pb);
            if (piece != 0.0)
                total += ta.sign * tb.sign * piece;
        }
    }
    return total;
}

double polygon_intersection_area(const Polygon& a, const Polygon& b) {
    const Polygon* first = &a;
    const Polygon* second = &b;
    if (compare_polygons(b, a) < 0)
        std::swap(first, second);
    const TriangleFan fa(*first);
    const TriangleFan fb(*second);
    return TriangleFan::intersection_area(fa, fb);
}

double polygon_intersection_area(const MultiPolygon& a, const MultiPolygon& b) {
    const MultiPolygon* first = &a;
    const MultiPolygon* second = &b;
    if (compare_multipolygons(b, a) < 0)
        std::swap(first, second);
    const TriangleFan fa(*first);
    const TriangleFan fb(*second);
    return TriangleFan::intersection_area(fa, fb);
}

// --- Voronoi ----------------------------------------------------------------

VoronoiTessellation build_tessellation(const std::vector<Site>& sites,
                                       const BoundingRegion& region) {
    if (sites.size() < 2)
        throw ConfigurationError("tessellation requires at least 2 sites, got " +
                                 std::to_string(sites.size()));
    if (!region.shape.holes.empty())
        throw GeometryError("bounding region must not contain holes");
    validate_polygon(region.shape, "bounding region");

    Polygon reg = region.shape;
    normalize_orientation(reg);

    std::vector<std::size_t> by_id(sites.size());
    std::iota(by_id.begin(), by_id.end(), 0);
    std::sort(by_id.begin(), by_id.end(),
              [&](std::size_t a, std::size_t b) { return sites[a].id < sites[b].id; });
    for (std::size_t k = 1; k < by_id.size(); ++k) {
        if (sites[by_id[k - 1]].id == sites[by_id[k]].id)
            throw ConfigurationError("duplicate site id " + std::to_string(sites[by_id[k]].id));
    }

    std::vector<std::size_t> by_loc(by_id);
    std::sort(by_loc.begin(), by_loc.end(), [&](std::size_t a, std::size_t b) {
        const Point pa = sites[a].location, pb = sites[b].location;
        if (pa.x != pb.x)
            return pa.x < pb.x;
        return pa.y < pb.y;
    });
    for (std::size_t k = 1; k < by_loc.size(); ++k) {
        const Site& s0 = sites[by_loc[k - 1]];
        const Site& s1 = sites[by_loc[k]];
        if (same_point(s0.location, s1.location))
            throw DuplicateSiteError("sites " + std::to_string(std::min(s0.id, s1.id)) + " and " +
                                     std::to_string(std::max(s0.id, s1.id)) +
                                     " share the same location");
    }

    for (const Site& s : sites) {
        if (!std::isfinite(s.location.x) || !std::isfinite(s.location.y) ||
            winding_number(reg, s.location) == 0 || point_on_boundary(reg, s.location, 1e-12)) {
            throw GeometryError("site " + std::to_string(s.id) +
                                " is not strictly inside the bounding region");
        }
    }

    VoronoiTessellation tess;
    tess.region = region;
    tess.cells.reserve(sites.size());

    struct Neighbor {
        double d2;
        std::size_t idx;
    };
    std::vector<Neighbor> order;
    order.reserve(sites.size());

    for (std::size_t oi = 0; oi < by_id.size(); ++oi) {
        const Site& self = sites[by_id[oi]];

        order.clear();
        for (std::size_t j = 0; j < sites.size(); ++j) {
            if (j == by_id[oi])
                continue;
            order.push_back({dist2(self.location, sites[j].location), j});
        }
        std::sort(order.begin(), order.end(), [&](const Neighbor& a, const Neighbor& b) {
            if (a.d2 != b.d2)
                return a.d2 < b.d2;
            return sites[a.idx].id < sites[b.idx].id;
        });

        Ring cell = reg.exterior;
        double max_r2 = 0.0;
        for (const Point& v : cell)
            max_r2 = std::max(max_r2, dist2(self.location, v));

        for (const Neighbor& nb : order) {
            if (nb.d2 > 4.0 * max_r2)
                break;  // bisector cannot reach the cell; later sites are farther still
            const Point other = sites[nb.idx].location;
            const Point mid{0.5 * (self.location.x + other.x), 0.5 * (self.location.y + other.y)};
            const Point dir{other.x - self.location.x, other.y - self.location.y};
            cell = clip_half_plane(cell, mid, dir);
            if (cell.size() < 3)
                throw GeometryError("cell for site " + std::to_string(self.id) +
                                    " collapsed during clipping");
            max_r2 = 0.0;
            for (const Point& v : cell)
                max_r2 = std::max(max_r2, dist2(self.location, v));
        }

        VoronoiCell out;
        out.site = self.id;
        out.shape.exterior = std::move(cell);
        out.area = std::abs(ring_signed_area(out.shape.exterior));
        if (out.area <= 0.0)
            throw GeometryError("cell for site " + std::to_string(self.id) + " has zero area");
        tess.cells.push_back(std::move(out));
    }
    return tess;
}

// --- Areal weights ----------------------------------------------------------

bool AreaWeightMatrix::has_site(SiteId s) const {
    return std::binary_search(sites.begin(), sites.end(), s);
}

std::pair<std::size_t, std::size_t> AreaWeightMatrix::site_row(SiteId s) const {
    const auto lo = std::lower_bound(entries.begin(), entries.end(), s,
                                     [](const WeightEntry& e, SiteId v) { return e.site < v; });
    const auto hi = std::upper_bound(entries.begin(), entries.end(), s,
                                     [](SiteId v, const WeightEntry& e) { return v < e.site; });
    return {static_cast<std::size_t>(lo - entries.begin()),
            static_cast<std::size_t>(hi - entries.begin())};
}

AreaWeightMatrix areal_weights(const VoronoiTessellation& tess, const std::vector<Zone>& zones,
                               int threads) {
    if (zones.empty())
        throw GeometryError("areal weights require at least one zone");

    for (const Zone& z : zones) {
        if (multipolygon_area(z.shape) <= 0.0)
            throw GeometryError("zone " + z.id + " has zero area");
    }

    std::vector<TriangleFan> cell_fans;
    cell_fans.reserve(tess.cells.size());
    for (const VoronoiCell& c : tess.cells)
        cell_fans.emplace_back(c.shape);

    std::vector<std::vector<WeightEntry>> per_zone(zones.size());
    parallel_for(zones.size(), threads, [&](std::size_t zi) {
        const Zone& z = zones[zi];
        const TriangleFan zf(z.shape);
        std::vector<WeightEntry> local;
        for (std::size_t ci = 0; ci < tess.cells.size(); ++ci) {
            if (!cell_fans[ci].bbox().overlaps(zf.bbox()))
                continue;
            const double inter = TriangleFan::intersection_area(cell_fans[ci], zf);
            const double w = inter / tess.cells[ci].area;
            if (w >= 1e-12)
                local.push_back({tess.cells[ci].site, z.id, w});
        }
        per_zone[zi] = std::move(local);
    });

    AreaWeightMatrix out;
    out.sites.reserve(tess.cells.size());
    for (const VoronoiCell& c : tess.cells)
        out.sites.push_back(c.site);

    std::size_t total = 0;
    for (const auto& v : per_zone)
        total += v.size();
    out.entries.reserve(total);
    for (const auto& v : per_zone)
        out.entries.insert(out.entries.end(), v.begin(), v.end());
    std::sort(out.entries.begin(), out.entries.end(), [](const WeightEntry& a, const WeightEntry& b) {
        if (a.site != b.site)
            return a.site < b.site;
        return a.zone < b.zone;
    });
    return out;
}

}  // namespace zonecast::geom
