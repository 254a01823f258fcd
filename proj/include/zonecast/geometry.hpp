#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace zonecast::geom {

using SiteId = std::int64_t;

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Ring stored open: the closing vertex is not repeated.
using Ring = std::vector<Point>;

/// Simple polygon with optional holes. Exterior is counter-clockwise, holes
/// clockwise (normalize_orientation enforces this).
struct Polygon {
    Ring exterior;
    std::vector<Ring> holes;
};

/// Possibly multi-part shape; per-part holes subtract from the area.
using MultiPolygon = std::vector<Polygon>;

struct Site {
    SiteId id = 0;
    Point location;
};

/// Clipping region for the tessellation. Holes are not supported here; the
/// loader rejects them.
struct BoundingRegion {
    Polygon shape;
};

/// Cell clipped to the region. For a non-convex region the ring may be weakly
/// simple (zero-width bridges along a clip line); all area math downstream is
/// winding-based and unaffected.
struct VoronoiCell {
    SiteId site = 0;
    Polygon shape;
    double area = 0.0;
};

struct VoronoiTessellation {
    BoundingRegion region;
    std::vector<VoronoiCell> cells;  // ascending site id
};

struct Zone {
    std::string id;
    MultiPolygon shape;
    double area = 0.0;
};

struct WeightEntry {
    SiteId site = 0;
    std::string zone;
    double weight = 0.0;  // area(cell ∩ zone) / area(cell)
};

/// Sparse areal-weight matrix in ascending (site id, zone id) order.
/// `sites` lists every site the matrix knows about, including sites whose
/// row is empty because their cell does not overlap any zone.
struct AreaWeightMatrix {
    std::vector<WeightEntry> entries;
    std::vector<SiteId> sites;

    bool has_site(SiteId s) const;
    /// [first, last) range of entries for a site (entries are site-sorted).
    std::pair<std::size_t, std::size_t> site_row(SiteId s) const;
};

struct Bbox {
    double min_x = 0, min_y = 0, max_x = 0, max_y = 0;
    bool overlaps(const Bbox& o) const {
        return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y && o.min_y <= max_y;
    }
};

double ring_signed_area(const Ring& r);
double polygon_area(const Polygon& p);
double multipolygon_area(const MultiPolygon& mp);
Bbox ring_bbox(const Ring& r);
Bbox polygon_bbox(const Polygon& p);
Bbox multipolygon_bbox(const MultiPolygon& mp);

/// Winding number of the whole shape at p (holes wind negatively). The point
/// is inside iff the result is nonzero.
int winding_number(const Polygon& p, Point pt);
int winding_number(const MultiPolygon& mp, Point pt);
bool point_on_boundary(const Polygon& p, Point pt, double eps = 1e-12);

/// Makes exterior CCW and holes CW in place.
void normalize_orientation(Polygon& p);

/// Structural ring validation: at least 3 distinct vertices, finite
/// coordinates, no self-intersections, nonzero area. Throws GeometryError
/// naming `what` on failure. Intended for input shapes; internally built
/// cells skip it.
void validate_ring(const Ring& r, const std::string& what);
void validate_polygon(const Polygon& p, const std::string& what);

/// Signed fan-triangle decomposition of a shape. The sum of signed triangle
/// indicators equals the shape's winding number almost everywhere, which
/// turns intersection areas into sums over triangle pairs and keeps all the
/// topology out of the hot path.
class TriangleFan {
public:
    TriangleFan() = default;
    explicit TriangleFan(const Polygon& p);
    explicit TriangleFan(const MultiPolygon& mp);

    /// Area of the intersection of the two shapes (holes subtract).
    static double intersection_area(const TriangleFan& a, const TriangleFan& b);

    const Bbox& bbox() const { return bbox_; }

private:
    void add_ring(const Ring& r);

    struct Tri {
        Point a, b, c;  // CCW
        double sign;    // +1 exterior-orientation, -1 hole-orientation
        Bbox box;
    };
    std::vector<Tri> tris_;
    Bbox bbox_;
};

/// Area of intersection of two polygons. Commutative bit-exactly: arguments
/// are put in a canonical order before any arithmetic, so f(a,b) and f(b,a)
/// run the identical computation.
double polygon_intersection_area(const Polygon& a, const Polygon& b);
double polygon_intersection_area(const MultiPolygon& a, const MultiPolygon& b);

/// Bounded Voronoi tessellation: each cell is the locus of points nearer its
/// site than any other, clipped to the region. Sites must be at least 2,
/// pairwise distinct, and strictly inside the region.
VoronoiTessellation build_tessellation(const std::vector<Site>& sites, const BoundingRegion& region);

/// Areal overlap weights between cells and zones; entry (s, z) is
/// area(cell_s ∩ zone_z) / area(cell_s). Entries below 1e-12 are omitted.
/// Evaluation is data-parallel across zones when threads > 1; the result is
/// merged in ascending (site id, zone id) order either way.
AreaWeightMatrix areal_weights(const VoronoiTessellation& tess, const std::vector<Zone>& zones,
                               int threads = 1);

}  // namespace zonecast::geom
