#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "zonecast/geometry.hpp"
#include "zonecast/ingest.hpp"

namespace zonecast::interp {

/// The zone-level hourly dataset. Zone and category names are interned;
/// rows are sorted by (zone, hour, category) and reference the tables.
struct ZoneHourlySeries {
    struct Row {
        std::uint32_t zone = 0;
        std::int64_t hour = 0;  // epoch hours, UTC
        std::uint32_t category = 0;
        double bytes = 0.0;
    };

    std::vector<std::string> zones;       // sorted unique
    std::vector<std::string> categories;  // sorted unique
    std::vector<Row> rows;
};

/// Apportions station traffic onto zones: bytes(z,h,a) = Σ_s w(s,z)·bytes(s,h,a).
/// Accumulation per (zone,hour,category) runs in ascending site order so the
/// result is identical for any thread count. Sites missing from W entirely
/// raise InterpolationError; sites with an empty weight row lose their
/// traffic at the region edge by design.
ZoneHourlySeries interpolate_traffic(const std::vector<ingest::RollupRow>& rollup,
                                     const geom::AreaWeightMatrix& W, int threads = 1);

/// CSV `zone_id,hour_utc,category,bytes` (12 significant digits).
void write_series(const std::string& path, const ZoneHourlySeries& series,
                  const std::vector<std::pair<std::string, std::string>>& meta);
ZoneHourlySeries read_series(const std::string& path);

/// CSV `site_id,zone_id,weight` (12 significant digits).
void write_weights(const std::string& path, const geom::AreaWeightMatrix& W,
                   const std::vector<std::pair<std::string, std::string>>& meta);
/// `site_universe` restores sites whose weight row is empty (they carry no
/// CSV rows); pass the tessellation's site ids.
geom::AreaWeightMatrix read_weights(const std::string& path,
                                    const std::vector<geom::SiteId>& site_universe);

}  // namespace zonecast::interp
