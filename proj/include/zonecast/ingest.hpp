#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace zonecast::ingest {

struct TrafficRecord {
    std::int64_t minute = 0;  // epoch minutes, UTC
    double lat = 0.0;
    double lon = 0.0;
    std::string_view app_id;  // valid only while the source line is alive
    std::int64_t uplink = 0;
    std::int64_t downlink = 0;
};

/// app_id → category. Every mapped app has exactly one category; apps absent
/// from the map are dropped (with a counter) during rollup.
struct CategoryMap {
    std::map<std::string, std::string, std::less<>> by_app;
    std::vector<std::string> categories;  // distinct, sorted

    static CategoryMap load(const std::string& path);
};

struct StationSite {
    std::int64_t id = 0;
    double lat = 0.0;
    double lon = 0.0;
};

struct RollupRow {
    std::int64_t site = 0;
    std::int64_t hour = 0;  // epoch hours, UTC
    std::string category;
    std::int64_t bytes = 0;
};

struct IngestConfig {
    bool percentile_filter = true;
    double percentile = 99.0;             // keep top-p% of traffic by app
    double antenna_epsilon = 0.0;         // merge radius in input coordinate units
    double malformed_limit = 0.01;        // fraction of data lines allowed to be malformed
    std::int64_t window_start_minute = INT64_MIN;  // inclusive
    std::int64_t window_end_minute = INT64_MAX;    // exclusive
    std::size_t rollup_row_budget = 4000000;       // accumulator rows before spilling
    std::string spill_dir;                         // shard directory ("" = out_dir unset yet)
};

struct IngestStats {
    std::uint64_t data_lines = 0;
    std::uint64_t malformed = 0;
    std::uint64_t out_of_window = 0;
    std::uint64_t unmapped_records = 0;
    std::uint64_t filtered_records = 0;
    std::uint64_t kept_records = 0;
    std::uint64_t apps_seen = 0;
    std::uint64_t apps_kept = 0;
    std::uint64_t spill_shards = 0;
    std::int64_t min_minute = 0;
    std::int64_t max_minute = 0;  // inclusive; both 0 when no records kept
};

struct IngestOutput {
    std::vector<StationSite> sites;  // ascending id = ascending (lat, lon)
    std::vector<RollupRow> rows;     // sorted by (site, hour, category)
    IngestStats stats;
};

/// Parses one data line against the fixed schema. Returns nullopt for a
/// malformed line (wrong field count, bad timestamp/number, negative bytes).
std::optional<TrafficRecord> parse_traffic_line(std::string_view line);

/// Single-link clustering of antenna coordinates: with epsilon 0 an exact
/// partition by coordinates, otherwise union-find over all pairs within
/// epsilon (Euclidean, input units). Returns the site list (ids ascending by
/// the cluster's mean (lat, lon)) and each antenna's site id, antennas given
/// in sorted (lat, lon) order.
std::pair<std::vector<StationSite>, std::vector<std::int64_t>>
group_antennas(const std::vector<std::pair<double, double>>& antennas, double epsilon);

/// Smallest prefix of apps in descending traffic order whose cumulative
/// traffic reaches p% of the total. Ties in traffic break by ascending app id.
std::set<std::string, std::less<>> top_percentile_filter(
    const std::map<std::string, std::uint64_t, std::less<>>& app_totals, double percentile);

/// Full ingest: two passes over the traffic CSV. Pass one counts per-app
/// traffic and collects distinct antenna coordinates; pass two applies the
/// percentile filter and category map and rolls traffic up to
/// (site, hour, category). The accumulator spills sorted shards to disk when
/// it exceeds the row budget; shards and the final map merge by key order, so
/// results do not depend on the budget.
IngestOutput run_ingest(const std::string& traffic_csv, const CategoryMap& cmap,
                        const IngestConfig& cfg);

/// Writes rows as CSV `site_id,hour_utc,category,total_bytes`, sorted.
void write_rollup(const std::string& path, const std::vector<RollupRow>& rows,
                  const std::vector<std::pair<std::string, std::string>>& meta);
std::vector<RollupRow> read_rollup(const std::string& path);

/// Writes sites as CSV `site_id,lat,lon`.
void write_sites(const std::string& path, const std::vector<StationSite>& sites,
                 const std::vector<std::pair<std::string, std::string>>& meta);
std::vector<StationSite> read_sites(const std::string& path);

}  // namespace zonecast::ingest
