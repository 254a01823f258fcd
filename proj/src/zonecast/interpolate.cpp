#include "zonecast/interpolate.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "zonecast/csv.hpp"
#include "zonecast/errors.hpp"
#include "zonecast/parallel.hpp"
#include "zonecast/timeutil.hpp"

namespace zonecast::interp {

ZoneHourlySeries interpolate_traffic(const std::vector<ingest::RollupRow>& rollup,
                                     const geom::AreaWeightMatrix& W, int threads) {
    ZoneHourlySeries out;

    {
        std::set<std::string> zone_set;
        for (const geom::WeightEntry& e : W.entries)
            zone_set.insert(e.zone);
        out.zones.assign(zone_set.begin(), zone_set.end());
        std::set<std::string> cat_set;
        for (const ingest::RollupRow& r : rollup)
            cat_set.insert(r.category);
        out.categories.assign(cat_set.begin(), cat_set.end());
    }
    if (rollup.empty())
        return out;

    std::unordered_map<std::string, std::uint32_t> zone_idx;
    for (std::size_t i = 0; i < out.zones.size(); ++i)
        zone_idx.emplace(out.zones[i], static_cast<std::uint32_t>(i));
    std::unordered_map<std::string, std::uint32_t> cat_idx;
    for (std::size_t i = 0; i < out.categories.size(); ++i)
        cat_idx.emplace(out.categories[i], static_cast<std::uint32_t>(i));

    // Weight rows keyed by site, entries ascending by zone id.
    struct SiteRow {
        std::vector<std::pair<std::uint32_t, double>> weights;
    };
    std::unordered_map<std::int64_t, SiteRow> rows_by_site;
    for (const geom::WeightEntry& e : W.entries)
        rows_by_site[e.site].weights.push_back({zone_idx.find(e.zone)->second, e.weight});

    for (const ingest::RollupRow& r : rollup) {
        if (!W.has_site(r.site))
            throw InterpolationError("site " + std::to_string(r.site) +
                                     " has traffic but no row in the weight matrix");
    }

    // Hours, and rollup row indices per hour in ascending (site, category)
    // order — the rollup is already sorted that way.
    std::vector<std::int64_t> hours;
    for (const ingest::RollupRow& r : rollup)
        hours.push_back(r.hour);
    std::sort(hours.begin(), hours.end());
    hours.erase(std::unique(hours.begin(), hours.end()), hours.end());
    std::unordered_map<std::int64_t, std::uint32_t> hour_idx;
    for (std::size_t i = 0; i < hours.size(); ++i)
        hour_idx.emplace(hours[i], static_cast<std::uint32_t>(i));
    std::vector<std::vector<std::uint32_t>> rows_of_hour(hours.size());
    for (std::size_t i = 0; i < rollup.size(); ++i)
        rows_of_hour[hour_idx.find(rollup[i].hour)->second].push_back(
            static_cast<std::uint32_t>(i));

    const std::size_t nz = out.zones.size();
    const std::size_t nc = out.categories.size();
    std::vector<std::vector<ZoneHourlySeries::Row>> per_hour(hours.size());

    parallel_for(hours.size(), threads, [&](std::size_t hi) {
        std::vector<double> acc(nz * nc, 0.0);
        std::vector<char> touched(nz * nc, 0);
        for (const std::uint32_t ri : rows_of_hour[hi]) {
            const ingest::RollupRow& r = rollup[ri];
            const auto site_it = rows_by_site.find(r.site);
            if (site_it == rows_by_site.end())
                continue;  // empty weight row: traffic outside every zone
            const std::uint32_t ci = cat_idx.find(r.category)->second;
            const double bytes = static_cast<double>(r.bytes);
            for (const auto& [zi, w] : site_it->second.weights) {
                acc[zi * nc + ci] += w * bytes;
                touched[zi * nc + ci] = 1;
            }
        }
        std::vector<ZoneHourlySeries::Row> local;
        for (std::size_t zi = 0; zi < nz; ++zi) {
            for (std::size_t ci = 0; ci < nc; ++ci) {
                if (!touched[zi * nc + ci])
                    continue;
                ZoneHourlySeries::Row row;
                row.zone = static_cast<std::uint32_t>(zi);
                row.hour = hours[hi];
                row.category = static_cast<std::uint32_t>(ci);
                row.bytes = acc[zi * nc + ci];
                local.push_back(row);
            }
        }
        per_hour[hi] = std::move(local);
    });

    std::size_t total = 0;
    for (const auto& v : per_hour)
        total += v.size();
    out.rows.reserve(total);
    for (const auto& v : per_hour)
        out.rows.insert(out.rows.end(), v.begin(), v.end());
    std::sort(out.rows.begin(), out.rows.end(),
              [](const ZoneHourlySeries::Row& a, const ZoneHourlySeries::Row& b) {
                  if (a.zone != b.zone)
                      return a.zone < b.zone;
                  if (a.hour != b.hour)
                      return a.hour < b.hour;
                  return a.category < b.category;
              });
    return out;
}

void write_series(const std::string& path, const ZoneHourlySeries& series,
                  const std::vector<std::pair<std::string, std::string>>& meta) {
    std::string meta_line;
    for (const auto& [k, v] : meta)
        meta_line += (meta_line.empty() ? "" : " ") + k + "=" + v;
    csv::Writer w(path, meta_line, "zone_id,hour_utc,category,bytes");
    std::string line;
    for (const ZoneHourlySeries::Row& r : series.rows) {
        line.clear();
        line += series.zones[r.zone];
        line += ',';
        line += timeutil::format_hour_utc(r.hour);
        line += ',';
        line += series.categories[r.category];
        line += ',';
        line += csv::fmt_double(r.bytes, 12);
        w.write_line(line);
    }
    w.close();
}

ZoneHourlySeries read_series(const std::string& path) {
    csv::Reader reader(path);
    const int zone_col = reader.column("zone_id");
    const int hour_col = reader.column("hour_utc");
    const int cat_col = reader.column("category");
    const int bytes_col = reader.column("bytes");
    if (zone_col < 0 || hour_col < 0 || cat_col < 0 || bytes_col < 0)
        throw FormatError(path + ": series header must be 'zone_id,hour_utc,category,bytes'");

    struct RawRow {
        std::string zone;
        std::int64_t hour;
        std::string category;
        double bytes;
    };
    std::vector<RawRow> raw;
    std::vector<std::string_view> fields;
    while (reader.next(fields)) {
        if (fields.size() != 4)
            throw FormatError(path + ": bad field count at data line " +
                              std::to_string(reader.data_lines_read()));
        const auto hour = timeutil::parse_hour_utc(fields[hour_col]);
        const auto bytes = csv::parse_double(fields[bytes_col]);
        if (!hour || !bytes || *bytes < 0.0)
            throw FormatError(path + ": bad row at data line " +
                              std::to_string(reader.data_lines_read()));
        raw.push_back({std::string(fields[zone_col]), *hour, std::string(fields[cat_col]), *bytes});
    }

    ZoneHourlySeries out;
    std::set<std::string> zone_set, cat_set;
    for (const RawRow& r : raw) {
        zone_set.insert(r.zone);
        cat_set.insert(r.category);
    }
    out.zones.assign(zone_set.begin(), zone_set.end());
    out.categories.assign(cat_set.begin(), cat_set.end());
    std::unordered_map<std::string, std::uint32_t> zone_idx, cat_idx;
    for (std::size_t i = 0; i < out.zones.size(); ++i)
        zone_idx.emplace(out.zones[i], static_cast<std::uint32_t>(i));
    for (std::size_t i = 0; i < out.categories.size(); ++i)
        cat_idx.emplace(out.categories[i], static_cast<std::uint32_t>(i));
    out.rows.reserve(raw.size());
    for (const RawRow& r : raw) {
        ZoneHourlySeries::Row row;
        row.zone = zone_idx.find(r.zone)->second;
        row.hour = r.hour;
        row.category = cat_idx.find(r.category)->second;
        row.bytes = r.bytes;
        out.rows.push_back(row);
    }
    std::sort(out.rows.begin(), out.rows.end(),
              [](const ZoneHourlySeries::Row& a, const ZoneHourlySeries::Row& b) {
                  if (a.zone != b.zone)
                      return a.zone < b.zone;
                  if (a.hour != b.hour)
                      return a.hour < b.hour;
                  return a.category < b.category;
              });
    return out;
}

void write_weights(const std::string& path, const geom::AreaWeightMatrix& W,
                   const std::vector<std::pair<std::string, std::string>>& meta) {
    std::string meta_line;
    for (const auto& [k, v] : meta)
        meta_line += (meta_line.empty() ? "" : " ") + k + "=" + v;
    csv::Writer w(path, meta_line, "site_id,zone_id,weight");
    std::string line;
    for (const geom::WeightEntry& e : W.entries) {
        line.clear();
        line += std::to_string(e.site);
        line += ',';
        line += e.zone;
        line += ',';
        line += csv::fmt_double(e.weight, 12);
        w.write_line(line);
    }
    w.close();
}

geom::AreaWeightMatrix read_weights(const std::string& path,
                                    const std::vector<geom::SiteId>& site_universe) {
    csv::Reader reader(path);
    const int site_col = reader.column("site_id");
    const int zone_col = reader.column("zone_id");
    const int weight_col = reader.column("weight");
    if (site_col < 0 || zone_col < 0 || weight_col < 0)
        throw FormatError(path + ": weights header must be 'site_id,zone_id,weight'");
    geom::AreaWeightMatrix W;
    W.sites = site_universe;
    std::sort(W.sites.begin(), W.sites.end());
    std::vector<std::string_view> fields;
    while (reader.next(fields)) {
        if (fields.size() != 3)
            throw FormatError(path + ": bad field count at data line " +
                              std::to_string(reader.data_lines_read()));
        const auto site = csv::parse_i64(fields[site_col]);
        const auto weight = csv::parse_double(fields[weight_col]);
        if (!site || !weight || *weight < 0.0)
            throw FormatError(path + ": bad row at data line " +
                              std::to_string(reader.data_lines_read()));
        W.entries.push_back({*site, std::string(fields[zone_col]), *weight});
        if (!std::binary_search(W.sites.begin(), W.sites.end(), *site))
            throw FormatError(path + ": weight row for site " + std::to_string(*site) +
                              " outside the site universe");
    }
    std::sort(W.entries.begin(), W.entries.end(),
              [](const geom::WeightEntry& a, const geom::WeightEntry& b) {
                  if (a.site != b.site)
                      return a.site < b.site;
                  return a.zone < b.zone;
              });
    return W;
}

}  // namespace zonecast::interp
