#include "zonecast/ingest.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <numeric>
#include <unordered_map>

#include "zonecast/csv.hpp"
#include "zonecast/errors.hpp"
#include "zonecast/rng.hpp"
#include "zonecast/timeutil.hpp"

namespace zonecast::ingest {

namespace {

const std::vector<std::string> kTrafficHeader = {"timestamp_utc", "lat",          "lon",
                                                 "app_id",        "uplink_bytes", "downlink_bytes"};

struct CoordHash {
    std::size_t operator()(const std::pair<double, double>& c) const {
        std::uint64_t h = fnv1a64(&c.first, sizeof(double));
        h = fnv1a64(&c.second, sizeof(double), h);
        return static_cast<std::size_t>(h);
    }
};

std::optional<TrafficRecord> parse_traffic_fields(const std::vector<std::string_view>& f) {
    if (f.size() != 6)
        return std::nullopt;
    const auto minute = timeutil::parse_minute_utc(f[0]);
    if (!minute)
        return std::nullopt;
    const auto lat = csv::parse_double(f[1]);
    const auto lon = csv::parse_double(f[2]);
    if (!lat || !lon || !std::isfinite(*lat) || !std::isfinite(*lon))
        return std::nullopt;
    if (f[3].empty())
        return std::nullopt;
    const auto up = csv::parse_i64(f[4]);
    const auto down = csv::parse_i64(f[5]);
    if (!up || !down || *up < 0 || *down < 0)
        return std::nullopt;
    TrafficRecord rec;
    rec.minute = *minute;
    rec.lat = *lat;
    rec.lon = *lon;
    rec.app_id = f[3];
    rec.uplink = *up;
    rec.downlink = *down;
    return rec;
}

void check_traffic_header(const csv::Reader& reader) {
    if (reader.header() != kTrafficHeader) {
        std::string want;
        for (const auto& h : kTrafficHeader)
            want += (want.empty() ? "" : ",") + h;
        throw FormatError(reader.path() + ": traffic header mismatch, expected '" + want + "'");
    }
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}

// Disjoint-set forest over antenna indices.
struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b)
            parent[std::max(a, b)] = std::min(a, b);
    }
};

// (site, hour, category-index) packed so that numeric order equals
// lexicographic (site, hour, category-name) order — category indices are
// assigned over the sorted category list.
std::uint64_t pack_key(std::int64_t site, std::int64_t hour, std::uint32_t cat) {
    return (static_cast<std::uint64_t>(site) << 32) |
           (static_cast<std::uint64_t>(hour & 0xFFFFFF) << 8) | cat;
}

struct Shard {
    std::string path;
};

void spill_shard(std::unordered_map<std::uint64_t, std::int64_t>& acc,
                 const std::string& dir, std::size_t index, std::vector<Shard>& shards) {
    std::vector<std::pair<std::uint64_t, std::int64_t>> rows(acc.begin(), acc.end());
    std::sort(rows.begin(), rows.end());
    const std::string path = dir + "/rollup_shard_" + std::to_string(index) + ".tmp";
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f)
        throw IngestError("cannot create spill shard " + path);
    for (const auto& [k, v] : rows) {
        if (std::fwrite(&k, sizeof(k), 1, f) != 1 || std::fwrite(&v, sizeof(v), 1, f) != 1) {
            std::fclose(f);
            throw IngestError("short write to spill shard " + path);
        }
    }
    if (std::fclose(f) != 0)
        throw IngestError("cannot close spill shard " + path);
    shards.push_back({path});
    acc.clear();
}

// Streams one spilled shard back in key order.
class ShardCursor {
public:
    explicit ShardCursor(const std::string& path) : path_(path) {
        file_ = std::fopen(path.c_str(), "rb");
        if (!file_)
            throw IngestError("cannot reopen spill shard " + path);
        advance();
    }
    ~ShardCursor() {
        if (file_)
            std::fclose(file_);
    }
    ShardCursor(const ShardCursor&) = delete;
    ShardCursor& operator=(const ShardCursor&) = delete;

    bool valid() const { return valid_; }
    std::uint64_t key() const { return key_; }
    std::int64_t value() const { return value_; }
    void advance() {
        valid_ = std::fread(&key_, sizeof(key_), 1, file_) == 1 &&
                 std::fread(&value_, sizeof(value_), 1, file_) == 1;
    }

private:
    std::string path_;
    std::FILE* file_ = nullptr;
    std::uint64_t key_ = 0;
    std::int64_t value_ = 0;
    bool valid_ = false;
};

}  // namespace

std::optional<TrafficRecord> parse_traffic_line(std::string_view line) {
    std::vector<std::string_view> fields;
    csv::split_fields(line, fields);
    return parse_traffic_fields(fields);
}

CategoryMap CategoryMap::load(const std::string& path) {
    csv::Reader reader(path);
    const int app_col = reader.column("app_id");
    const int cat_col = reader.column("category");
    if (app_col < 0 || cat_col < 0)
        throw FormatError(path + ": category map header must be 'app_id,category'");
    CategoryMap cmap;
    std::vector<std::string_view> fields;
    while (reader.next(fields)) {
        if (fields.size() <= static_cast<std::size_t>(std::max(app_col, cat_col)))
            throw FormatError(path + ": short row at data line " +
                              std::to_string(reader.data_lines_read()));
        std::string app(fields[app_col]);
        std::string cat(fields[cat_col]);
        if (app.empty() || cat.empty())
            throw FormatError(path + ": empty app_id or category at data line " +
                              std::to_string(reader.data_lines_read()));
        auto [it, inserted] = cmap.by_app.emplace(std::move(app), cat);
        if (!inserted && it->second != cat)
            throw FormatError(path + ": app_id '" + it->first + "' mapped to both '" +
                              it->second + "' and '" + cat + "'");
    }
    for (const auto& [app, cat] : cmap.by_app)
        cmap.categories.push_back(cat);
    std::sort(cmap.categories.begin(), cmap.categories.end());
    cmap.categories.erase(std::unique(cmap.categories.begin(), cmap.categories.end()),
                          cmap.categories.end());
    return cmap;
}

std::pair<std::vector<StationSite>, std::vector<std::int64_t>>
group_antennas(const std::vector<std::pair<double, double>>& antennas, double epsilon) {
    const std::size_t n = antennas.size();

    // Collapse exact duplicates first; they always share a site.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return antennas[a] < antennas[b];
    });
    std::vector<std::pair<double, double>> unique_coords;
    std::vector<std::size_t> coord_of(n);  // input index -> unique-coord index
    for (std::size_t k = 0; k < n; ++k) {
        const auto& c = antennas[order[k]];
        if (unique_coords.empty() || unique_coords.back() != c)
            unique_coords.push_back(c);
        coord_of[order[k]] = unique_coords.size() - 1;
    }

    const std::size_t u = unique_coords.size();
    UnionFind uf(u);
    if (epsilon > 0.0) {
        const double eps2 = epsilon * epsilon;
        for (std::size_t i = 0; i < u; ++i) {
            for (std::size_t j = i + 1; j < u; ++j) {
                // coords sorted by (lat, lon): once Δlat alone exceeds
                // epsilon no later j can be within range of i.
                const double dlat = unique_coords[j].first - unique_coords[i].first;
                if (dlat > epsilon)
                    break;
                const double dlon = unique_coords[j].second - unique_coords[i].second;
                if (dlat * dlat + dlon * dlon <= eps2)
                    uf.unite(i, j);
            }
        }
    }

    // Cluster -> mean coordinate; site ids ascend over sorted means.
    std::unordered_map<std::size_t, std::size_t> root_to_cluster;
    std::vector<double> sum_lat, sum_lon;
    std::vector<std::size_t> count;
    std::vector<std::size_t> cluster_of(u);
    for (std::size_t i = 0; i < u; ++i) {
        const std::size_t root = uf.find(i);
        auto [it, inserted] = root_to_cluster.emplace(root, sum_lat.size());
        if (inserted) {
            sum_lat.push_back(0.0);
            sum_lon.push_back(0.0);
            count.push_back(0);
        }
        cluster_of[i] = it->second;
        sum_lat[it->second] += unique_coords[i].first;
        sum_lon[it->second] += unique_coords[i].second;
        count[it->second] += 1;
    }

    const std::size_t k = sum_lat.size();
    std::vector<StationSite> sites(k);
    for (std::size_t c = 0; c < k; ++c) {
        sites[c].lat = sum_lat[c] / static_cast<double>(count[c]);
        sites[c].lon = sum_lon[c] / static_cast<double>(count[c]);
    }
    std::vector<std::size_t> site_order(k);
    std::iota(site_order.begin(), site_order.end(), 0);
    std::sort(site_order.begin(), site_order.end(), [&](std::size_t a, std::size_t b) {
        if (sites[a].lat != sites[b].lat)
            return sites[a].lat < sites[b].lat;
        return sites[a].lon < sites[b].lon;
    });
    std::vector<std::int64_t> cluster_to_site(k);
    for (std::size_t rank = 0; rank < k; ++rank)
        cluster_to_site[site_order[rank]] = static_cast<std::int64_t>(rank);

    std::vector<StationSite> out(k);
    for (std::size_t c = 0; c < k; ++c) {
        StationSite s = sites[c];
        s.id = cluster_to_site[c];
        out[static_cast<std::size_t>(s.id)] = s;
    }
    std::vector<std::int64_t> assignment(n);
    for (std::size_t i = 0; i < n; ++i)
        assignment[i] = cluster_to_site[cluster_of[coord_of[i]]];
    return {std::move(out), std::move(assignment)};
}

std::set<std::string, std::less<>> top_percentile_filter(
    const std::map<std::string, std::uint64_t, std::less<>>& app_totals, double percentile) {
    if (!(percentile > 0.0) || percentile > 100.0)
        throw ConfigurationError("percentile must be in (0, 100], got " +
                                 csv::fmt_double(percentile, 6));
    std::vector<std::pair<std::string, std::uint64_t>> apps(app_totals.begin(), app_totals.end());
    std::sort(apps.begin(), apps.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second)
            return a.second > b.second;
        return a.first < b.first;
    });
    long double total = 0.0L;
    for (const auto& [app, t] : apps)
        total += static_cast<long double>(t);
    std::set<std::string, std::less<>> kept;
    if (total <= 0.0L) {
        for (const auto& [app, t] : apps)
            kept.insert(app);
        return kept;
    }
    const long double target = total * static_cast<long double>(percentile) / 100.0L;
    long double cum = 0.0L;
    for (const auto& [app, t] : apps) {
        kept.insert(app);
        cum += static_cast<long double>(t);
        if (cum >= target)
            break;
    }
    return kept;
}

IngestOutput run_ingest(const std::string& traffic_csv, const CategoryMap& cmap,
                        const IngestConfig& cfg) {
    IngestOutput out;
    IngestStats& st = out.stats;

    if (cmap.categories.size() > 256)
        throw ConfigurationError("at most 256 categories are supported, got " +
                                 std::to_string(cmap.categories.size()));

    std::map<std::string, std::uint64_t, std::less<>> app_totals;
    std::unordered_map<std::pair<double, double>, std::int64_t, CoordHash> coord_site;
    std::int64_t min_minute = INT64_MAX, max_minute = INT64_MIN;

    {
        csv::Reader reader(traffic_csv);
        check_traffic_header(reader);
        std::vector<std::string_view> fields;
        while (reader.next(fields)) {
            ++st.data_lines;
            const auto rec = parse_traffic_fields(fields);
            if (!rec) {
                ++st.malformed;
                continue;
            }
            if (rec->minute < cfg.window_start_minute || rec->minute >= cfg.window_end_minute) {
                ++st.out_of_window;
                continue;
            }
            auto it = app_totals.find(rec->app_id);
            if (it == app_totals.end())
                it = app_totals.emplace(std::string(rec->app_id), 0).first;
            it->second += static_cast<std::uint64_t>(rec->uplink + rec->downlink);
            coord_site.emplace(std::make_pair(rec->lat, rec->lon), -1);
            min_minute = std::min(min_minute, rec->minute);
            max_minute = std::max(max_minute, rec->minute);
        }
    }

    if (st.data_lines > 0 &&
        static_cast<double>(st.malformed) > cfg.malformed_limit * static_cast<double>(st.data_lines))
        throw IngestError(traffic_csv + ": " + std::to_string(st.malformed) + " of " +
                          std::to_string(st.data_lines) + " lines malformed, above the " +
                          csv::fmt_double(cfg.malformed_limit * 100.0, 6) + "% limit");

    st.apps_seen = app_totals.size();
    st.min_minute = min_minute == INT64_MAX ? 0 : min_minute;
    st.max_minute = max_minute == INT64_MIN ? 0 : max_minute;

    std::set<std::string, std::less<>> kept_apps;
    if (cfg.percentile_filter)
        kept_apps = top_percentile_filter(app_totals, cfg.percentile);
    else
        for (const auto& [app, t] : app_totals)
            kept_apps.insert(app);
    st.apps_kept = kept_apps.size();

    std::vector<std::pair<double, double>> antennas;
    antennas.reserve(coord_site.size());
    for (const auto& [coord, unused] : coord_site)
        antennas.push_back(coord);
    std::sort(antennas.begin(), antennas.end());
    auto [sites, assignment] = group_antennas(antennas, cfg.antenna_epsilon);
    out.sites = std::move(sites);
    for (std::size_t i = 0; i < antennas.size(); ++i)
        coord_site[antennas[i]] = assignment[i];

    std::unordered_map<std::string, std::uint32_t, std::hash<std::string>, std::equal_to<>>
        cat_index;
    for (std::size_t i = 0; i < cmap.categories.size(); ++i)
        cat_index.emplace(cmap.categories[i], static_cast<std::uint32_t>(i));

    std::unordered_map<std::uint64_t, std::int64_t> acc;
    std::vector<Shard> shards;
    std::string spill_dir = cfg.spill_dir;

    {
        csv::Reader reader(traffic_csv);
        check_traffic_header(reader);
        std::vector<std::string_view> fields;
        while (reader.next(fields)) {
            const auto rec = parse_traffic_fields(fields);
            if (!rec)
                continue;
            if (rec->minute < cfg.window_start_minute || rec->minute >= cfg.window_end_minute)
                continue;
            if (kept_apps.find(rec->app_id) == kept_apps.end()) {
                ++st.filtered_records;
                continue;
            }
            const auto cit = cmap.by_app.find(rec->app_id);
            if (cit == cmap.by_app.end()) {
                ++st.unmapped_records;
                continue;
            }
            const std::int64_t site = coord_site.find({rec->lat, rec->lon})->second;
            const std::int64_t hour = floor_div(rec->minute, 60);
            const std::uint32_t cat = cat_index.find(cit->second)->second;
            acc[pack_key(site, hour, cat)] += rec->uplink + rec->downlink;
            ++st.kept_records;
            if (acc.size() > cfg.rollup_row_budget) {
                if (spill_dir.empty())
                    spill_dir = std::filesystem::temp_directory_path().string();
                spill_shard(acc, spill_dir, shards.size(), shards);
            }
        }
    }
    st.spill_shards = shards.size();

    // Merge the in-memory accumulator with any spilled shards in key order.
    std::vector<std::pair<std::uint64_t, std::int64_t>> mem(acc.begin(), acc.end());
    acc.clear();
    std::sort(mem.begin(), mem.end());

    auto emit = [&](std::uint64_t key, std::int64_t bytes) {
        RollupRow row;
        row.site = static_cast<std::int64_t>(key >> 32);
        row.hour = static_cast<std::int64_t>((key >> 8) & 0xFFFFFF);
        row.category = cmap.categories[key & 0xFF];
        row.bytes = bytes;
        out.rows.push_back(std::move(row));
    };

    if (shards.empty()) {
        for (const auto& [k, v] : mem)
            emit(k, v);
    } else {
        std::vector<std::unique_ptr<ShardCursor>> cursors;
        for (const Shard& s : shards)
            cursors.push_back(std::make_unique<ShardCursor>(s.path));
        std::size_t mi = 0;
        while (true) {
            std::uint64_t best = UINT64_MAX;
            if (mi < mem.size())
                best = mem[mi].first;
            for (const auto& c : cursors)
                if (c->valid())
                    best = std::min(best, c->key());
            if (best == UINT64_MAX)
                break;
            std::int64_t sum = 0;
            if (mi < mem.size() && mem[mi].first == best) {
                sum += mem[mi].second;
                ++mi;
            }
            for (const auto& c : cursors) {
                while (c->valid() && c->key() == best) {
                    sum += c->value();
                    c->advance();
                }
            }
            emit(best, sum);
        }
        for (const Shard& s : shards)
            std::filesystem::remove(s.path);
    }
    return out;
}

void write_rollup(const std::string& path, const std::vector<RollupRow>& rows,
                  const std::vector<std::pair<std::string, std::string>>& meta) {
    std::string meta_line;
    for (const auto& [k, v] : meta)
        meta_line += (meta_line.empty() ? "" : " ") + k + "=" + v;
    csv::Writer w(path, meta_line, "site_id,hour_utc,category,total_bytes");
    std::string line;
    for (const RollupRow& r : rows) {
        line.clear();
        line += std::to_string(r.site);
        line += ',';
        line += timeutil::format_hour_utc(r.hour);
        line += ',';
        line += r.category;
        line += ',';
        line += std::to_string(r.bytes);
        w.write_line(line);
    }
    w.close();
}

std::vector<RollupRow> read_rollup(const std::string& path) {
    csv::Reader reader(path);
    const int site_col = reader.column("site_id");
    const int hour_col = reader.column("hour_utc");
    const int cat_col = reader.column("category");
    const int bytes_col = reader.column("total_bytes");
    if (site_col < 0 || hour_col < 0 || cat_col < 0 || bytes_col < 0)
        throw FormatError(path + ": rollup header must be 'site_id,hour_utc,category,total_bytes'");
    std::vector<RollupRow> rows;
    std::vector<std::string_view> fields;
    while (reader.next(fields)) {
        if (fields.size() != 4)
            throw FormatError(path + ": bad field count at data line " +
                              std::to_string(reader.data_lines_read()));
        RollupRow r;
        const auto site = csv::parse_i64(fields[site_col]);
        const auto hour = timeutil::parse_hour_utc(fields[hour_col]);
        const auto bytes = csv::parse_i64(fields[bytes_col]);
        if (!site || !hour || !bytes || *bytes < 0)
            throw FormatError(path + ": bad row at data line " +
                              std::to_string(reader.data_lines_read()));
        r.site = *site;
        r.hour = *hour;
        r.category = std::string(fields[cat_col]);
        r.bytes = *bytes;
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_sites(const std::string& path, const std::vector<StationSite>& sites,
                 const std::vector<std::pair<std::string, std::string>>& meta) {
    std::string meta_line;
    for (const auto& [k, v] : meta)
        meta_line += (meta_line.empty() ? "" : " ") + k + "=" + v;
    csv::Writer w(path, meta_line, "site_id,lat,lon");
    std::string line;
    for (const StationSite& s : sites) {
        line.clear();
        line += std::to_string(s.id);
        line += ',';
        line += csv::fmt_double(s.lat, 12);
        line += ',';
        line += csv::fmt_double(s.lon, 12);
        w.write_line(line);
    }
    w.close();
}

std::vector<StationSite> read_sites(const std::string& path) {
    csv::Reader reader(path);
    const int id_col = reader.column("site_id");
    const int lat_col = reader.column("lat");
    const int lon_col = reader.column("lon");
    if (id_col < 0 || lat_col < 0 || lon_col < 0)
        throw FormatError(path + ": sites header must be 'site_id,lat,lon'");
    std::vector<StationSite> sites;
    std::vector<std::string_view> fields;
    while (reader.next(fields)) {
        if (fields.size() != 3)
            throw FormatError(path + ": bad field count at data line " +
                              std::to_string(reader.data_lines_read()));
        StationSite s;
        const auto id = csv::parse_i64(fields[id_col]);
        const auto lat = csv::parse_double(fields[lat_col]);
        const auto lon = csv::parse_double(fields[lon_col]);
        if (!id || !lat || !lon)
            throw FormatError(path + ": bad row at data line " +
                              std::to_string(reader.data_lines_read()));
        s.id = *id;
        s.lat = *lat;
        s.lon = *lon;
        sites.push_back(s);
    }
    return sites;
}

}  // namespace zonecast::ingest
