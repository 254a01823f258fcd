#include "zonecast/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "zonecast/csv.hpp"
#include "zonecast/errors.hpp"
#include "zonecast/parallel.hpp"
#include "zonecast/timeutil.hpp"

namespace zonecast::feat {

namespace {

struct Window {
    std::int64_t min_hour = 0;
    std::int64_t max_hour = 0;  // inclusive
    std::int64_t hours() const { return max_hour - min_hour + 1; }
};

Window series_window(const interp::ZoneHourlySeries& series) {
    if (series.rows.empty())
        throw FeatureError("zone series is empty, no observation window");
    Window w{series.rows.front().hour, series.rows.front().hour};
    for (const auto& r : series.rows) {
        w.min_hour = std::min(w.min_hour, r.hour);
        w.max_hour = std::max(w.max_hour, r.hour);
    }
    return w;
}

// Mean/population-std z-scoring shared by TWS and SCU. Returns false (and
// zero-fills) for constant input or σ below 1e-12 relative.
bool zscore_in_place(double* v, std::size_t n) {
    double lo = v[0], hi = v[0];
    for (std::size_t i = 1; i < n; ++i) {
        lo = std::min(lo, v[i]);
        hi = std::max(hi, v[i]);
    }
    if (lo == hi) {
        std::fill(v, v + n, 0.0);
        return false;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        sum += v[i];
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = v[i] - mean;
        ss += d * d;
    }
    const double sigma = std::sqrt(ss / static_cast<double>(n));
    if (sigma <= 1e-12 * std::max(1.0, std::abs(mean))) {
        std::fill(v, v + n, 0.0);
        return false;
    }
    for (std::size_t i = 0; i < n; ++i)
        v[i] = (v[i] - mean) / sigma;
    return true;
}

}  // namespace

std::optional<Selector> parse_selector(const std::string& name) {
    if (name == "Cumulative" || name == "cumulative")
        return Selector::Cumulative;
    if (name == "RCA" || name == "rca")
        return Selector::Rca;
    if (name == "TWS" || name == "tws")
        return Selector::Tws;
    if (name == "All" || name == "all")
        return Selector::All;
    return std::nullopt;
}

std::string selector_name(Selector s) {
    switch (s) {
        case Selector::Cumulative: return "Cumulative";
        case Selector::Rca: return "RCA";
        case Selector::Tws: return "TWS";
        case Selector::All: return "All";
    }
    return "?";
}

int slot_of_hour(std::int64_t utc_epoch_hours, int tz_offset_hours) {
    return timeutil::hour_of_week(utc_epoch_hours + tz_offset_hours);
}

double zero_padded_median(std::vector<double>& observed, std::int64_t n) {
    const std::int64_t k = static_cast<std::int64_t>(observed.size());
    if (n <= 0 || k > n)
        throw FeatureError("median over " + std::to_string(n) + " slots given " +
                           std::to_string(k) + " observations");
    std::sort(observed.begin(), observed.end());
    const std::int64_t zeros = n - k;
    auto element = [&](std::int64_t i) {
        return i < zeros ? 0.0 : observed[static_cast<std::size_t>(i - zeros)];
    };
    const std::int64_t m1 = (n - 1) / 2;
    const std::int64_t m2 = n / 2;
    return 0.5 * (element(m1) + element(m2));
}

std::array<double, kWeekHours> raw_signature(
    const std::vector<std::vector<double>>& values_by_slot,
    const std::array<std::int64_t, kWeekHours>& occurrences) {
    if (values_by_slot.size() != kWeekHours)
        throw FeatureError("raw_signature needs exactly 168 slots, got " +
                           std::to_string(values_by_slot.size()));
    std::array<double, kWeekHours> out{};
    std::vector<double> scratch;
    for (int s = 0; s < kWeekHours; ++s) {
        scratch.assign(values_by_slot[s].begin(), values_by_slot[s].end());
        out[s] = zero_padded_median(scratch, occurrences[s]);
    }
    return out;
}

std::array<double, kWeekHours> standardize_signature(const std::array<double, kWeekHours>& raw,
                                                     bool& degenerate) {
    std::array<double, kWeekHours> out = raw;
    degenerate = !zscore_in_place(out.data(), out.size());
    return out;
}

TwsResult compute_tws(const interp::ZoneHourlySeries& series, int tz_offset_hours, int threads) {
    const Window w = series_window(series);
    if (w.hours() < 7 * 24)
        throw FeatureError("observation window spans " + std::to_string(w.hours()) +
                           " hours; typical-week signatures need at least 7 days");

    std::array<std::int64_t, kWeekHours> occurrences{};
    for (std::int64_t h = w.min_hour; h <= w.max_hour; ++h)
        occurrences[slot_of_hour(h, tz_offset_hours) - 1] += 1;

    TwsResult out;
    out.zones = series.zones;
    out.categories = series.categories;
    const std::size_t nz = out.zones.size();
    const std::size_t nc = out.categories.size();
    out.sig.assign(nz * nc, {});
    out.degenerate.assign(nz * nc, 0);

    // Row ranges per zone (rows are sorted by zone first).
    std::vector<std::pair<std::size_t, std::size_t>> zone_range(nz, {0, 0});
    for (std::size_t i = 0; i < series.rows.size();) {
        std::size_t j = i;
        while (j < series.rows.size() && series.rows[j].zone == series.rows[i].zone)
            ++j;
        zone_range[series.rows[i].zone] = {i, j};
        i = j;
    }

    parallel_for(nz, threads, [&](std::size_t zi) {
        std::vector<std::vector<double>> by_slot(kWeekHours);
        const auto [lo, hi] = zone_range[zi];
        for (std::size_t ci = 0; ci < nc; ++ci) {
            for (auto& v : by_slot)
                v.clear();
            for (std::size_t i = lo; i < hi; ++i) {
                const auto& r = series.rows[i];
                if (r.category != ci)
                    continue;
                by_slot[slot_of_hour(r.hour, tz_offset_hours) - 1].push_back(r.bytes);
            }
            const auto raw = raw_signature(by_slot, occurrences);
            bool degen = false;
            out.sig[zi * nc + ci] = standardize_signature(raw, degen);
            out.degenerate[zi * nc + ci] = degen ? 1 : 0;
        }
    });
    return out;
}

RcaResult compute_rca(const interp::ZoneHourlySeries& series,
                      const std::map<std::string, double>* population) {
    const Window w = series_window(series);
    const std::int64_t window_hours = w.hours();
    const std::size_t nz_all = series.zones.size();
    const std::size_t nc_all = series.categories.size();

    // T_za: median hourly traffic over the whole window, absent hours = 0.
    std::vector<double> t(nz_all * nc_all, 0.0);
    {
        std::vector<std::vector<double>> observed(nc_all);
        std::size_t i = 0;
        while (i < series.rows.size()) {
            const std::uint32_t zi = series.rows[i].zone;
            for (auto& v : observed)
                v.clear();
            while (i < series.rows.size() && series.rows[i].zone == zi) {
                observed[series.rows[i].category].push_back(series.rows[i].bytes);
                ++i;
            }
            for (std::size_t ci = 0; ci < nc_all; ++ci)
                t[zi * nc_all + ci] = zero_padded_median(observed[ci], window_hours);
        }
    }

    RcaResult out;

    // Optional per-capita normalization; zones without population data drop.
    std::vector<char> zone_ok(nz_all, 1);
    if (population != nullptr) {
        for (std::size_t zi = 0; zi < nz_all; ++zi) {
            const auto it = population->find(series.zones[zi]);
            if (it == population->end() || !(it->second > 0.0)) {
                zone_ok[zi] = 0;
                continue;
            }
            for (std::size_t ci = 0; ci < nc_all; ++ci)
                t[zi * nc_all + ci] /= it->second;
        }
    }

    // Keep zones with positive total and categories with positive global sum.
    std::vector<double> zone_total(nz_all, 0.0);
    std::vector<double> cat_total(nc_all, 0.0);
    for (std::size_t zi = 0; zi < nz_all; ++zi) {
        if (!zone_ok[zi])
            continue;
        for (std::size_t ci = 0; ci < nc_all; ++ci)
            zone_total[zi] += t[zi * nc_all + ci];
    }
    for (std::size_t zi = 0; zi < nz_all; ++zi) {
        if (!zone_ok[zi] || !(zone_total[zi] > 0.0))
            continue;
        for (std::size_t ci = 0; ci < nc_all; ++ci)
            cat_total[ci] += t[zi * nc_all + ci];
    }

    std::vector<std::size_t> kept_zones, kept_cats;
    for (std::size_t zi = 0; zi < nz_all; ++zi)
        if (zone_ok[zi] && zone_total[zi] > 0.0)
            kept_zones.push_back(zi);
    for (std::size_t ci = 0; ci < nc_all; ++ci) {
        if (cat_total[ci] > 0.0)
            kept_cats.push_back(ci);
        else
            out.dropped_categories.push_back(series.categories[ci]);
    }
    if (kept_zones.empty())
        throw FeatureError("RCA: no zone has positive median traffic");
    if (kept_cats.empty())
        throw FeatureError("RCA: no category has positive global traffic");

    double grand = 0.0;
    for (const std::size_t ci : kept_cats)
        grand += cat_total[ci];
    // Zone totals must match the kept-category universe for shares to nest.
    std::vector<double> zone_total_kept(kept_zones.size(), 0.0);
    for (std::size_t k = 0; k < kept_zones.size(); ++k)
        for (const std::size_t ci : kept_cats)
            zone_total_kept[k] += t[kept_zones[k] * nc_all + ci];

    const std::size_t nc = kept_cats.size();
    out.values.assign(kept_zones.size() * nc, 0.0);
    out.t_za.assign(kept_zones.size() * nc, 0.0);
    out.t_zdot = zone_total_kept;
    out.t_dota.assign(nc, 0.0);
    out.t_dotdot = grand;
    for (std::size_t c = 0; c < nc; ++c)
        out.t_dota[c] = cat_total[kept_cats[c]];
    for (std::size_t k = 0; k < kept_zones.size(); ++k) {
        out.zones.push_back(series.zones[kept_zones[k]]);
        if (!(zone_total_kept[k] > 0.0))
            throw FeatureError("RCA: zone " + series.zones[kept_zones[k]] +
                               " lost all traffic to dropped categories");
        for (std::size_t c = 0; c < nc; ++c) {
            const double tza = t[kept_zones[k] * nc_all + kept_cats[c]];
            out.t_za[k * nc + c] = tza;
            out.values[k * nc + c] =
                (tza / zone_total_kept[k]) / (out.t_dota[c] / grand);
        }
    }
    for (const std::size_t ci : kept_cats)
        out.categories.push_back(series.categories[ci]);
    return out;
}

ScuResult compute_scu(const interp::ZoneHourlySeries& series) {
    const std::size_t nz = series.zones.size();
    const std::size_t nc = series.categories.size();
    if (nz < 2)
        throw FeatureError("SCU needs at least 2 zones, got " + std::to_string(nz));

    ScuResult out;
    out.zones = series.zones;
    out.categories = series.categories;
    out.c_za.assign(nz * nc, 0.0);
    for (const auto& r : series.rows)
        out.c_za[r.zone * nc + r.category] += r.bytes;

    out.values = out.c_za;
    out.degenerate.assign(nc, 0);
    std::vector<double> col(nz);
    for (std::size_t ci = 0; ci < nc; ++ci) {
        for (std::size_t zi = 0; zi < nz; ++zi)
            col[zi] = out.values[zi * nc + ci];
        const bool ok = zscore_in_place(col.data(), nz);
        out.degenerate[ci] = ok ? 0 : 1;
        for (std::size_t zi = 0; zi < nz; ++zi)
            out.values[zi * nc + ci] = col[zi];
    }
    return out;
}

FeatureMatrix assemble(Selector selector, const TwsResult& tws, const RcaResult& rca,
                       const ScuResult& scu, std::vector<std::string>* dropped_zones) {
    // Row universe: zones present in all three feature families, so every
    // selector trains on identical rows.
    std::set<std::string> rca_zones(rca.zones.begin(), rca.zones.end());
    std::set<std::string> scu_zones(scu.zones.begin(), scu.zones.end());
    std::vector<std::string> zones;
    for (const std::string& z : tws.zones) {
        if (rca_zones.count(z) && scu_zones.count(z))
            zones.push_back(z);
        else if (dropped_zones != nullptr)
            dropped_zones->push_back(z);
    }
    if (zones.empty())
        throw FeatureError("no zone appears in all three feature families");

    std::unordered_map<std::string, std::size_t> tws_row, rca_row, scu_row;
    for (std::size_t i = 0; i < tws.zones.size(); ++i)
        tws_row.emplace(tws.zones[i], i);
    for (std::size_t i = 0; i < rca.zones.size(); ++i)
        rca_row.emplace(rca.zones[i], i);
    for (std::size_t i = 0; i < scu.zones.size(); ++i)
        scu_row.emplace(scu.zones[i], i);

    FeatureMatrix fm;
    fm.zones = zones;
    const bool want_tws = selector == Selector::Tws || selector == Selector::All;
    const bool want_rca = selector == Selector::Rca || selector == Selector::All;
    const bool want_scu = selector == Selector::Cumulative || selector == Selector::All;

    if (want_tws) {
        for (const std::string& cat : tws.categories)
            for (int h = 1; h <= kWeekHours; ++h)
                fm.columns.push_back("TWS:" + cat + ":" + std::to_string(h));
    }
    if (want_rca) {
        for (const std::string& cat : rca.categories)
            fm.columns.push_back("RCA:" + cat);
    }
    if (want_scu) {
        for (const std::string& cat : scu.categories)
            fm.columns.push_back("SCU:" + cat);
    }

    const std::size_t ncols = fm.columns.size();
    fm.values.assign(zones.size() * ncols, 0.0);
    const std::size_t tws_nc = tws.categories.size();
    const std::size_t rca_nc = rca.categories.size();
    const std::size_t scu_nc = scu.categories.size();
    for (std::size_t row = 0; row < zones.size(); ++row) {
        double* dst = fm.values.data() + row * ncols;
        std::size_t col = 0;
        if (want_tws) {
            const std::size_t zi = tws_row.find(zones[row])->second;
            for (std::size_t ci = 0; ci < tws_nc; ++ci) {
                const auto& sig = tws.sig[zi * tws_nc + ci];
                for (int h = 0; h < kWeekHours; ++h)
                    dst[col++] = sig[h];
            }
        }
        if (want_rca) {
            const std::size_t zi = rca_row.find(zones[row])->second;
            for (std::size_t ci = 0; ci < rca_nc; ++ci)
                dst[col++] = rca.values[zi * rca_nc + ci];
        }
        if (want_scu) {
            const std::size_t zi = scu_row.find(zones[row])->second;
            for (std::size_t ci = 0; ci < scu_nc; ++ci)
                dst[col++] = scu.values[zi * scu_nc + ci];
        }
    }
    return fm;
}

void write_features(const std::string& path, const FeatureMatrix& fm,
                    const std::vector<std::pair<std::string, std::string>>& meta) {
    std::string meta_line;
    for (const auto& [k, v] : meta)
        meta_line += (meta_line.empty() ? "" : " ") + k + "=" + v;
    std::string header = "zone_id";
    for (const std::string& c : fm.columns) {
        header += ',';
        header += c;
    }
    csv::Writer w(path, meta_line, header);
    std::string line;
    const std::size_t ncols = fm.ncols();
    for (std::size_t row = 0; row < fm.zones.size(); ++row) {
        line.clear();
        line += fm.zones[row];
        for (std::size_t col = 0; col < ncols; ++col) {
            line += ',';
            line += csv::fmt_double(fm.values[row * ncols + col], 12);
        }
        w.write_line(line);
    }
    w.close();
}

FeatureMatrix read_features(const std::string& path) {
    csv::Reader reader(path);
    const auto& header = reader.header();
    if (header.empty() || header[0] != "zone_id")
        throw FormatError(path + ": feature matrix header must start with zone_id");
    FeatureMatrix fm;
    fm.columns.assign(header.begin() + 1, header.end());
    std::vector<std::string_view> fields;
    while (reader.next(fields)) {
        if (fields.size() != header.size())
            throw FormatError(path + ": bad field count at data line " +
                              std::to_string(reader.data_lines_read()));
        fm.zones.push_back(std::string(fields[0]));
        for (std::size_t i = 1; i < fields.size(); ++i) {
            const auto v = csv::parse_double(fields[i]);
            if (!v || !std::isfinite(*v))
                throw FormatError(path + ": bad value at data line " +
                                  std::to_string(reader.data_lines_read()));
            fm.values.push_back(*v);
        }
    }
    return fm;
}

std::map<std::string, double> load_population(const std::string& path) {
    csv::Reader reader(path);
    const int zone_col = reader.column("zone_id");
    const int pop_col = reader.column("population");
    if (zone_col < 0 || pop_col < 0)
        throw FormatError(path + ": population header must be 'zone_id,population'");
    std::map<std::string, double> pop;
    std::vector<std::string_view> fields;
    while (reader.next(fields)) {
        if (fields.size() < 2)
            throw FormatError(path + ": bad field count at data line " +
                              std::to_string(reader.data_lines_read()));
        const auto v = csv::parse_double(fields[pop_col]);
        if (!v)
            throw FormatError(path + ": bad population at data line " +
                              std::to_string(reader.data_lines_read()));
        pop[std::string(fields[zone_col])] = *v;
    }
    return pop;
}

}  // namespace zonecast::feat
