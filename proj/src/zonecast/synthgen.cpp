#include <zonecast/synthgen.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include <zonecast/csv.hpp>
#include <zonecast/errors.hpp>
#include <zonecast/features.hpp>
#include <zonecast/geojson.hpp>
#include <zonecast/geometry.hpp>
#include <zonecast/ingest.hpp>
#include <zonecast/rng.hpp>
#include <zonecast/timeutil.hpp>

namespace zonecast::synth {
namespace {

constexpr int kHoursPerWeek = 168;

// ---------------------------------------------------------------------------
// Hour-of-week base profiles. Each category's profile is derived from a fixed
// parameter row (documented in the README): a night floor plus Gaussian
// morning / midday / evening bumps, with weekend amplitudes rescaled and
// shifted. Profiles are normalized to mean 1 so base_bytes sets the scale.
// ---------------------------------------------------------------------------
struct ProfileParams {
    double floor;
    double morning_amp;
    double morning_hour;
    double midday_amp;
    double evening_amp;
    double evening_hour;
    double weekend_factor;
    double weekend_shift;
};

const std::map<std::string, ProfileParams>& profile_table() {
    static const std::map<std::string, ProfileParams> table = {
        {"advertising", {0.35, 0.5, 10.0, 0.8, 0.7, 19.0, 0.9, 1.5}},
        {"android_download", {0.25, 0.3, 9.0, 0.5, 0.9, 21.0, 1.1, 2.0}},
        {"apple_cloud", {0.40, 0.6, 8.0, 0.5, 0.6, 22.0, 0.8, 1.0}},
        {"apple_download", {0.25, 0.3, 10.0, 0.5, 0.9, 20.0, 1.1, 2.0}},
        {"apple_music", {0.20, 0.7, 8.0, 0.6, 0.8, 17.0, 0.9, 3.0}},
        {"cloud", {0.35, 0.9, 9.0, 0.7, 0.4, 16.0, 0.5, 1.0}},
        {"email", {0.15, 1.0, 9.0, 0.8, 0.4, 17.0, 0.35, 2.0}},
        {"gaming", {0.20, 0.1, 11.0, 0.4, 1.3, 21.0, 1.5, 1.0}},
        {"maps", {0.15, 0.9, 8.0, 0.4, 1.0, 18.0, 0.8, 3.0}},
        {"messaging", {0.25, 0.6, 8.0, 0.7, 1.0, 20.0, 0.9, 1.5}},
        {"music", {0.20, 0.6, 8.0, 0.7, 0.7, 16.0, 0.85, 3.0}},
        {"news", {0.20, 1.3, 7.0, 0.5, 0.5, 19.0, 0.7, 2.5}},
        {"productivity", {0.10, 1.1, 9.0, 0.9, 0.3, 15.0, 0.3, 1.0}},
        {"social_media", {0.30, 0.5, 8.0, 0.7, 1.2, 21.0, 1.2, 1.5}},
        {"social_media_video", {0.25, 0.4, 9.0, 0.6, 1.3, 22.0, 1.3, 2.0}},
        {"streaming", {0.20, 0.2, 9.0, 0.4, 1.5, 21.0, 1.4, 1.0}},
        {"travel", {0.20, 0.7, 9.0, 0.8, 0.5, 17.0, 1.2, 2.0}},
        {"video", {0.25, 0.3, 10.0, 0.5, 1.3, 21.0, 1.3, 1.5}},
        {"web_browsing", {0.30, 0.7, 9.0, 0.8, 0.9, 20.0, 0.9, 2.0}},
    };
    return table;
}

/// Categories outside the shipped table get parameters derived from the name
/// hash, so custom category lists stay deterministic.
ProfileParams params_for(const std::string& category) {
    const auto it = profile_table().find(category);
    if (it != profile_table().end())
        return it->second;
    const std::uint64_t h = fnv1a64_str(category);
    const auto unit = [&](int shift) {
        return static_cast<double>((h >> shift) & 0xFFFF) / 65535.0;
    };
    return ProfileParams{0.1 + 0.3 * unit(0),  0.2 + 1.0 * unit(8),  7.0 + 4.0 * unit(16),
                         0.3 + 0.6 * unit(24), 0.2 + 1.2 * unit(32), 16.0 + 6.0 * unit(40),
                         0.4 + 1.0 * unit(48), 1.0 + 2.0 * unit(52)};
}

double wrapped_gauss(double hour, double mu, double sigma) {
    double d = std::abs(hour - mu);
    d = std::min(d, 24.0 - d);
    return std::exp(-d * d / (2.0 * sigma * sigma));
}

/// 168-slot profile (slot 0 = Monday 00h), mean normalized to 1. `shift`
/// rotates the within-day peaks; the shape-signal variant uses shift = 6.
std::array<double, kHoursPerWeek> build_profile(const ProfileParams& p, double shift) {
    std::array<double, kHoursPerWeek> out{};
    for (int s = 0; s < kHoursPerWeek; ++s) {
        const int dow = s / 24;
        const double hod = static_cast<double>(s % 24);
        const bool weekend = dow >= 5;
        const double amp = weekend ? p.weekend_factor : 1.0;
        const double peak_shift = shift + (weekend ? p.weekend_shift : 0.0);
        const double m = std::fmod(p.morning_hour + peak_shift + 24.0, 24.0);
        const double mid = std::fmod(13.5 + peak_shift + 24.0, 24.0);
        const double e = std::fmod(p.evening_hour + peak_shift + 24.0, 24.0);
        out[s] = p.floor + amp * (p.morning_amp * wrapped_gauss(hod, m, 2.0) +
                                  p.midday_amp * wrapped_gauss(hod, mid, 3.0) +
                                  p.evening_amp * wrapped_gauss(hod, e, 2.6));
    }
    double mean = 0.0;
    for (const double v : out)
        mean += v;
    mean /= kHoursPerWeek;
    for (double& v : out)
        v /= mean;
    return out;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string join_meta(const std::vector<std::pair<std::string, std::string>>& meta) {
    std::string line;
    for (const auto& [k, v] : meta)
        line += (line.empty() ? "" : " ") + k + "=" + v;
    return line;
}

std::string zone_name(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "Z%05zu", index);
    return buf;
}

nlohmann::ordered_json spec_to_json(const ScenarioSpec& spec) {
    nlohmann::ordered_json j;
    j["seed"] = spec.seed;
    j["stations"] = spec.stations;
    j["grid_nx"] = spec.grid_nx;
    j["grid_ny"] = spec.grid_ny;
    j["zone_size_meters"] = spec.zone_size_meters;
    j["perturbed_grid"] = spec.perturbed_grid;
    j["stations_on_grid"] = spec.stations_on_grid;
    j["weeks"] = spec.weeks;
    j["records_per_hour"] = spec.records_per_hour;
    j["start_date"] = spec.start_date;
    j["categories"] = spec.categories;
    j["base_bytes"] = spec.base_bytes;
    j["noise_sigma"] = spec.noise_sigma;
    j["station_volume_sigma"] = spec.station_volume_sigma;
    j["population_min"] = spec.population_min;
    j["population_max"] = spec.population_max;
    j["suppressed_fraction"] = spec.suppressed_fraction;
    nlohmann::ordered_json effects = nlohmann::ordered_json::array();
    for (const SignalEffect& e : spec.effects)
        effects.push_back({{"category", e.category},
                           {"indicator", e.indicator},
                           {"volume_beta", e.volume_beta},
                           {"shape_alpha", e.shape_alpha}});
    j["effects"] = std::move(effects);
    return j;
}

std::int64_t validate_spec(const ScenarioSpec& spec) {
    if (spec.grid_nx < 1 || spec.grid_ny < 1 || spec.grid_nx * spec.grid_ny < 9)
        throw ConfigurationError("scenario: zone grid must contain at least 9 zones");
    if (!spec.stations_on_grid && spec.stations < 4)
        throw ConfigurationError("scenario: at least 4 stations required");
    if (spec.weeks < 1)
        throw ConfigurationError("scenario: at least 1 week of traffic required");
    if (spec.records_per_hour < 1)
        throw ConfigurationError("scenario: records_per_hour must be at least 1");
    if (!(spec.zone_size_meters > 0.0))
        throw ConfigurationError("scenario: zone_size_meters must be positive");
    if (!(spec.base_bytes > 0.0))
        throw ConfigurationError("scenario: base_bytes must be positive");
    if (spec.noise_sigma < 0.0 || spec.station_volume_sigma < 0.0)
        throw ConfigurationError("scenario: noise sigmas must be non-negative");
    if (!(spec.population_min > 0.0) || spec.population_max < spec.population_min)
        throw ConfigurationError("scenario: population range invalid");
    if (spec.suppressed_fraction < 0.0 || spec.suppressed_fraction > 0.5)
        throw ConfigurationError("scenario: suppressed_fraction must be in [0, 0.5]");
    if (spec.categories.empty())
        throw ConfigurationError("scenario: category list is empty");
    std::set<std::string> cats(spec.categories.begin(), spec.categories.end());
    if (cats.size() != spec.categories.size())
        throw ConfigurationError("scenario: duplicate category name");
    static const std::set<std::string> kDrivers = {"median_income", "poverty", "gini"};
    for (const SignalEffect& e : spec.effects) {
        if (cats.find(e.category) == cats.end())
            throw ConfigurationError("scenario: effect references unknown category " + e.category);
        if (kDrivers.find(e.indicator) == kDrivers.end())
            throw ConfigurationError("scenario: effect indicator must be one of "
                                     "median_income/poverty/gini, got " +
                                     e.indicator);
        if (!std::isfinite(e.volume_beta) || !std::isfinite(e.shape_alpha))
            throw ConfigurationError("scenario: effect sizes must be finite");
    }
    const auto start = timeutil::parse_minute_utc(spec.start_date + "T00:00");
    if (!start)
        throw ConfigurationError("scenario: start_date must be YYYY-MM-DD, got " +
                                 spec.start_date);
    return *start / 60;  // epoch hours
}

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

/// Round-trips a coordinate through its CSV representation so the geometry
/// the generator plants signal with is bit-identical to what the pipeline
/// reads back.
double printable(double v) { return *csv::parse_double(csv::fmt_double(v)); }

struct AppSpec {
    std::string id;
    int category = -1;  // -1: unmapped flat-profile app
    double mult = 1.0;
};

std::uint64_t file_checksum(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f)
        throw FormatError("cannot open file for checksum: " + path);
    std::vector<char> buf(1 << 20);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    std::size_t got = 0;
    while ((got = std::fread(buf.data(), 1, buf.size(), f)) > 0)
        h = fnv1a64(buf.data(), got, h);
    std::fclose(f);
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

ScenarioSpec::ScenarioSpec()
    : categories(default_categories()), effects(default_effects()) {}

std::vector<std::string> ScenarioSpec::default_categories() {
    std::vector<std::string> cats;
    for (const auto& [name, params] : profile_table())
        cats.push_back(name);
    return cats;
}

std::vector<SignalEffect> ScenarioSpec::default_effects() {
    // Volume betas scale log-volume per unit z-score of the indicator; shape
    // alphas steer the hour-of-week profile blend. Alphas dominate betas so
    // that the signature features carry more signal than the share-based
    // ones, mirroring the qualitative finding the pipeline is tested against.
    return {
        {"news", "median_income", 0.75, 1.9},
        {"web_browsing", "median_income", 0.0, 2.2},
        {"productivity", "median_income", 0.6, 1.2},
        {"social_media", "median_income", -0.65, -1.7},
        {"streaming", "poverty", 0.5, 1.5},
        {"music", "poverty", -0.35, 0.0},
        {"gaming", "gini", -0.45, -1.0},
    };
}

ScenarioPaths ScenarioPaths::under(const std::string& dir) {
    ScenarioPaths p;
    p.region = dir + "/region.geojson";
    p.zones = dir + "/zones.geojson";
    p.indicators = dir + "/indicators.csv";
    p.category_map = dir + "/category_map.csv";
    p.traffic = dir + "/traffic.csv";
    p.stations = dir + "/stations.csv";
    p.manifest = dir + "/manifest.json";
    return p;
}

ScenarioPaths generate(const ScenarioSpec& spec_in, const std::string& out_dir) {
    ScenarioSpec spec = spec_in;
    std::sort(spec.categories.begin(), spec.categories.end());
    const std::int64_t start_hour = validate_spec(spec);
    std::filesystem::create_directories(out_dir);
    const ScenarioPaths paths = ScenarioPaths::under(out_dir);

    const std::string spec_dump = spec_to_json(spec).dump();
    const std::string config_hash = hex64(fnv1a64_str(spec_dump));
    const std::string meta = join_meta({{"generator", "zonecast-gen"},
                                        {"seed", std::to_string(spec.seed)},
                                        {"config_hash", config_hash}});
    const geo_io::MetaFields meta_fields = {{"generator", "zonecast-gen"},
                                             {"seed", std::to_string(spec.seed)},
                                             {"config_hash", config_hash}};

    Rng rng(spec.seed);
    Rng rng_geo = rng.derive(1);
    Rng rng_ind = rng.derive(2);
    Rng rng_traffic = rng.derive(3);

    // --- zones: a grid of quads over [0, nx*size] x [0, ny*size] meters.
    // Perturbation jitters the shared lattice nodes (boundary nodes only along
    // the boundary), so the zones always tile the region exactly.
    const int nx = spec.grid_nx;
    const int ny = spec.grid_ny;
    const double cell = spec.zone_size_meters;
    const double width = nx * cell;
    const double height = ny * cell;
    std::vector<geom::Point> nodes(static_cast<std::size_t>((nx + 1) * (ny + 1)));
    for (int iy = 0; iy <= ny; ++iy) {
        for (int ix = 0; ix <= nx; ++ix) {
            double x = ix * cell;
            double y = iy * cell;
            if (spec.perturbed_grid) {
                const double jx = rng_geo.uniform_in(-0.18, 0.18) * cell;
                const double jy = rng_geo.uniform_in(-0.18, 0.18) * cell;
                if (ix > 0 && ix < nx)
                    x += jx;
                if (iy > 0 && iy < ny)
                    y += jy;
            }
            nodes[static_cast<std::size_t>(iy * (nx + 1) + ix)] = {printable(x), printable(y)};
        }
    }
    std::vector<geom::Zone> zones;
    zones.reserve(static_cast<std::size_t>(nx * ny));
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            const auto node = [&](int ax, int ay) {
                return nodes[static_cast<std::size_t>(ay * (nx + 1) + ax)];
            };
            geom::Zone z;
            z.id = zone_name(static_cast<std::size_t>(iy * nx + ix));
            geom::Polygon poly;
            poly.exterior = {node(ix, iy), node(ix + 1, iy), node(ix + 1, iy + 1),
                             node(ix, iy + 1)};
            z.shape.push_back(std::move(poly));
            z.area = geom::multipolygon_area(z.shape);
            zones.push_back(std::move(z));
        }
    }
    const std::size_t nzones = zones.size();

    geom::BoundingRegion region;
    region.shape.exterior = {{0.0, 0.0}, {width, 0.0}, {width, height}, {0.0, height}};

    // --- stations -----------------------------------------------------------
    std::vector<geom::Site> sites;
    std::set<std::pair<double, double>> used;
    if (spec.stations_on_grid) {
        for (std::size_t z = 0; z < nzones; ++z) {
            const geom::Ring& r = zones[z].shape[0].exterior;
            double cx = 0.0;
            double cy = 0.0;
            for (const geom::Point& p : r) {
                cx += p.x;
                cy += p.y;
            }
            const geom::Point loc{printable(cx / 4.0), printable(cy / 4.0)};
            sites.push_back({static_cast<geom::SiteId>(z), loc});
        }
    } else {
        // Stratified placement: one site drawn uniformly inside each cell of
        // the best-fitting station grid, mirroring how antennas are deployed
        // for coverage. Compared with i.i.d. placement this keeps Voronoi
        // cell sizes comparable, so no cell swallows many zones and each
        // zone's interpolated traffic stays dominated by nearby antennas.
        const int cols = std::max(
            1, static_cast<int>(std::lround(std::sqrt(
                   static_cast<double>(spec.stations) * width / std::max(height, 1e-9)))));
        const int rows = (spec.stations + cols - 1) / cols;
        const int total = rows * cols;
        const int skip = total - spec.stations;
        std::vector<char> skipped(static_cast<std::size_t>(total), 0);
        for (int k = 0; k < skip; ++k)
            skipped[static_cast<std::size_t>((static_cast<double>(k) + 0.5) *
                                             static_cast<double>(total) /
                                             static_cast<double>(skip))] = 1;
        const double cw = width / cols;
        const double ch = height / rows;
        int placed = 0;
        for (int c = 0; c < total; ++c) {
            if (skipped[static_cast<std::size_t>(c)])
                continue;
            const double x0 = (c % cols) * cw;
            const double y0 = (c / cols) * ch;
            geom::Point loc;
            while (true) {
                loc = {printable(x0 + rng_geo.uniform_in(0.0, cw)),
                       printable(y0 + rng_geo.uniform_in(0.0, ch))};
                if (geom::winding_number(region.shape, loc) == 0)
                    continue;  // outside the region: redraw, never emit
                if (used.insert({loc.x, loc.y}).second)
                    break;
            }
            sites.push_back({static_cast<geom::SiteId>(placed++), loc});
        }
    }
    const std::size_t nstations = sites.size();

    // --- indicators ----------------------------------------------------------
    // Two latent fields drive everything: W ("wealth") and a second field V.
    // Each is white noise lightly smoothed over the zone grid with a
    // short-range Gaussian kernel. The smoothing radius balances two failure
    // modes: with no smoothing, the areal station mixture blends ~6
    // uncorrelated zones and caps recoverable R-squared far below the planted
    // signal; with long-range smoothness, a model can interpolate indicators
    // from spatial neighbours even with zero planted effects and the
    // zero-effect null no longer scores near zero. A radius of half a zone
    // keeps adjacent-zone correlation ~0.26 while the mixture stays dominated
    // by the zone's own value.
    std::vector<double> wealth(nzones);
    std::vector<double> second(nzones);
    {
        const std::size_t gx = static_cast<std::size_t>(spec.grid_nx);
        const std::size_t gy = static_cast<std::size_t>(spec.grid_ny);
        std::vector<double> noise_w(nzones);
        std::vector<double> noise_v(nzones);
        for (std::size_t z = 0; z < nzones; ++z) {
            noise_w[z] = rng_ind.normal();
            noise_v[z] = rng_ind.normal();
        }
        constexpr double kRadius = 0.6;  // in zone widths
        constexpr int kReach = 2;
        std::array<double, 2 * kReach + 1> kernel{};
        for (int d = -kReach; d <= kReach; ++d)
            kernel[static_cast<std::size_t>(d + kReach)] =
                std::exp(-static_cast<double>(d * d) / (2.0 * kRadius * kRadius));
        const auto blur = [&](const std::vector<double>& src) {
            std::vector<double> tmp(nzones, 0.0);
            std::vector<double> dst(nzones, 0.0);
            for (std::size_t iy = 0; iy < gy; ++iy)
                for (std::size_t ix = 0; ix < gx; ++ix) {
                    double acc = 0.0;
                    double norm = 0.0;
                    for (int d = -kReach; d <= kReach; ++d) {
                        const std::int64_t jx = static_cast<std::int64_t>(ix) + d;
                        if (jx < 0 || jx >= static_cast<std::int64_t>(gx))
                            continue;
                        const double k = kernel[static_cast<std::size_t>(d + kReach)];
                        acc += k * src[iy * gx + static_cast<std::size_t>(jx)];
                        norm += k;
                    }
                    tmp[iy * gx + ix] = acc / norm;
                }
            for (std::size_t iy = 0; iy < gy; ++iy)
                for (std::size_t ix = 0; ix < gx; ++ix) {
                    double acc = 0.0;
                    double norm = 0.0;
                    for (int d = -kReach; d <= kReach; ++d) {
                        const std::int64_t jy = static_cast<std::int64_t>(iy) + d;
                        if (jy < 0 || jy >= static_cast<std::int64_t>(gy))
                            continue;
                        const double k = kernel[static_cast<std::size_t>(d + kReach)];
                        acc += k * tmp[static_cast<std::size_t>(jy) * gx + ix];
                        norm += k;
                    }
                    dst[iy * gx + ix] = acc / norm;
                }
            const auto [lo_it, hi_it] = std::minmax_element(dst.begin(), dst.end());
            const double lo = *lo_it;
            const double span = *hi_it - lo > 0 ? *hi_it - lo : 1.0;
            for (double& v : dst)
                v = (v - lo) / span;
            return dst;
        };
        wealth = blur(noise_w);
        second = blur(noise_v);
    }

    const std::vector<std::string> kIndicatorColumns = {
        "total_pop", "pop_0_14", "pop_15_29",     "pop_30_44", "pop_45_59",
        "pop_60_74", "pop_75p",  "median_income", "poverty",   "gini",
        "no_diploma", "bac",     "bepc_capbep",   "sup"};
    const std::size_t nind = kIndicatorColumns.size();
    std::vector<double> indicators(nzones * nind, 0.0);
    const auto ind_col = [&](const std::string& name) {
        return static_cast<std::size_t>(
            std::find(kIndicatorColumns.begin(), kIndicatorColumns.end(), name) -
            kIndicatorColumns.begin());
    };
    for (std::size_t z = 0; z < nzones; ++z) {
        const double w = wealth[z];
        const double v = second[z];
        double* row = indicators.data() + z * nind;
        const double pop =
            std::floor(rng_ind.uniform_in(spec.population_min, spec.population_max));
        row[0] = pop;
        std::array<double, 6> frac = {0.17 + 0.04 * (1.0 - w), 0.18 + 0.03 * (1.0 - w),
                                      0.20 + 0.03 * w,          0.18,
                                      0.15 + 0.02 * w,          0.12 + 0.02 * w};
        double fsum = 0.0;
        for (double& f : frac) {
            f = std::max(0.01, f + 0.01 * rng_ind.normal());
            fsum += f;
        }
        double assigned = 0.0;
        for (std::size_t a = 0; a < 5; ++a) {
            row[1 + a] = std::floor(pop * frac[a] / fsum);
            assigned += row[1 + a];
        }
        row[6] = std::max(0.0, pop - assigned);
        row[ind_col("median_income")] =
            std::floor(16000.0 + 24000.0 * clamp(w + 0.04 * rng_ind.normal(), 0.0, 1.0));
        row[ind_col("poverty")] = clamp(38.0 - 30.0 * w + 2.0 * rng_ind.normal(), 1.0, 95.0);
        row[ind_col("gini")] =
            clamp(0.25 + 0.10 * (1.0 - w) + 0.10 * v + 0.012 * rng_ind.normal(), 0.15, 0.8);
        const double adults = 0.8 * pop;
        std::array<double, 4> edu = {std::max(0.02, 0.08 + 0.30 * (1.0 - w) +
                                                        0.02 * rng_ind.normal()),
                                     std::max(0.02, 0.24 + 0.02 * rng_ind.normal()),
                                     std::max(0.02, 0.22 + 0.02 * rng_ind.normal()),
                                     std::max(0.02, 0.10 + 0.45 * std::pow(w, 1.3) +
                                                        0.02 * rng_ind.normal())};
        const double esum = edu[0] + edu[1] + edu[2] + edu[3];
        row[ind_col("no_diploma")] = std::floor(adults * edu[0] / esum);
        row[ind_col("bac")] = std::floor(adults * edu[1] / esum);
        row[ind_col("bepc_capbep")] = std::floor(adults * edu[2] / esum);
        row[ind_col("sup")] = std::floor(adults * edu[3] / esum);
    }

    // Suppression: the lowest-population zones lose their economic columns in
    // the emitted CSV (the planted signal still uses the true values).
    std::vector<char> suppressed(nzones, 0);
    {
        const std::size_t k =
            static_cast<std::size_t>(spec.suppressed_fraction * static_cast<double>(nzones));
        std::vector<std::size_t> order(nzones);
        for (std::size_t z = 0; z < nzones; ++z)
            order[z] = z;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (indicators[a * nind] != indicators[b * nind])
                return indicators[a * nind] < indicators[b * nind];
            return a < b;
        });
        for (std::size_t i = 0; i < k; ++i)
            suppressed[order[i]] = 1;
    }

    // --- planted station factors ---------------------------------------------
    const geom::VoronoiTessellation tess = geom::build_tessellation(sites, region);
    const geom::AreaWeightMatrix weights = geom::areal_weights(tess, zones, 1);
    std::map<std::string, std::size_t> zone_index;
    for (std::size_t z = 0; z < nzones; ++z)
        zone_index[zones[z].id] = z;

    const auto standardized = [&](const std::string& indicator) {
        const std::size_t col = ind_col(indicator);
        std::vector<double> z(nzones);
        double mean = 0.0;
        for (std::size_t i = 0; i < nzones; ++i)
            mean += indicators[i * nind + col];
        mean /= static_cast<double>(nzones);
        double var = 0.0;
        for (std::size_t i = 0; i < nzones; ++i) {
            const double d = indicators[i * nind + col] - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(nzones));
        for (std::size_t i = 0; i < nzones; ++i)
            z[i] = sd > 0.0 ? (indicators[i * nind + col] - mean) / sd : 0.0;
        return z;
    };
    std::map<std::string, std::vector<double>> zscores;
    for (const SignalEffect& e : spec.effects)
        if (zscores.find(e.indicator) == zscores.end())
            zscores[e.indicator] = standardized(e.indicator);

    // Station-level mixed indicator values through the true areal weights.
    std::map<std::string, std::vector<double>> station_mix;
    for (const auto& [name, zvec] : zscores) {
        std::vector<double> mix(nstations, 0.0);
        for (const geom::WeightEntry& e : weights.entries)
            mix[static_cast<std::size_t>(e.site)] +=
                e.weight * zvec[zone_index.at(e.zone)];
        station_mix[name] = std::move(mix);
    }

    const std::size_t ncats = spec.categories.size();
    std::vector<double> volume_beta_sum(nstations * ncats, 0.0);
    std::vector<double> shape_alpha_sum(nstations * ncats, 0.0);
    std::vector<char> has_shape(ncats, 0);
    for (const SignalEffect& e : spec.effects) {
        const std::size_t ci = static_cast<std::size_t>(
            std::find(spec.categories.begin(), spec.categories.end(), e.category) -
            spec.categories.begin());
        const std::vector<double>& mix = station_mix.at(e.indicator);
        for (std::size_t s = 0; s < nstations; ++s) {
            volume_beta_sum[s * ncats + ci] += e.volume_beta * mix[s];
            shape_alpha_sum[s * ncats + ci] += e.shape_alpha * mix[s];
        }
        if (e.shape_alpha != 0.0)
            has_shape[ci] = 1;
    }

    std::vector<double> station_volume(nstations);
    for (std::size_t s = 0; s < nstations; ++s)
        station_volume[s] = rng_traffic.lognormal_unit_mean(spec.station_volume_sigma);

    // Expected bytes per (station, category, slot), before per-record noise.
    std::vector<std::array<double, kHoursPerWeek>> base_profiles(ncats);
    std::vector<std::array<double, kHoursPerWeek>> alt_profiles(ncats);
    for (std::size_t c = 0; c < ncats; ++c) {
        const ProfileParams p = params_for(spec.categories[c]);
        base_profiles[c] = build_profile(p, 0.0);
        alt_profiles[c] = build_profile(p, 6.0);
    }
    std::vector<double> expected(nstations * ncats * kHoursPerWeek);
    const double per_record = 1.0 / static_cast<double>(spec.records_per_hour);
    for (std::size_t s = 0; s < nstations; ++s) {
        for (std::size_t c = 0; c < ncats; ++c) {
            const double vol = std::exp(volume_beta_sum[s * ncats + c]) * station_volume[s] *
                               spec.base_bytes * per_record;
            const double blend =
                has_shape[c] ? logistic(shape_alpha_sum[s * ncats + c]) : 0.0;
            double* dst = expected.data() + (s * ncats + c) * kHoursPerWeek;
            for (int h = 0; h < kHoursPerWeek; ++h)
                dst[h] = vol * ((1.0 - blend) * base_profiles[c][h] +
                                blend * alt_profiles[c][h]);
        }
    }

    // --- app list -------------------------------------------------------------
    std::vector<AppSpec> apps;
    for (std::size_t c = 0; c < ncats; ++c) {
        apps.push_back({spec.categories[c] + "_a", static_cast<int>(c), 1.0});
        if (c < 2)
            apps.push_back({spec.categories[c] + "_b", static_cast<int>(c), 0.65});
    }
    apps.push_back({"longtail_minor", 0, 0.003});  // mapped but below the percentile cut
    apps.push_back({"megacorp_unmapped", -1, 0.7});  // kept by the filter, not in the map

    {
        csv::Writer w(paths.category_map, meta, "app_id,category");
        std::vector<std::pair<std::string, std::string>> rows;
        for (const AppSpec& a : apps)
            if (a.category >= 0)
                rows.emplace_back(a.id, spec.categories[static_cast<std::size_t>(a.category)]);
        std::sort(rows.begin(), rows.end());
        for (const auto& [app, cat] : rows)
            w.write_line(app + "," + cat);
        w.close();
    }

    // --- traffic --------------------------------------------------------------
    std::vector<std::string> station_coord(nstations);
    for (std::size_t s = 0; s < nstations; ++s)
        station_coord[s] =
            csv::fmt_double(sites[s].location.y) + "," + csv::fmt_double(sites[s].location.x);
    std::array<char[3], 60> mm{};
    for (int m = 0; m < 60; ++m)
        std::snprintf(mm[static_cast<std::size_t>(m)], 3, "%02d", m);

    std::uint64_t traffic_lines = 0;
    {
        csv::Writer w(paths.traffic, meta,
                      "timestamp_utc,lat,lon,app_id,uplink_bytes,downlink_bytes");
        std::string line;
        char numbuf[24];
        const std::int64_t total_hours =
            static_cast<std::int64_t>(spec.weeks) * kHoursPerWeek;
        for (std::int64_t hh = 0; hh < total_hours; ++hh) {
            const std::int64_t epoch_hour = start_hour + hh;
            const int slot = static_cast<int>(hh % kHoursPerWeek);
            const std::string hour_prefix = timeutil::format_hour_utc(epoch_hour) + ":";
            for (std::size_t s = 0; s < nstations; ++s) {
                for (const AppSpec& app : apps) {
                    const double mean_bytes =
                        app.category >= 0
                            ? expected[(s * ncats + static_cast<std::size_t>(app.category)) *
                                           kHoursPerWeek +
                                       slot] *
                                  app.mult
                            : spec.base_bytes * per_record * app.mult * station_volume[s];
                    for (int rec = 0; rec < spec.records_per_hour; ++rec) {
                        const int minute = static_cast<int>(rng_traffic.uniform_int(60));
                        const double noise = rng_traffic.lognormal_unit_mean(spec.noise_sigma);
                        const double up_frac = rng_traffic.uniform_in(0.08, 0.18);
                        const auto total =
                            static_cast<std::int64_t>(std::llround(mean_bytes * noise));
                        const auto up = static_cast<std::int64_t>(
                            std::llround(static_cast<double>(total) * up_frac));
                        line.clear();
                        line += hour_prefix;
                        line += mm[static_cast<std::size_t>(minute)];
                        line += ',';
                        line += station_coord[s];
                        line += ',';
                        line += app.id;
                        line += ',';
                        auto r1 = std::to_chars(numbuf, numbuf + sizeof numbuf, up);
                        line.append(numbuf, r1.ptr);
                        line += ',';
                        auto r2 = std::to_chars(numbuf, numbuf + sizeof numbuf, total - up);
                        line.append(numbuf, r2.ptr);
                        w.write_line(line);
                        ++traffic_lines;
                    }
                }
            }
        }
        w.close();
    }

    // --- indicator CSV ----------------------------------------------------------
    {
        std::string header = "zone_id";
        for (const std::string& c : kIndicatorColumns)
            header += "," + c;
        csv::Writer w(paths.indicators, meta, header);
        const std::size_t income_col = ind_col("median_income");
        const std::size_t poverty_col = ind_col("poverty");
        const std::size_t gini_col = ind_col("gini");
        for (std::size_t z = 0; z < nzones; ++z) {
            std::string line = zones[z].id;
            for (std::size_t j = 0; j < nind; ++j) {
                line += ',';
                if (suppressed[z] &&
                    (j == income_col || j == poverty_col || j == gini_col))
                    continue;  // suppressed: empty cell
                const double v = indicators[z * nind + j];
                if (j == poverty_col || j == gini_col)
                    line += csv::fmt_double(v, 6);
                else
                    line += csv::fmt_double(v);
            }
            w.write_line(line);
        }
        w.close();
    }

    // --- geometry files and station list -----------------------------------------
    geo_io::write_region(paths.region, region, meta_fields);
    geo_io::write_zones(paths.zones, zones, meta_fields);
    {
        std::vector<ingest::StationSite> rows;
        for (std::size_t s = 0; s < nstations; ++s)
            rows.push_back({static_cast<std::int64_t>(s), sites[s].location.y,
                            sites[s].location.x});
        ingest::write_sites(paths.stations, rows,
                            {{"generator", "zonecast-gen"},
                             {"seed", std::to_string(spec.seed)},
                             {"config_hash", config_hash}});
    }

    // --- manifest ------------------------------------------------------------------
    std::string primary_target = "median_income";
    std::string strongest;
    double strongest_size = -1.0;
    for (const SignalEffect& e : spec.effects) {
        if (e.indicator != primary_target)
            continue;
        const double size = std::abs(e.volume_beta) + std::abs(e.shape_alpha);
        if (size > strongest_size) {
            strongest_size = size;
            strongest = e.category;
        }
    }
    nlohmann::ordered_json manifest;
    manifest["_meta"] = {{"generator", "zonecast-gen"},
                         {"seed", spec.seed},
                         {"config_hash", config_hash}};
    manifest["spec"] = spec_to_json(spec);
    manifest["region"] = {{"width_meters", width}, {"height_meters", height}};
    std::size_t suppressed_count = 0;
    for (const char s : suppressed)
        suppressed_count += static_cast<std::size_t>(s);
    manifest["counts"] = {{"zones", nzones},
                          {"stations", nstations},
                          {"apps", apps.size()},
                          {"traffic_lines", traffic_lines},
                          {"suppressed_zones", suppressed_count}};
    manifest["primary_target"] = primary_target;
    manifest["strongest_category"] = strongest;
    nlohmann::ordered_json wealth_json = nlohmann::ordered_json::object();
    for (std::size_t z = 0; z < nzones; ++z)
        wealth_json[zones[z].id] = wealth[z];
    manifest["zone_wealth"] = std::move(wealth_json);
    nlohmann::ordered_json checks = nlohmann::ordered_json::object();
    for (const std::string& p : {paths.region, paths.zones, paths.indicators,
                                 paths.category_map, paths.traffic, paths.stations})
        checks[std::filesystem::path(p).filename().string()] = hex64(file_checksum(p));
    manifest["checksums"] = std::move(checks);

    std::FILE* mf = std::fopen(paths.manifest.c_str(), "wb");
    if (!mf)
        throw FormatError("cannot open manifest for writing: " + paths.manifest);
    const std::string dump = manifest.dump(1, '\t') + "\n";
    std::fwrite(dump.data(), 1, dump.size(), mf);
    std::fclose(mf);
    return paths;
}

bool OracleReport::all_pass() const {
    for (const OracleCheck& c : checks)
        if (!c.pass)
            return false;
    return true;
}

namespace {

bool file_exists(const std::string& p) { return std::filesystem::exists(p); }

// Reads table2.csv and returns the selector scores for `target`:
// {cumulative, rca, tws, all}, or nullopt when the row is absent.
std::optional<std::array<double, 4>> read_table2_row(const std::string& path,
                                                     const std::string& target) {
    csv::Reader reader(path);
    std::vector<std::string_view> fields;
    while (reader.next(fields)) {
        if (fields.size() != 5 || std::string(fields[0]) != target)
            continue;
        std::array<double, 4> row{};
        for (int i = 0; i < 4; ++i) {
            const auto v = csv::parse_double(fields[static_cast<std::size_t>(i + 1)]);
            if (!v)
                return std::nullopt;
            row[static_cast<std::size_t>(i)] = *v;
        }
        return row;
    }
    return std::nullopt;
}

}  // namespace

OracleReport oracle_check(const std::string& manifest_path, const std::string& run_dir) {
    OracleReport report;
    nlohmann::json manifest;
    {
        std::ifstream in(manifest_path);
        if (!in)
            throw FormatError("cannot open manifest: " + manifest_path);
        try {
            manifest = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("manifest " + manifest_path + " is not valid JSON: " + e.what());
        }
    }

    // 1. Mass conservation: interpolated zone totals must equal the rolled-up
    // station totals weighted by each station's weight-row sum.
    {
        OracleCheck c{"mass_conservation", false, ""};
        const std::string rollup_path = run_dir + "/rollup.csv";
        const std::string weights_path = run_dir + "/weights.csv";
        const std::string series_path = run_dir + "/series.csv";
        if (!file_exists(rollup_path) || !file_exists(weights_path) ||
            !file_exists(series_path)) {
            c.detail = "missing rollup/weights/series output";
        } else {
            std::map<std::int64_t, double> rowsum;
            {
                csv::Reader reader(weights_path);
                std::vector<std::string_view> fields;
                while (reader.next(fields)) {
                    if (fields.size() != 3)
                        continue;
                    const auto site = csv::parse_i64(fields[0]);
                    const auto wgt = csv::parse_double(fields[2]);
                    if (site && wgt)
                        rowsum[*site] += *wgt;
                }
            }
            long double expected = 0.0;
            for (const ingest::RollupRow& r : ingest::read_rollup(rollup_path)) {
                const auto it = rowsum.find(r.site);
                if (it != rowsum.end())
                    expected += static_cast<long double>(r.bytes) * it->second;
            }
            long double got = 0.0;
            {
                csv::Reader reader(series_path);
                std::vector<std::string_view> fields;
                const int bytes_col = reader.column("bytes");
                while (reader.next(fields)) {
                    const auto v = csv::parse_double(fields[static_cast<std::size_t>(bytes_col)]);
                    if (v)
                        got += *v;
                }
            }
            const double rel = std::abs(static_cast<double>(got - expected)) /
                               std::max(1.0, static_cast<double>(expected));
            c.pass = rel <= 1e-9;
            c.detail = "relative residual " + csv::fmt_double(rel, 3);
        }
        report.checks.push_back(std::move(c));
    }

    // 2. The strongest planted category for the primary target should surface
    // among the top-5 features by mean |attribution|.
    {
        OracleCheck c{"planted_category_in_top5", false, ""};
        const std::string summary_path = run_dir + "/shap_summary.csv";
        const std::string cat = manifest.value("strongest_category", "");
        if (cat.empty()) {
            c.detail = "manifest has no strongest_category";
        } else if (!file_exists(summary_path)) {
            c.detail = "missing " + summary_path;
        } else {
            csv::Reader reader(summary_path);
            std::vector<std::string_view> fields;
            int rank = 0;
            int found = -1;
            while (reader.next(fields) && rank < 20) {
                ++rank;
                if (fields.size() < 2)
                    continue;
                const std::string feature(fields[1]);
                // Feature names are TWS:<cat>:<hour>, RCA:<cat>, SCU:<cat>.
                std::vector<std::string> parts;
                std::size_t pos = 0;
                while (pos <= feature.size()) {
                    const std::size_t next = feature.find(':', pos);
                    parts.push_back(feature.substr(pos, next - pos));
                    if (next == std::string::npos)
                        break;
                    pos = next + 1;
                }
                if (parts.size() >= 2 && parts[1] == cat && found < 0)
                    found = rank;
            }
            c.pass = found >= 1 && found <= 5;
            c.detail = found < 0 ? "category " + cat + " not in top-20"
                                 : "category " + cat + " first at rank " + std::to_string(found);
        }
        report.checks.push_back(std::move(c));
    }

    // 3. Recovered R² ordering across feature selectors for the primary target.
    {
        OracleCheck c{"selector_ordering", false, ""};
        const std::string table_path = run_dir + "/table2.csv";
        const std::string target = manifest.value("primary_target", "median_income");
        if (!file_exists(table_path)) {
            c.detail = "missing " + table_path;
        } else {
            const auto row = read_table2_row(table_path, target);
            if (!row) {
                c.detail = "target " + target + " not found in table2.csv";
            } else {
                const double cumulative = (*row)[0];
                const double rca = (*row)[1];
                const double tws = (*row)[2];
                const double all = (*row)[3];
                c.pass = all >= tws - 0.05 && tws > rca && rca > cumulative;
                c.detail = "cumulative=" + csv::fmt_double(cumulative, 4) +
                           " rca=" + csv::fmt_double(rca, 4) + " tws=" + csv::fmt_double(tws, 4) +
                           " all=" + csv::fmt_double(all, 4);
            }
        }
        report.checks.push_back(std::move(c));
    }

    // 4. Scenario inputs untouched since generation (manifest checksums), plus
    // checksums of the run outputs for the record.
    {
        OracleCheck c{"stage_checksums", true, ""};
        const std::string scen_dir =
            std::filesystem::path(manifest_path).parent_path().string();
        if (manifest.contains("checksums")) {
            for (const auto& [name, expected] : manifest.at("checksums").items()) {
                const std::string p = scen_dir + "/" + name;
                if (!file_exists(p)) {
                    c.pass = false;
                    c.detail += name + " missing; ";
                    continue;
                }
                const std::string got = hex64(file_checksum(p));
                if (got != expected.get<std::string>()) {
                    c.pass = false;
                    c.detail += name + " changed since generation; ";
                }
            }
        }
        for (const char* name : {"rollup.csv", "weights.csv", "series.csv", "features.csv",
                                 "table2.csv", "table3.csv"}) {
            const std::string p = run_dir + "/" + name;
            if (file_exists(p))
                c.detail += std::string(name) + "=" + hex64(file_checksum(p)) + " ";
        }
        if (c.pass && c.detail.empty())
            c.detail = "no checksums recorded";
        report.checks.push_back(std::move(c));
    }
    return report;
}

}  // namespace zonecast::synth
