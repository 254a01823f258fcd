#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>
#include <zonecast/analysis.hpp>
#include <zonecast/errors.hpp>
#include <zonecast/geojson.hpp>
#include <zonecast/geometry.hpp>
#include <zonecast/ingest.hpp>
#include <zonecast/synthgen.hpp>

using namespace zonecast;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("zc_synth_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string dir(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

synth::ScenarioSpec tiny_spec() {
    synth::ScenarioSpec spec;
    spec.seed = 7;
    spec.stations = 5;
    spec.grid_nx = 3;
    spec.grid_ny = 3;
    spec.zone_size_meters = 500.0;
    spec.weeks = 1;
    spec.records_per_hour = 1;
    spec.categories = {"news", "social_media", "streaming", "gaming"};
    spec.effects = {{"news", "median_income", 0.45, 0.9},
                    {"social_media", "median_income", -0.40, -0.8}};
    spec.suppressed_fraction = 0.25;
    return spec;
}

std::size_t count_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line))
        ++n;
    return n;
}

}  // namespace

TEST_CASE("tiny scenario writes a complete, loadable bundle") {
    TempDir tmp;
    const synth::ScenarioSpec spec = tiny_spec();
    const synth::ScenarioPaths paths = synth::generate(spec, tmp.dir("scn"));

    for (const std::string& p : {paths.region, paths.zones, paths.indicators,
                                 paths.category_map, paths.traffic, paths.stations,
                                 paths.manifest})
        CHECK_MESSAGE(fs::exists(p), p);

    SUBCASE("manifest records counts and planted ground truth") {
        const auto manifest = nlohmann::ordered_json::parse(slurp(paths.manifest));
        CHECK(manifest.begin().key() == "_meta");
        CHECK(manifest["_meta"]["seed"].get<std::uint64_t>() == 7);
        CHECK(manifest["counts"]["zones"].get<int>() == 9);
        CHECK(manifest["counts"]["stations"].get<int>() == 5);
        // apps: one "_a" per category, "_b" for the first two (sorted), one
        // mapped long-tail app and one unmapped heavy app.
        CHECK(manifest["counts"]["apps"].get<int>() == 8);
        CHECK(manifest["counts"]["traffic_lines"].get<std::int64_t>() ==
              168 * 5 * 8);
        // floor(0.25 * 9) = 2 suppressed zones.
        CHECK(manifest["counts"]["suppressed_zones"].get<int>() == 2);
        CHECK(manifest["primary_target"].get<std::string>() == "median_income");
        // Strongest income effect: news (0.45 + 0.9) beats social_media (1.2).
        CHECK(manifest["strongest_category"].get<std::string>() == "news");
        CHECK(manifest["zone_wealth"].size() == 9);
        CHECK(manifest["checksums"].size() == 6);
        // Categories echo back sorted.
        const auto cats = manifest["spec"]["categories"].get<std::vector<std::string>>();
        const std::vector<std::string> want = {"gaming", "news", "social_media",
                                               "streaming"};
        CHECK(cats == want);
    }

    SUBCASE("category map loads and covers every category") {
        const ingest::CategoryMap map = ingest::CategoryMap::load(paths.category_map);
        const std::vector<std::string> want = {"gaming", "news", "social_media",
                                               "streaming"};
        CHECK(map.categories == want);
        CHECK(map.by_app.size() == 7);  // 4 "_a" + 2 "_b" + long tail
        CHECK(map.by_app.at("news_a") == "news");
        CHECK(map.by_app.count("megacorp_unmapped") == 0);
    }

    SUBCASE("station list loads with dense ids inside the region") {
        const auto sites = ingest::read_sites(paths.stations);
        REQUIRE(sites.size() == 5);
        for (std::size_t s = 0; s < sites.size(); ++s) {
            CHECK(sites[s].id == static_cast<std::int64_t>(s));
            CHECK(sites[s].lon >= 0.0);
            CHECK(sites[s].lon <= 1500.0);
            CHECK(sites[s].lat >= 0.0);
            CHECK(sites[s].lat <= 1500.0);
        }
    }

    SUBCASE("indicators load and suppression blanks the poorest zones") {
        const analysis::IndicatorTable table = analysis::IndicatorTable::load(paths.indicators);
        REQUIRE(table.zones.size() == 9);
        CHECK(table.zones.front() == "Z00000");
        const int pop_col = table.column("total_pop");
        const int income_col = table.column("median_income");
        const int poverty_col = table.column("poverty");
        const int gini_col = table.column("gini");
        REQUIRE(pop_col >= 0);
        REQUIRE(income_col >= 0);

        std::vector<std::size_t> blanked;
        double max_blanked_pop = 0.0;
        double min_kept_pop = 1e18;
        for (std::size_t z = 0; z < table.zones.size(); ++z) {
            const double pop = table.at(z, static_cast<std::size_t>(pop_col));
            CHECK(std::isfinite(pop));
            const bool blank = std::isnan(table.at(z, static_cast<std::size_t>(income_col)));
            // The three economic columns are suppressed together.
            CHECK(std::isnan(table.at(z, static_cast<std::size_t>(poverty_col))) == blank);
            CHECK(std::isnan(table.at(z, static_cast<std::size_t>(gini_col))) == blank);
            if (blank) {
                blanked.push_back(z);
                max_blanked_pop = std::max(max_blanked_pop, pop);
            } else {
                min_kept_pop = std::min(min_kept_pop, pop);
            }
        }
        CHECK(blanked.size() == 2);
        CHECK(max_blanked_pop <= min_kept_pop);
    }

    SUBCASE("zones tile the region exactly") {
        const auto zones = geo_io::load_zones(paths.zones);
        const auto region = geo_io::load_region(paths.region);
        REQUIRE(zones.size() == 9);
        double total = 0.0;
        for (const geom::Zone& z : zones)
            total += z.area;
        const double region_area = geom::polygon_area(region.shape);
        CHECK(region_area == doctest::Approx(1500.0 * 1500.0).epsilon(1e-12));
        CHECK(total == doctest::Approx(region_area).epsilon(1e-9));
    }

    SUBCASE("traffic file carries metadata, header, and one line per record") {
        std::ifstream in(paths.traffic);
        std::string meta_line;
        std::string header;
        std::string first_row;
        REQUIRE(std::getline(in, meta_line));
        REQUIRE(std::getline(in, header));
        REQUIRE(std::getline(in, first_row));
        CHECK(meta_line.rfind("# generator=zonecast-gen seed=7 config_hash=", 0) == 0);
        CHECK(header == "timestamp_utc,lat,lon,app_id,uplink_bytes,downlink_bytes");
        const auto rec = ingest::parse_traffic_line(first_row);
        REQUIRE(rec.has_value());
        CHECK(rec->uplink >= 0);
        CHECK(rec->downlink >= 0);
        CHECK(count_lines(paths.traffic) == 2 + 168 * 5 * 8);
    }
}

TEST_CASE("generation is deterministic for a fixed spec and differs by seed") {
    TempDir tmp;
    const synth::ScenarioSpec spec = tiny_spec();
    const synth::ScenarioPaths a = synth::generate(spec, tmp.dir("a"));
    const synth::ScenarioPaths b = synth::generate(spec, tmp.dir("b"));
    CHECK(slurp(a.region) == slurp(b.region));
    CHECK(slurp(a.zones) == slurp(b.zones));
    CHECK(slurp(a.indicators) == slurp(b.indicators));
    CHECK(slurp(a.category_map) == slurp(b.category_map));
    CHECK(slurp(a.traffic) == slurp(b.traffic));
    CHECK(slurp(a.stations) == slurp(b.stations));
    CHECK(slurp(a.manifest) == slurp(b.manifest));

    synth::ScenarioSpec other = spec;
    other.seed = 8;
    const synth::ScenarioPaths c = synth::generate(other, tmp.dir("c"));
    CHECK(slurp(a.traffic) != slurp(c.traffic));
    CHECK(slurp(a.stations) != slurp(c.stations));
}

TEST_CASE("stations_on_grid plants one station per zone and cells equal zones") {
    TempDir tmp;
    synth::ScenarioSpec spec = tiny_spec();
    spec.stations_on_grid = true;
    const synth::ScenarioPaths paths = synth::generate(spec, tmp.dir("grid"));

    const auto stations = ingest::read_sites(paths.stations);
    REQUIRE(stations.size() == 9);

    const auto zones = geo_io::load_zones(paths.zones);
    const auto region = geo_io::load_region(paths.region);
    std::vector<geom::Site> sites;
    for (const ingest::StationSite& s : stations)
        sites.push_back({s.id, {s.lon, s.lat}});
    const geom::VoronoiTessellation tess = geom::build_tessellation(sites, region);
    const geom::AreaWeightMatrix weights = geom::areal_weights(tess, zones, 1);

    // Station z sits at the center of zone Z0000z on an unperturbed grid, so
    // its Voronoi cell coincides with the zone: all weight on the own zone.
    std::map<std::int64_t, double> own_weight;
    for (const geom::WeightEntry& e : weights.entries) {
        char want[16];
        std::snprintf(want, sizeof want, "Z%05lld", static_cast<long long>(e.site));
        if (e.zone == want)
            own_weight[e.site] += e.weight;
        else
            CHECK(e.weight <= 1e-9);
    }
    REQUIRE(own_weight.size() == 9);
    for (const auto& [site, w] : own_weight)
        CHECK(w == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("perturbed grids still tile the region") {
    TempDir tmp;
    synth::ScenarioSpec spec = tiny_spec();
    spec.grid_nx = 4;
    spec.grid_ny = 4;
    spec.perturbed_grid = true;
    spec.effects.clear();
    const synth::ScenarioPaths paths = synth::generate(spec, tmp.dir("pert"));

    const auto zones = geo_io::load_zones(paths.zones);
    REQUIRE(zones.size() == 16);
    double total = 0.0;
    for (const geom::Zone& z : zones)
        total += z.area;
    CHECK(total == doctest::Approx(4 * 500.0 * 4 * 500.0).epsilon(1e-9));

    // Interior nodes actually moved: at least one zone is not an axis-aligned
    // rectangle of the nominal area.
    bool any_moved = false;
    for (const geom::Zone& z : zones)
        if (std::abs(z.area - 500.0 * 500.0) > 1.0)
            any_moved = true;
    CHECK(any_moved);
}

TEST_CASE("scenario validation rejects malformed specs") {
    TempDir tmp;
    const std::string out = tmp.dir("never");
    const auto reject = [&](void (*tweak)(synth::ScenarioSpec&)) {
        synth::ScenarioSpec s = tiny_spec();
        tweak(s);
        CHECK_THROWS_AS(synth::generate(s, out), ConfigurationError);
    };
    reject([](synth::ScenarioSpec& s) { s.grid_nx = 2, s.grid_ny = 2; });
    reject([](synth::ScenarioSpec& s) { s.grid_nx = 0; });
    reject([](synth::ScenarioSpec& s) { s.stations = 3; });
    reject([](synth::ScenarioSpec& s) { s.weeks = 0; });
    reject([](synth::ScenarioSpec& s) { s.records_per_hour = 0; });
    reject([](synth::ScenarioSpec& s) { s.zone_size_meters = 0.0; });
    reject([](synth::ScenarioSpec& s) { s.base_bytes = 0.0; });
    reject([](synth::ScenarioSpec& s) { s.noise_sigma = -0.1; });
    reject([](synth::ScenarioSpec& s) { s.population_max = s.population_min - 1.0; });
    reject([](synth::ScenarioSpec& s) { s.suppressed_fraction = 0.6; });
    reject([](synth::ScenarioSpec& s) { s.categories.clear(), s.effects.clear(); });
    reject([](synth::ScenarioSpec& s) {
        s.categories = {"news", "news"};
        s.effects.clear();
    });
    reject([](synth::ScenarioSpec& s) {
        s.effects.push_back({"unknown_cat", "median_income", 0.1, 0.0});
    });
    reject([](synth::ScenarioSpec& s) {
        s.effects.push_back({"news", "total_pop", 0.1, 0.0});
    });
    reject([](synth::ScenarioSpec& s) {
        s.effects.push_back({"news", "median_income", std::nan(""), 0.0});
    });
    reject([](synth::ScenarioSpec& s) { s.start_date = "2024/03/04"; });
    // Validation happens before any file output.
    CHECK_FALSE(fs::exists(out));
}
