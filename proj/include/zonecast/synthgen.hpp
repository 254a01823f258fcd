#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace zonecast::synth {

/// One planted dependency. Apps of `category` are modulated by the named zone
/// indicator, mixed to each station through the true areal weights of its
/// Voronoi cell: volume_beta scales total bytes by exp(beta * z) and
/// shape_alpha blends the category's hour-of-week profile toward a 6-hour
/// shifted variant via logistic(alpha * z), planting time-of-day signal that
/// only signature features can see.
struct SignalEffect {
    std::string category;
    std::string indicator;
    double volume_beta = 0.0;
    double shape_alpha = 0.0;
};

struct ScenarioSpec {
    std::uint64_t seed = 2024;
    int stations = 200;
    int grid_nx = 20;
    int grid_ny = 25;
    double zone_size_meters = 500.0;
    /// Jitters interior grid nodes (shared by adjacent zones, so the zones
    /// still tile the region exactly) to exercise non-trivial cell-zone cuts.
    bool perturbed_grid = false;
    /// Places one station at each zone center instead of uniformly at random;
    /// with an unperturbed grid the Voronoi cells then equal the zones.
    bool stations_on_grid = false;
    int weeks = 2;
    int records_per_hour = 1;  // records drawn per (station, hour, app)
    std::string start_date = "2024-03-04";  // a Monday; traffic starts 00:00 UTC
    std::vector<std::string> categories;
    double base_bytes = 2.0e7;          // mean bytes per (station, app, hour)
    double noise_sigma = 0.35;          // per-record log-normal sigma
    double station_volume_sigma = 0.8;  // per-station overall volume sigma
    double population_min = 500.0;
    double population_max = 5000.0;
    /// Fraction of zones (lowest population) whose economic indicators are
    /// blanked in the CSV, mimicking small-population suppression.
    double suppressed_fraction = 0.02;
    std::vector<SignalEffect> effects;

    ScenarioSpec();

    static std::vector<std::string> default_categories();
    static std::vector<SignalEffect> default_effects();
};

struct ScenarioPaths {
    std::string region;
    std::string zones;
    std::string indicators;
    std::string category_map;
    std::string traffic;
    std::string stations;
    std::string manifest;

    static ScenarioPaths under(const std::string& dir);
};

/// Writes the full scenario into `out_dir`: region and zone GeoJSON,
/// indicator and category-map CSV, traffic CSV, ground-truth station list,
/// and manifest.json recording every planted parameter.
ScenarioPaths generate(const ScenarioSpec& spec, const std::string& out_dir);

struct OracleCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct OracleReport {
    std::vector<OracleCheck> checks;
    bool all_pass() const;
};

/// Compares a finished pipeline run against the manifest's planted ground
/// truth: mass conservation through interpolation, planted categories
/// surfacing in the attribution summary, the recovered R² ordering across
/// selectors, and per-stage output checksums.
OracleReport oracle_check(const std::string& manifest_path, const std::string& run_dir);

}  // namespace zonecast::synth
