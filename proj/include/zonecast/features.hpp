#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zonecast/interpolate.hpp"

namespace zonecast::feat {

inline constexpr int kWeekHours = 168;

/// Hour-of-week signatures for every (zone, category), standardized to
/// mean 0 / population std 1 over the 168 slots. Degenerate (constant)
/// signatures are all-zeros with the flag set, so no NaN ever escapes.
struct TwsResult {
    std::vector<std::string> zones;
    std::vector<std::string> categories;
    std::vector<std::array<double, kWeekHours>> sig;  // [zi*ncat + ci]
    std::vector<char> degenerate;                     // same indexing
};

/// Relative usage intensity per (zone, category): the zone's share of a
/// category relative to the global share. Zones with no traffic at all have
/// no row; categories with zero global traffic are dropped (recorded).
struct RcaResult {
    std::vector<std::string> zones;       // zones with positive total, sorted
    std::vector<std::string> categories;  // kept categories
    std::vector<std::string> dropped_categories;
    std::vector<double> values;  // [zi*ncat + ci]
    std::vector<double> t_za;    // median hourly traffic, same indexing
    std::vector<double> t_zdot;  // per zone
    std::vector<double> t_dota;  // per kept category
    double t_dotdot = 0.0;
};

/// Per-category z-score of cumulative traffic across zones.
struct ScuResult {
    std::vector<std::string> zones;
    std::vector<std::string> categories;
    std::vector<double> values;    // [zi*ncat + ci]
    std::vector<double> c_za;      // cumulative bytes, same indexing
    std::vector<char> degenerate;  // per category
};

enum class Selector { Cumulative, Rca, Tws, All };

std::optional<Selector> parse_selector(const std::string& name);
std::string selector_name(Selector s);

/// Feature rows keyed by zone; values row-major, never NaN.
struct FeatureMatrix {
    std::vector<std::string> zones;
    std::vector<std::string> columns;
    std::vector<double> values;

    std::size_t ncols() const { return columns.size(); }
    double at(std::size_t row, std::size_t col) const { return values[row * columns.size() + col]; }
};

/// Hour-of-week slot in [1,168] of a UTC epoch-hour under the configured
/// local offset.
int slot_of_hour(std::int64_t utc_epoch_hours, int tz_offset_hours);

/// Median per slot with absent hours counted as zero traffic:
/// `values_by_slot[s]` holds the observed values for slot s (0-based),
/// `occurrences[s]` how many times slot s occurs in the window.
std::array<double, kWeekHours> raw_signature(
    const std::vector<std::vector<double>>& values_by_slot,
    const std::array<std::int64_t, kWeekHours>& occurrences);

/// Z-score over the 168 slots (population std). Constant input — or σ below
/// 1e-12 relative, which is the same thing up to accumulated rounding —
/// yields all-zeros with `degenerate` set.
std::array<double, kWeekHours> standardize_signature(const std::array<double, kWeekHours>& raw,
                                                     bool& degenerate);

/// Median of `observed` padded with zeros to `n` values (all data ≥ 0).
double zero_padded_median(std::vector<double>& observed, std::int64_t n);

/// Computes all signatures from the zone-level series. The observation
/// window is the inclusive hour span [min, max] of the series; it must cover
/// at least 7 days (FeatureError otherwise).
TwsResult compute_tws(const interp::ZoneHourlySeries& series, int tz_offset_hours,
                      int threads = 1);

/// RCA per Eq.-style share-of-share on T_za = median hourly traffic over the
/// window (absent hours = 0). When `population` is provided, T_za is divided
/// by the zone's population first (per-capita variant); zones missing from
/// the table are excluded.
RcaResult compute_rca(const interp::ZoneHourlySeries& series,
                      const std::map<std::string, double>* population = nullptr);

ScuResult compute_scu(const interp::ZoneHourlySeries& series);

/// Zone rows = intersection of the three inputs' zone sets (dropped zones
/// recorded in `dropped_zones`); columns per selector. Empty intersection →
/// FeatureError.
FeatureMatrix assemble(Selector selector, const TwsResult& tws, const RcaResult& rca,
                       const ScuResult& scu, std::vector<std::string>* dropped_zones = nullptr);

/// CSV with header `zone_id,<column...>`, 12 significant digits.
void write_features(const std::string& path, const FeatureMatrix& fm,
                    const std::vector<std::pair<std::string, std::string>>& meta);
FeatureMatrix read_features(const std::string& path);

/// CSV `zone_id,population` for the per-capita RCA variant.
std::map<std::string, double> load_population(const std::string& path);

}  // namespace zonecast::feat
