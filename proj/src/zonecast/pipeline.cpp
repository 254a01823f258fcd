#include <zonecast/pipeline.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include <zonecast/analysis.hpp>
#include <zonecast/csv.hpp>
#include <zonecast/errors.hpp>
#include <zonecast/features.hpp>
#include <zonecast/geojson.hpp>
#include <zonecast/geometry.hpp>
#include <zonecast/ingest.hpp>
#include <zonecast/interpolate.hpp>
#include <zonecast/projection.hpp>
#include <zonecast/ridge.hpp>
#include <zonecast/rng.hpp>
#include <zonecast/shapley.hpp>
#include <zonecast/svgplot.hpp>
#include <zonecast/timeutil.hpp>

namespace zonecast::pipeline {
namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing: strict keys, typed getters, errors name the field path.
// ---------------------------------------------------------------------------

[[noreturn]] void cfg_fail(const std::string& path, const std::string& what) {
    throw ConfigurationError("config field `" + path + "`: " + what);
}

std::string sub(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

void expect_object(const json& v, const std::string& path) {
    if (!v.is_object())
        cfg_fail(path, "expected an object");
}

void expect_keys(const json& obj, const std::string& path,
                 std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* a : allowed)
            if (item.key() == a) {
                known = true;
                break;
            }
        if (!known)
            cfg_fail(sub(path, item.key()), "unknown key");
    }
}

void get_string(const json& o, const std::string& path, const char* key, std::string& out) {
    if (!o.contains(key))
        return;
    const json& v = o.at(key);
    if (!v.is_string())
        cfg_fail(sub(path, key), "expected a string");
    out = v.get<std::string>();
}

void get_bool(const json& o, const std::string& path, const char* key, bool& out) {
    if (!o.contains(key))
        return;
    const json& v = o.at(key);
    if (!v.is_boolean())
        cfg_fail(sub(path, key), "expected a boolean");
    out = v.get<bool>();
}

void get_int(const json& o, const std::string& path, const char* key, int& out) {
    if (!o.contains(key))
        return;
    const json& v = o.at(key);
    if (!v.is_number_integer())
        cfg_fail(sub(path, key), "expected an integer");
    out = v.get<int>();
}

void get_u64(const json& o, const std::string& path, const char* key, std::uint64_t& out) {
    if (!o.contains(key))
        return;
    const json& v = o.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        cfg_fail(sub(path, key), "expected a non-negative integer");
    out = v.get<std::uint64_t>();
}

void get_size(const json& o, const std::string& path, const char* key, std::size_t& out) {
    std::uint64_t v = out;
    get_u64(o, path, key, v);
    out = static_cast<std::size_t>(v);
}

void get_double(const json& o, const std::string& path, const char* key, double& out) {
    if (!o.contains(key))
        return;
    const json& v = o.at(key);
    if (!v.is_number())
        cfg_fail(sub(path, key), "expected a number");
    out = v.get<double>();
}

void get_strings(const json& o, const std::string& path, const char* key,
                 std::vector<std::string>& out) {
    if (!o.contains(key))
        return;
    const json& v = o.at(key);
    if (!v.is_array())
        cfg_fail(sub(path, key), "expected an array of strings");
    std::vector<std::string> result;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string())
            cfg_fail(sub(path, key) + "[" + std::to_string(i) + "]", "expected a string");
        result.push_back(v[i].get<std::string>());
    }
    out = std::move(result);
}

void parse_scenario(const json& o, const std::string& path, synth::ScenarioSpec& spec) {
    expect_object(o, path);
    expect_keys(o, path,
                {"seed", "stations", "grid_nx", "grid_ny", "zone_size_meters", "perturbed_grid",
                 "stations_on_grid", "weeks", "records_per_hour", "start_date", "categories",
                 "base_bytes", "noise_sigma", "station_volume_sigma", "population_min",
                 "population_max", "suppressed_fraction", "effects"});
    get_u64(o, path, "seed", spec.seed);
    get_int(o, path, "stations", spec.stations);
    get_int(o, path, "grid_nx", spec.grid_nx);
    get_int(o, path, "grid_ny", spec.grid_ny);
    get_double(o, path, "zone_size_meters", spec.zone_size_meters);
    get_bool(o, path, "perturbed_grid", spec.perturbed_grid);
    get_bool(o, path, "stations_on_grid", spec.stations_on_grid);
    get_int(o, path, "weeks", spec.weeks);
    get_int(o, path, "records_per_hour", spec.records_per_hour);
    get_string(o, path, "start_date", spec.start_date);
    get_strings(o, path, "categories", spec.categories);
    get_double(o, path, "base_bytes", spec.base_bytes);
    get_double(o, path, "noise_sigma", spec.noise_sigma);
    get_double(o, path, "station_volume_sigma", spec.station_volume_sigma);
    get_double(o, path, "population_min", spec.population_min);
    get_double(o, path, "population_max", spec.population_max);
    get_double(o, path, "suppressed_fraction", spec.suppressed_fraction);
    if (o.contains("effects")) {
        const json& arr = o.at("effects");
        if (!arr.is_array())
            cfg_fail(sub(path, "effects"), "expected an array of objects");
        std::vector<synth::SignalEffect> effects;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string epath = sub(path, "effects") + "[" + std::to_string(i) + "]";
            const json& e = arr[i];
            expect_object(e, epath);
            expect_keys(e, epath, {"category", "indicator", "volume_beta", "shape_alpha"});
            synth::SignalEffect eff;
            get_string(e, epath, "category", eff.category);
            get_string(e, epath, "indicator", eff.indicator);
            if (eff.category.empty() || eff.indicator.empty())
                cfg_fail(epath, "category and indicator are required");
            get_double(e, epath, "volume_beta", eff.volume_beta);
            get_double(e, epath, "shape_alpha", eff.shape_alpha);
            effects.push_back(std::move(eff));
        }
        spec.effects = std::move(effects);
    }
}

nlohmann::ordered_json scenario_to_json(const synth::ScenarioSpec& s) {
    nlohmann::ordered_json j;
    j["seed"] = s.seed;
    j["stations"] = s.stations;
    j["grid_nx"] = s.grid_nx;
    j["grid_ny"] = s.grid_ny;
    j["zone_size_meters"] = s.zone_size_meters;
    j["perturbed_grid"] = s.perturbed_grid;
    j["stations_on_grid"] = s.stations_on_grid;
    j["weeks"] = s.weeks;
    j["records_per_hour"] = s.records_per_hour;
    j["start_date"] = s.start_date;
    j["categories"] = s.categories;
    j["base_bytes"] = s.base_bytes;
    j["noise_sigma"] = s.noise_sigma;
    j["station_volume_sigma"] = s.station_volume_sigma;
    j["population_min"] = s.population_min;
    j["population_max"] = s.population_max;
    j["suppressed_fraction"] = s.suppressed_fraction;
    nlohmann::ordered_json effects = nlohmann::ordered_json::array();
    for (const synth::SignalEffect& e : s.effects)
        effects.push_back({{"category", e.category},
                           {"indicator", e.indicator},
                           {"volume_beta", e.volume_beta},
                           {"shape_alpha", e.shape_alpha}});
    j["effects"] = std::move(effects);
    return j;
}

/// Canonical JSON form of the whole config. `threads` is excluded: results
/// are thread-count invariant by contract, so the hash (and with it every
/// output byte) must not depend on it.
nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
    nlohmann::ordered_json j;
    j["out_dir"] = c.out_dir;
    j["seed"] = c.seed;
    j["projection"] = c.projection;
    j["tz_offset_hours"] = c.tz_offset_hours;
    j["inputs"] = {{"traffic", c.inputs.traffic},
                   {"zones", c.inputs.zones},
                   {"region", c.inputs.region},
                   {"indicators", c.inputs.indicators},
                   {"category_map", c.inputs.category_map}};
    j["scenario"] = scenario_to_json(c.scenario);
    j["ingest"] = {{"percentile_filter", c.ingest.percentile_filter},
                   {"percentile", c.ingest.percentile},
                   {"antenna_epsilon", c.ingest.antenna_epsilon},
                   {"malformed_limit", c.ingest.malformed_limit},
                   {"window_start", c.ingest.window_start},
                   {"window_end", c.ingest.window_end},
                   {"rollup_row_budget", c.ingest.rollup_row_budget}};
    j["features"] = {{"per_capita_rca", c.features.per_capita_rca}};
    j["analysis"] = {{"classes", c.analysis.classes},
                     {"class_target", c.analysis.class_target},
                     {"correlation_threshold", c.analysis.correlation_threshold},
                     {"plot_categories", c.analysis.plot_categories}};
    j["model"] = {{"kind", c.model.kind},
                  {"selector", c.model.selector},
                  {"targets", c.model.targets},
                  {"train_ratio", c.model.train_ratio},
                  {"folds", c.model.folds},
                  {"lambda", c.model.lambda},
                  {"shuffle_target", c.model.shuffle_target},
                  {"gbdt",
                   {{"trees", c.model.gbdt.trees},
                    {"depth", c.model.gbdt.depth},
                    {"learning_rate", c.model.gbdt.learning_rate},
                    {"min_leaf", c.model.gbdt.min_leaf},
                    {"histogram_threshold", c.model.gbdt.histogram_threshold},
                    {"max_bins", c.model.gbdt.max_bins}}}};
    j["report"] = {{"table2_targets", c.report.table2_targets},
                   {"table3_targets", c.report.table3_targets}};
    return j;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// Stage plumbing
// ---------------------------------------------------------------------------

void require_file(const std::string& path, const std::string& producer) {
    if (!std::filesystem::exists(path))
        throw StageError("missing " + path + "; run the `" + producer + "` stage first");
}

void require_input(const std::string& path, const std::string& what) {
    if (path.empty())
        throw ConfigurationError("inputs." + what + " is not set");
    if (!std::filesystem::exists(path))
        throw StageError("missing " + what + " input " + path +
                         "; run the `gen` stage first or point inputs." + what +
                         " at existing data");
}

/// Resolves the projection for the loaded region. "auto" picks
/// equirectangular only when the region bounding box fits inside lon/lat
/// ranges; planar meters-scale coordinates always exceed them.
Projection resolve_projection(const std::string& mode, const geom::BoundingRegion& region) {
    if (mode == "planar")
        return Projection{};
    const geom::Bbox b = geom::polygon_bbox(region.shape);
    const bool degree_like =
        b.min_x >= -180.0 && b.max_x <= 180.0 && b.min_y >= -90.0 && b.max_y <= 90.0;
    if (mode == "equirectangular" || degree_like)
        return Projection::equirectangular_about(region.shape);
    return Projection{};
}

const std::vector<std::string>& census_columns() {
    static const std::vector<std::string> cols = {"total_pop", "pop_0_14", "pop_15_29",
                                                  "pop_30_44", "pop_45_59", "pop_60_74",
                                                  "pop_75p"};
    return cols;
}

struct SelectorSpec {
    bool census = false;
    feat::Selector sel = feat::Selector::All;
    std::string canon;  // canonical display name
};

SelectorSpec parse_pipeline_selector(const std::string& name) {
    if (name == "census" || name == "Census")
        return {true, feat::Selector::All, "census"};
    const auto s = feat::parse_selector(name);
    if (!s)
        throw ConfigurationError("unknown selector `" + name +
                                 "` (expected Cumulative, RCA, TWS, All, or census)");
    return {false, *s, feat::selector_name(*s)};
}

std::string selector_prefix(feat::Selector s) {
    switch (s) {
        case feat::Selector::Cumulative: return "SCU:";
        case feat::Selector::Rca: return "RCA:";
        case feat::Selector::Tws: return "TWS:";
        case feat::Selector::All: return "";
    }
    return "";
}

/// Rows: zones carrying both features and a non-missing target value.
/// Columns: the selector's block of the feature matrix, or the census
/// population columns taken straight from the indicator table.
model::Dataset make_dataset(const feat::FeatureMatrix& fm, const analysis::IndicatorTable& ind,
                            const SelectorSpec& sel, const std::string& target) {
    const int tcol = ind.column(target);
    if (tcol < 0)
        throw ConfigurationError("target `" + target + "` is not an indicator column");
    std::map<std::string, std::size_t> ind_row;
    for (std::size_t i = 0; i < ind.zones.size(); ++i)
        ind_row[ind.zones[i]] = i;

    model::Dataset ds;
    if (sel.census) {
        std::vector<std::size_t> cols;
        for (const std::string& name : census_columns()) {
            const int c = ind.column(name);
            if (c < 0)
                throw AnalysisError("indicator table lacks census column " + name);
            cols.push_back(static_cast<std::size_t>(c));
            ds.feature_names.push_back(name);
        }
        for (std::size_t i = 0; i < ind.zones.size(); ++i) {
            const double y = ind.at(i, static_cast<std::size_t>(tcol));
            if (std::isnan(y))
                continue;
            bool complete = true;
            for (const std::size_t c : cols)
                if (std::isnan(ind.at(i, c))) {
                    complete = false;
                    break;
                }
            if (!complete)
                continue;
            ds.row_keys.push_back(ind.zones[i]);
            for (const std::size_t c : cols)
                ds.X.push_back(ind.at(i, c));
            ds.y.push_back(y);
        }
    } else {
        const std::string prefix = selector_prefix(sel.sel);
        std::vector<std::size_t> cols;
        for (std::size_t j = 0; j < fm.columns.size(); ++j)
            if (prefix.empty() || fm.columns[j].rfind(prefix, 0) == 0)
                cols.push_back(j);
        if (cols.empty())
            throw FeatureError("feature matrix has no " + sel.canon +
                               " columns; rerun the `features` stage");
        for (const std::size_t j : cols)
            ds.feature_names.push_back(fm.columns[j]);
        for (std::size_t zi = 0; zi < fm.zones.size(); ++zi) {
            const auto it = ind_row.find(fm.zones[zi]);
            if (it == ind_row.end())
                continue;
            const double y = ind.at(it->second, static_cast<std::size_t>(tcol));
            if (std::isnan(y))
                continue;
            ds.row_keys.push_back(fm.zones[zi]);
            for (const std::size_t j : cols)
                ds.X.push_back(fm.at(zi, j));
            ds.y.push_back(y);
        }
    }
    if (ds.n() == 0)
        throw AnalysisError("no zones have both features and a value for target " + target);
    return ds;
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

struct FitOutcome {
    model::EvaluationReport report;
    std::optional<model::BoostedEnsemble> ensemble;
    std::optional<model::RidgeModel> ridge;
};

FitOutcome train_one(const PipelineConfig& cfg, const model::Dataset& ds_in,
                     const std::string& target, const std::string& selector, bool with_cv,
                     bool keep_model) {
    model::Dataset ds = ds_in;
    if (cfg.model.shuffle_target) {
        // Permutation-null control: the target is shuffled before splitting,
        // severing any real feature-target relation while keeping marginals.
        Rng rng = Rng(cfg.seed).derive(fnv1a64_str(target) | 1);
        for (std::size_t i = ds.n(); i-- > 1;)
            std::swap(ds.y[i], ds.y[rng.uniform_int(i + 1)]);
    }
    const auto [train_idx, test_idx] =
        model::split_indices(ds.n(), cfg.model.train_ratio, cfg.seed);
    const model::Dataset train = ds.subset(train_idx);
    const model::Dataset test = ds.subset(test_idx);

    const bool use_gbdt = cfg.model.kind == "gbdt";
    model::GbdtParams gp = cfg.model.gbdt;
    gp.seed = cfg.seed;

    const auto fit_eval = [&](const model::Dataset& tr, const model::Dataset& ev,
                              FitOutcome* keep) {
        std::vector<double> pred_tr;
        std::vector<double> pred_ev;
        if (use_gbdt) {
            model::BoostedEnsemble ens =
                model::fit_gbdt(tr.X.data(), tr.y.data(), tr.n(), tr.p(), gp,
                                tr.feature_names, cfg.threads);
            pred_tr = ens.predict_all(tr.X, tr.n());
            pred_ev = ens.predict_all(ev.X, ev.n());
            if (keep)
                keep->ensemble = std::move(ens);
        } else {
            model::RidgeModel rm =
                model::fit_ridge(tr.X.data(), tr.y.data(), tr.n(), tr.p(), cfg.model.lambda);
            pred_tr = rm.predict_all(tr.X, tr.n());
            pred_ev = rm.predict_all(ev.X, ev.n());
            if (keep)
                keep->ridge = std::move(rm);
        }
        return std::make_pair(model::r_squared(tr.y, pred_tr), model::r_squared(ev.y, pred_ev));
    };

    FitOutcome out;
    out.report.target = target;
    out.report.selector = selector;
    out.report.model_kind = cfg.model.kind;
    out.report.seed = cfg.seed;
    out.report.n_train = train.n();
    out.report.n_test = test.n();
    out.report.n_features = ds.p();

    if (with_cv && cfg.model.folds >= 2) {
        const auto folds =
            model::kfold_indices(train.n(), cfg.model.folds, cfg.seed);
        for (std::size_t f = 0; f < folds.size(); ++f) {
            std::vector<char> in_val(train.n(), 0);
            for (const std::size_t i : folds[f])
                in_val[i] = 1;
            std::vector<std::size_t> fit_rows;
            for (std::size_t i = 0; i < train.n(); ++i)
                if (!in_val[i])
                    fit_rows.push_back(i);
            const model::Dataset cv_train = train.subset(fit_rows);
            const model::Dataset cv_val = train.subset(folds[f]);
            out.report.fold_r2.push_back(fit_eval(cv_train, cv_val, nullptr).second);
        }
    }

    const auto [train_r2, test_r2] = fit_eval(train, test, keep_model ? &out : nullptr);
    out.report.train_r2 = train_r2;
    out.report.test_r2 = test_r2;
    if (!keep_model) {
        out.ensemble.reset();
        out.ridge.reset();
    }
    return out;
}

void save_ridge_model(const std::string& path, const model::RidgeModel& m,
                      const std::vector<std::string>& names,
                      const std::vector<std::pair<std::string, std::string>>& meta) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json meta_json = nlohmann::ordered_json::object();
    for (const auto& [k, v] : meta)
        meta_json[k] = v;
    j["_meta"] = std::move(meta_json);
    j["kind"] = "ridge";
    j["feature_names"] = names;
    j["intercept"] = m.intercept;
    j["coef"] = m.coef;
    j["coef_std"] = m.coef_std;
    std::ofstream out(path);
    if (!out)
        throw FormatError("cannot open " + path + " for writing");
    out << j.dump(1, '\t') << "\n";
    if (!out)
        throw FormatError("failed writing " + path);
}

std::string fmt_r2(double v) { return csv::fmt_double(v, 6); }

double mean_of(const std::vector<double>& v) {
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (const double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// PipelineConfig
// ---------------------------------------------------------------------------

PipelineConfig PipelineConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigurationError("cannot open config file " + path);
    json root;
    try {
        root = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigurationError("config file " + path + " is not valid JSON: " + e.what());
    }
    expect_object(root, "");
    expect_keys(root, "",
                {"out_dir", "seed", "threads", "projection", "tz_offset_hours", "inputs",
                 "scenario", "ingest", "features", "analysis", "model", "report"});

    PipelineConfig cfg;
    get_string(root, "", "out_dir", cfg.out_dir);
    get_u64(root, "", "seed", cfg.seed);
    get_int(root, "", "threads", cfg.threads);
    get_string(root, "", "projection", cfg.projection);
    get_int(root, "", "tz_offset_hours", cfg.tz_offset_hours);

    if (root.contains("inputs")) {
        const json& o = root.at("inputs");
        expect_object(o, "inputs");
        expect_keys(o, "inputs", {"traffic", "zones", "region", "indicators", "category_map"});
        get_string(o, "inputs", "traffic", cfg.inputs.traffic);
        get_string(o, "inputs", "zones", cfg.inputs.zones);
        get_string(o, "inputs", "region", cfg.inputs.region);
        get_string(o, "inputs", "indicators", cfg.inputs.indicators);
        get_string(o, "inputs", "category_map", cfg.inputs.category_map);
    }
    if (root.contains("scenario"))
        parse_scenario(root.at("scenario"), "scenario", cfg.scenario);
    if (root.contains("ingest")) {
        const json& o = root.at("ingest");
        expect_object(o, "ingest");
        expect_keys(o, "ingest",
                    {"percentile_filter", "percentile", "antenna_epsilon", "malformed_limit",
                     "window_start", "window_end", "rollup_row_budget"});
        get_bool(o, "ingest", "percentile_filter", cfg.ingest.percentile_filter);
        get_double(o, "ingest", "percentile", cfg.ingest.percentile);
        get_double(o, "ingest", "antenna_epsilon", cfg.ingest.antenna_epsilon);
        get_double(o, "ingest", "malformed_limit", cfg.ingest.malformed_limit);
        get_string(o, "ingest", "window_start", cfg.ingest.window_start);
        get_string(o, "ingest", "window_end", cfg.ingest.window_end);
        get_size(o, "ingest", "rollup_row_budget", cfg.ingest.rollup_row_budget);
    }
    if (root.contains("features")) {
        const json& o = root.at("features");
        expect_object(o, "features");
        expect_keys(o, "features", {"per_capita_rca"});
        get_bool(o, "features", "per_capita_rca", cfg.features.per_capita_rca);
    }
    if (root.contains("analysis")) {
        const json& o = root.at("analysis");
        expect_object(o, "analysis");
        expect_keys(o, "analysis",
                    {"classes", "class_target", "correlation_threshold", "plot_categories"});
        get_int(o, "analysis", "classes", cfg.analysis.classes);
        get_string(o, "analysis", "class_target", cfg.analysis.class_target);
        get_double(o, "analysis", "correlation_threshold", cfg.analysis.correlation_threshold);
        get_strings(o, "analysis", "plot_categories", cfg.analysis.plot_categories);
    }
    if (root.contains("model")) {
        const json& o = root.at("model");
        expect_object(o, "model");
        expect_keys(o, "model",
                    {"kind", "selector", "targets", "train_ratio", "folds", "lambda",
                     "shuffle_target", "gbdt"});
        get_string(o, "model", "kind", cfg.model.kind);
        get_string(o, "model", "selector", cfg.model.selector);
        get_strings(o, "model", "targets", cfg.model.targets);
        get_double(o, "model", "train_ratio", cfg.model.train_ratio);
        get_int(o, "model", "folds", cfg.model.folds);
        get_double(o, "model", "lambda", cfg.model.lambda);
        get_bool(o, "model", "shuffle_target", cfg.model.shuffle_target);
        if (o.contains("gbdt")) {
            const json& g = o.at("gbdt");
            expect_object(g, "model.gbdt");
            expect_keys(g, "model.gbdt",
                        {"trees", "depth", "learning_rate", "min_leaf", "histogram_threshold",
                         "max_bins"});
            get_int(g, "model.gbdt", "trees", cfg.model.gbdt.trees);
            get_int(g, "model.gbdt", "depth", cfg.model.gbdt.depth);
            get_double(g, "model.gbdt", "learning_rate", cfg.model.gbdt.learning_rate);
            get_int(g, "model.gbdt", "min_leaf", cfg.model.gbdt.min_leaf);
            get_int(g, "model.gbdt", "histogram_threshold", cfg.model.gbdt.histogram_threshold);
            get_int(g, "model.gbdt", "max_bins", cfg.model.gbdt.max_bins);
        }
    }
    if (root.contains("report")) {
        const json& o = root.at("report");
        expect_object(o, "report");
        expect_keys(o, "report", {"table2_targets", "table3_targets"});
        get_strings(o, "report", "table2_targets", cfg.report.table2_targets);
        get_strings(o, "report", "table3_targets", cfg.report.table3_targets);
    }
    return cfg;
}

void PipelineConfig::finalize() {
    if (out_dir.empty())
        throw ConfigurationError("out_dir must not be empty");
    if (threads < 0)
        throw ConfigurationError("threads must be non-negative");
    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    if (projection != "auto" && projection != "planar" && projection != "equirectangular")
        throw ConfigurationError(
            "projection must be auto, planar, or equirectangular, got " + projection);
    if (tz_offset_hours < -14 || tz_offset_hours > 14)
        throw ConfigurationError("tz_offset_hours must be within [-14, 14]");
    if (!(ingest.percentile > 0.0) || ingest.percentile > 100.0)
        throw ConfigurationError("ingest.percentile must be in (0, 100]");
    if (ingest.antenna_epsilon < 0.0)
        throw ConfigurationError("ingest.antenna_epsilon must be non-negative");
    if (ingest.malformed_limit < 0.0 || ingest.malformed_limit > 1.0)
        throw ConfigurationError("ingest.malformed_limit must be in [0, 1]");
    if (!ingest.window_start.empty() && !timeutil::parse_minute_utc(ingest.window_start))
        throw ConfigurationError("ingest.window_start must be YYYY-MM-DDTHH:MM");
    if (!ingest.window_end.empty() && !timeutil::parse_minute_utc(ingest.window_end))
        throw ConfigurationError("ingest.window_end must be YYYY-MM-DDTHH:MM");
    if (ingest.rollup_row_budget < 1024)
        throw ConfigurationError("ingest.rollup_row_budget must be at least 1024");
    if (analysis.classes < 2)
        throw ConfigurationError("analysis.classes must be at least 2");
    if (analysis.correlation_threshold < 0.0 || analysis.correlation_threshold > 1.0)
        throw ConfigurationError("analysis.correlation_threshold must be in [0, 1]");
    if (model.kind != "gbdt" && model.kind != "ridge")
        throw ConfigurationError("model.kind must be gbdt or ridge, got " + model.kind);
    parse_pipeline_selector(model.selector);
    if (model.targets.empty())
        throw ConfigurationError("model.targets must not be empty");
    if (!(model.train_ratio > 0.0) || !(model.train_ratio < 1.0))
        throw ConfigurationError("model.train_ratio must be in (0, 1)");
    if (model.folds < 0)
        throw ConfigurationError("model.folds must be non-negative");
    if (model.lambda < 0.0)
        throw ConfigurationError("model.lambda must be non-negative");
    if (model.gbdt.trees < 0)
        throw ConfigurationError("model.gbdt.trees must be non-negative");
    if (model.gbdt.depth < 0)
        throw ConfigurationError("model.gbdt.depth must be non-negative");
    if (!(model.gbdt.learning_rate > 0.0) || model.gbdt.learning_rate > 1.0)
        throw ConfigurationError("model.gbdt.learning_rate must be in (0, 1]");
    if (model.gbdt.min_leaf < 1)
        throw ConfigurationError("model.gbdt.min_leaf must be at least 1");
    if (model.gbdt.histogram_threshold < 0)
        throw ConfigurationError("model.gbdt.histogram_threshold must be non-negative");
    if (model.gbdt.max_bins < 2 || model.gbdt.max_bins > 255)
        throw ConfigurationError("model.gbdt.max_bins must be in [2, 255]");

    if (scenario.seed == kSeedFollowsPipeline)
        scenario.seed = seed;

    const synth::ScenarioPaths scen = synth::ScenarioPaths::under(out_dir + "/scenario");
    if (inputs.traffic.empty())
        inputs.traffic = scen.traffic;
    if (inputs.zones.empty())
        inputs.zones = scen.zones;
    if (inputs.region.empty())
        inputs.region = scen.region;
    if (inputs.indicators.empty())
        inputs.indicators = scen.indicators;
    if (inputs.category_map.empty())
        inputs.category_map = scen.category_map;

    config_hash = hex64(fnv1a64_str(config_to_json(*this).dump()));
}

std::string PipelineConfig::meta_line() const {
    return "config_hash=" + config_hash + " seed=" + std::to_string(seed);
}

std::vector<std::pair<std::string, std::string>> PipelineConfig::meta_fields() const {
    return {{"config_hash", config_hash}, {"seed", std::to_string(seed)}};
}

RunPaths RunPaths::under(const std::string& out_dir) {
    RunPaths p;
    p.scenario_dir = out_dir + "/scenario";
    p.rollup = out_dir + "/rollup.csv";
    p.sites = out_dir + "/sites.csv";
    p.ingest_stats = out_dir + "/ingest_stats.json";
    p.cells = out_dir + "/cells.geojson";
    p.weights = out_dir + "/weights.csv";
    p.series = out_dir + "/series.csv";
    p.features = out_dir + "/features.csv";
    p.classes = out_dir + "/classes.csv";
    p.correlation = out_dir + "/correlation.csv";
    p.table2 = out_dir + "/table2.csv";
    p.table3 = out_dir + "/table3.csv";
    p.evaluation = out_dir + "/evaluation.csv";
    return p;
}

std::string model_path(const PipelineConfig& cfg, const std::string& target,
                       const std::string& selector) {
    std::string sel = selector;
    std::transform(sel.begin(), sel.end(), sel.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return cfg.out_dir + "/model_" + target + "_" + sel + ".json";
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

void run_gen(const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    const synth::ScenarioPaths paths = synth::generate(cfg.scenario, cfg.out_dir + "/scenario");
    std::cout << "[gen] scenario written under " << cfg.out_dir << "/scenario ("
              << cfg.scenario.grid_nx * cfg.scenario.grid_ny << " zones)\n";
    (void)paths;
}

void run_ingest_stage(const PipelineConfig& cfg) {
    require_input(cfg.inputs.traffic, "traffic");
    require_input(cfg.inputs.category_map, "category_map");
    std::filesystem::create_directories(cfg.out_dir);
    const RunPaths paths = RunPaths::under(cfg.out_dir);

    const ingest::CategoryMap cmap = ingest::CategoryMap::load(cfg.inputs.category_map);
    ingest::IngestConfig icfg;
    icfg.percentile_filter = cfg.ingest.percentile_filter;
    icfg.percentile = cfg.ingest.percentile;
    icfg.antenna_epsilon = cfg.ingest.antenna_epsilon;
    icfg.malformed_limit = cfg.ingest.malformed_limit;
    if (!cfg.ingest.window_start.empty())
        icfg.window_start_minute = *timeutil::parse_minute_utc(cfg.ingest.window_start);
    if (!cfg.ingest.window_end.empty())
        icfg.window_end_minute = *timeutil::parse_minute_utc(cfg.ingest.window_end);
    icfg.rollup_row_budget = cfg.ingest.rollup_row_budget;
    icfg.spill_dir = cfg.out_dir + "/spill";
    std::filesystem::create_directories(icfg.spill_dir);

    const ingest::IngestOutput out = ingest::run_ingest(cfg.inputs.traffic, cmap, icfg);
    ingest::write_rollup(paths.rollup, out.rows, cfg.meta_fields());
    ingest::write_sites(paths.sites, out.sites, cfg.meta_fields());

    nlohmann::ordered_json stats;
    nlohmann::ordered_json meta_json = nlohmann::ordered_json::object();
    for (const auto& [k, v] : cfg.meta_fields())
        meta_json[k] = v;
    stats["_meta"] = std::move(meta_json);
    stats["data_lines"] = out.stats.data_lines;
    stats["malformed"] = out.stats.malformed;
    stats["out_of_window"] = out.stats.out_of_window;
    stats["unmapped_records"] = out.stats.unmapped_records;
    stats["filtered_records"] = out.stats.filtered_records;
    stats["kept_records"] = out.stats.kept_records;
    stats["apps_seen"] = out.stats.apps_seen;
    stats["apps_kept"] = out.stats.apps_kept;
    stats["spill_shards"] = out.stats.spill_shards;
    stats["sites"] = out.sites.size();
    stats["rollup_rows"] = out.rows.size();
    if (out.stats.kept_records > 0) {
        stats["min_minute_utc"] = timeutil::format_minute_utc(out.stats.min_minute);
        stats["max_minute_utc"] = timeutil::format_minute_utc(out.stats.max_minute);
    }
    std::ofstream sf(paths.ingest_stats);
    if (!sf)
        throw FormatError("cannot open " + paths.ingest_stats + " for writing");
    sf << stats.dump(1, '\t') << "\n";

    std::cout << "[ingest] " << out.stats.kept_records << " records kept ("
              << out.stats.filtered_records << " filtered, " << out.stats.unmapped_records
              << " unmapped, " << out.stats.malformed << " malformed) -> " << out.rows.size()
              << " rollup rows over " << out.sites.size() << " sites\n";
}

void run_tessellate(const PipelineConfig& cfg) {
    require_input(cfg.inputs.region, "region");
    require_input(cfg.inputs.zones, "zones");
    const RunPaths paths = RunPaths::under(cfg.out_dir);
    require_file(paths.sites, "ingest");

    geom::BoundingRegion region = geo_io::load_region(cfg.inputs.region);
    std::vector<geom::Zone> zones = geo_io::load_zones(cfg.inputs.zones);
    const Projection proj = resolve_projection(cfg.projection, region);
    const char* proj_name =
        proj.mode == Projection::Mode::planar ? "planar" : "equirectangular";
    proj.project(region.shape);
    for (geom::Zone& z : zones) {
        proj.project(z.shape);
        z.area = geom::multipolygon_area(z.shape);
    }
    std::vector<geom::Site> sites;
    for (const ingest::StationSite& s : ingest::read_sites(paths.sites))
        sites.push_back({s.id, proj.apply(s.lon, s.lat)});

    const geom::VoronoiTessellation tess = geom::build_tessellation(sites, region);
    const geom::AreaWeightMatrix weights = geom::areal_weights(tess, zones, cfg.threads);

    auto meta = cfg.meta_fields();
    meta.emplace_back("projection", proj_name);
    geo_io::write_cells(paths.cells, tess, meta);
    interp::write_weights(paths.weights, weights, meta);
    std::cout << "[tessellate] " << tess.cells.size() << " cells (" << proj_name << "), "
              << weights.entries.size() << " weight entries over " << zones.size()
              << " zones\n";
}

void run_interpolate(const PipelineConfig& cfg) {
    const RunPaths paths = RunPaths::under(cfg.out_dir);
    require_file(paths.rollup, "ingest");
    require_file(paths.sites, "ingest");
    require_file(paths.weights, "tessellate");

    const std::vector<ingest::RollupRow> rollup = ingest::read_rollup(paths.rollup);
    std::vector<geom::SiteId> universe;
    for (const ingest::StationSite& s : ingest::read_sites(paths.sites))
        universe.push_back(s.id);
    const geom::AreaWeightMatrix W = interp::read_weights(paths.weights, universe);
    const interp::ZoneHourlySeries series = interp::interpolate_traffic(rollup, W, cfg.threads);
    interp::write_series(paths.series, series, cfg.meta_fields());
    std::cout << "[interpolate] " << series.rows.size() << " zone-hour-category rows across "
              << series.zones.size() << " zones\n";
}

void run_features_stage(const PipelineConfig& cfg) {
    const RunPaths paths = RunPaths::under(cfg.out_dir);
    require_file(paths.series, "interpolate");

    const interp::ZoneHourlySeries series = interp::read_series(paths.series);
    const feat::TwsResult tws = feat::compute_tws(series, cfg.tz_offset_hours, cfg.threads);

    std::map<std::string, double> population;
    const std::map<std::string, double>* pop_ptr = nullptr;
    if (cfg.features.per_capita_rca) {
        require_input(cfg.inputs.indicators, "indicators");
        const analysis::IndicatorTable ind = analysis::IndicatorTable::load(cfg.inputs.indicators);
        const int pc = ind.column("total_pop");
        if (pc < 0)
            throw FeatureError("per-capita RCA requested but indicators lack total_pop");
        for (std::size_t i = 0; i < ind.zones.size(); ++i) {
            const double v = ind.at(i, static_cast<std::size_t>(pc));
            if (!std::isnan(v) && v > 0.0)
                population[ind.zones[i]] = v;
        }
        pop_ptr = &population;
    }
    const feat::RcaResult rca = feat::compute_rca(series, pop_ptr);
    const feat::ScuResult scu = feat::compute_scu(series);

    std::vector<std::string> dropped;
    const feat::FeatureMatrix fm = feat::assemble(feat::Selector::All, tws, rca, scu, &dropped);
    auto meta = cfg.meta_fields();
    meta.emplace_back("tz_offset_hours", std::to_string(cfg.tz_offset_hours));
    if (!dropped.empty())
        meta.emplace_back("dropped_zones", std::to_string(dropped.size()));
    feat::write_features(paths.features, fm, meta);
    std::cout << "[features] " << fm.zones.size() << " zones x " << fm.columns.size()
              << " columns";
    if (!dropped.empty())
        std::cout << " (" << dropped.size() << " zones dropped: no traffic)";
    if (!rca.dropped_categories.empty())
        std::cout << " (" << rca.dropped_categories.size() << " categories without traffic)";
    std::cout << "\n";
}

void run_analyze(const PipelineConfig& cfg) {
    require_input(cfg.inputs.indicators, "indicators");
    const RunPaths paths = RunPaths::under(cfg.out_dir);
    require_file(paths.features, "features");

    const analysis::IndicatorTable ind = analysis::IndicatorTable::load(cfg.inputs.indicators);
    const feat::FeatureMatrix fm = feat::read_features(paths.features);
    const std::string& target = cfg.analysis.class_target;
    const int tcol = ind.column(target);
    if (tcol < 0)
        throw ConfigurationError("analysis.class_target `" + target +
                                 "` is not an indicator column");
    std::vector<std::pair<std::string, double>> values;
    for (std::size_t i = 0; i < ind.zones.size(); ++i) {
        const double v = ind.at(i, static_cast<std::size_t>(tcol));
        if (!std::isnan(v))
            values.emplace_back(ind.zones[i], v);
    }
    const analysis::ClassLabels labels = analysis::quantile_classes(values, cfg.analysis.classes);
    analysis::write_labels(paths.classes, labels, cfg.meta_line());

    // Per-category typical-week profiles by class.
    for (const std::string& cat : cfg.analysis.plot_categories) {
        const std::string prefix = "TWS:" + cat + ":";
        std::vector<std::size_t> cols;
        for (std::size_t j = 0; j < fm.columns.size(); ++j)
            if (fm.columns[j].rfind(prefix, 0) == 0)
                cols.push_back(j);
        if (cols.empty()) {
            std::cerr << "[analyze] warning: no signature columns for category " << cat
                      << ", skipping its profile plot\n";
            continue;
        }
        std::vector<std::string> names;
        std::vector<double> sub_values(fm.zones.size() * cols.size());
        for (const std::size_t j : cols)
            names.push_back(fm.columns[j]);
        for (std::size_t zi = 0; zi < fm.zones.size(); ++zi)
            for (std::size_t k = 0; k < cols.size(); ++k)
                sub_values[zi * cols.size() + k] = fm.at(zi, cols[k]);
        const analysis::ClassMeans means =
            analysis::class_means(labels, fm.zones, names, sub_values);
        analysis::write_class_means(cfg.out_dir + "/tws_class_means_" + cat + ".csv", means,
                                    "signature_hour", cfg.meta_line());
        std::vector<double> x(cols.size());
        for (std::size_t k = 0; k < cols.size(); ++k)
            x[k] = static_cast<double>(k + 1);
        std::vector<plot::Series> series;
        for (std::size_t c = 0; c < means.class_names.size(); ++c) {
            plot::Series s;
            s.label = means.class_names[c] + " " + target;
            s.y.assign(means.mean.begin() + static_cast<std::ptrdiff_t>(c * cols.size()),
                       means.mean.begin() + static_cast<std::ptrdiff_t>((c + 1) * cols.size()));
            s.ci.assign(means.ci_half.begin() + static_cast<std::ptrdiff_t>(c * cols.size()),
                        means.ci_half.begin() +
                            static_cast<std::ptrdiff_t>((c + 1) * cols.size()));
            series.push_back(std::move(s));
        }
        plot::write_line_chart(cfg.out_dir + "/tws_" + cat + ".svg", cfg.meta_line(),
                               "Typical week signature - " + cat, "hour of week (Mon 00 = 1)",
                               "standardized traffic", x, series);
    }

    // RCA and SCU class means across categories.
    const auto block_chart = [&](const std::string& prefix, const std::string& stem,
                                 const std::string& title, const std::string& y_label) {
        std::vector<std::size_t> cols;
        std::vector<std::string> names;
        std::vector<std::string> cats;
        for (std::size_t j = 0; j < fm.columns.size(); ++j)
            if (fm.columns[j].rfind(prefix, 0) == 0) {
                cols.push_back(j);
                names.push_back(fm.columns[j]);
                cats.push_back(fm.columns[j].substr(prefix.size()));
            }
        if (cols.empty())
            return;
        std::vector<double> sub_values(fm.zones.size() * cols.size());
        for (std::size_t zi = 0; zi < fm.zones.size(); ++zi)
            for (std::size_t k = 0; k < cols.size(); ++k)
                sub_values[zi * cols.size() + k] = fm.at(zi, cols[k]);
        const analysis::ClassMeans means =
            analysis::class_means(labels, fm.zones, names, sub_values);
        analysis::write_class_means(cfg.out_dir + "/" + stem + ".csv", means, "feature",
                                    cfg.meta_line());
        std::vector<plot::Series> series;
        for (std::size_t c = 0; c < means.class_names.size(); ++c) {
            plot::Series s;
            s.label = means.class_names[c] + " " + target;
            s.y.assign(means.mean.begin() + static_cast<std::ptrdiff_t>(c * cols.size()),
                       means.mean.begin() + static_cast<std::ptrdiff_t>((c + 1) * cols.size()));
            s.ci.assign(means.ci_half.begin() + static_cast<std::ptrdiff_t>(c * cols.size()),
                        means.ci_half.begin() +
                            static_cast<std::ptrdiff_t>((c + 1) * cols.size()));
            series.push_back(std::move(s));
        }
        plot::write_bar_chart(cfg.out_dir + "/" + stem + ".svg", cfg.meta_line(), title,
                              y_label, cats, series);
    };
    block_chart("RCA:", "rca_class_means", "Relative usage intensity by class", "RCA");
    block_chart("SCU:", "scu_class_means", "Standardized cumulative utilization by class",
                "SCU");

    const analysis::CorrelationMatrix corr =
        analysis::masked_correlation(ind, cfg.analysis.correlation_threshold);
    analysis::write_correlation(paths.correlation, corr, cfg.meta_line());
    for (const std::string& w : corr.warnings)
        std::cerr << "[analyze] warning: " << w << "\n";
    std::cout << "[analyze] " << labels.zones.size() << " zones in " << cfg.analysis.classes
              << " classes of " << target << "; correlation matrix over " << corr.columns.size()
              << " indicators\n";
}

namespace {

void write_evaluation(const std::string& path, const PipelineConfig& cfg,
                      const std::vector<model::EvaluationReport>& reports) {
    csv::Writer w(path, cfg.meta_line(),
                  "target,selector,model,seed,n_train,n_test,n_features,cv_r2,train_r2,test_r2");
    for (const model::EvaluationReport& r : reports) {
        std::string line = r.target + "," + r.selector + "," + r.model_kind + "," +
                           std::to_string(r.seed) + "," + std::to_string(r.n_train) + "," +
                           std::to_string(r.n_test) + "," + std::to_string(r.n_features) + ",";
        if (!r.fold_r2.empty())
            line += fmt_r2(mean_of(r.fold_r2));
        line += "," + fmt_r2(r.train_r2) + "," + fmt_r2(r.test_r2);
        w.write_line(line);
    }
    w.close();
}

}  // namespace

std::vector<model::EvaluationReport> run_train(const PipelineConfig& cfg) {
    require_input(cfg.inputs.indicators, "indicators");
    const RunPaths paths = RunPaths::under(cfg.out_dir);
    require_file(paths.features, "features");

    const analysis::IndicatorTable ind = analysis::IndicatorTable::load(cfg.inputs.indicators);
    const feat::FeatureMatrix fm = feat::read_features(paths.features);
    const SelectorSpec sel = parse_pipeline_selector(cfg.model.selector);

    std::vector<model::EvaluationReport> reports;
    for (const std::string& target : cfg.model.targets) {
        const model::Dataset ds = make_dataset(fm, ind, sel, target);
        FitOutcome out = train_one(cfg, ds, target, sel.canon, /*with_cv=*/true,
                                   /*keep_model=*/true);
        auto meta = cfg.meta_fields();
        meta.emplace_back("target", target);
        meta.emplace_back("selector", sel.canon);
        const std::string mpath = model_path(cfg, target, sel.canon);
        if (out.ensemble)
            model::save_ensemble(mpath, *out.ensemble, meta);
        else if (out.ridge)
            save_ridge_model(mpath, *out.ridge, ds.feature_names, meta);
        std::cout << "[train] target=" << target << " selector=" << sel.canon
                  << " model=" << cfg.model.kind << " n=" << ds.n() << " p=" << ds.p();
        if (!out.report.fold_r2.empty())
            std::cout << " cv_r2=" << fmt_r2(mean_of(out.report.fold_r2));
        std::cout << " train_r2=" << fmt_r2(out.report.train_r2)
                  << " test_r2=" << fmt_r2(out.report.test_r2) << "\n";
        reports.push_back(std::move(out.report));
    }
    write_evaluation(paths.evaluation, cfg, reports);
    return reports;
}

void run_explain(const PipelineConfig& cfg) {
    if (cfg.model.kind != "gbdt")
        throw ConfigurationError("explain requires model.kind=gbdt (tree attribution)");
    require_input(cfg.inputs.indicators, "indicators");
    const RunPaths paths = RunPaths::under(cfg.out_dir);
    require_file(paths.features, "features");
    const SelectorSpec sel = parse_pipeline_selector(cfg.model.selector);
    const std::string target = cfg.model.targets.front();
    const std::string mpath = model_path(cfg, target, sel.canon);
    require_file(mpath, "train");

    const model::BoostedEnsemble ens = model::load_ensemble(mpath);
    const analysis::IndicatorTable ind = analysis::IndicatorTable::load(cfg.inputs.indicators);
    const feat::FeatureMatrix fm = feat::read_features(paths.features);
    const model::Dataset ds = make_dataset(fm, ind, sel, target);
    if (ens.feature_names != ds.feature_names)
        throw StageError("model " + mpath +
                         " was trained on different feature columns; rerun the `train` stage");

    const model::AttributionMatrix am = model::attribute_all(ens, ds.X, ds.n(), cfg.threads);
    const model::AttributionSummary summary =
        model::summarize_attributions(am, ds.X, ds.n(), 20);

    {
        csv::Writer w(cfg.out_dir + "/shap_summary.csv", cfg.meta_line(),
                      "rank,feature,mean_abs_shap");
        for (std::size_t i = 0; i < summary.top_features.size(); ++i)
            w.write_line(std::to_string(i + 1) + "," + summary.top_features[i] + "," +
                         csv::fmt_double(summary.mean_abs[i]));
        w.close();
    }
    {
        csv::Writer w(cfg.out_dir + "/shap_points.csv", cfg.meta_line(),
                      "feature,zone_id,shap_value,feature_value,value_percentile");
        for (const model::SummaryRecord& r : summary.records)
            w.write_line(r.feature + "," + ds.row_keys[r.row] + "," +
                         csv::fmt_double(r.shap_value) + "," + csv::fmt_double(r.feature_value) +
                         "," + csv::fmt_double(r.value_percentile, 6));
        w.close();
    }
    {
        const std::size_t k = std::min<std::size_t>(10, summary.top_features.size());
        std::vector<std::string> cats(summary.top_features.begin(),
                                      summary.top_features.begin() +
                                          static_cast<std::ptrdiff_t>(k));
        plot::Series s;
        s.label = "mean |attribution|";
        s.y.assign(summary.mean_abs.begin(),
                   summary.mean_abs.begin() + static_cast<std::ptrdiff_t>(k));
        plot::write_bar_chart(cfg.out_dir + "/shap_summary.svg", cfg.meta_line(),
                              "Top feature attributions - " + target + " (" + sel.canon + ")",
                              "mean |attribution|", cats, {s});
    }
    std::cout << "[explain] target=" << target << " selector=" << sel.canon
              << " base_value=" << csv::fmt_double(am.base_value, 6) << "; top feature "
              << (summary.top_features.empty() ? "-" : summary.top_features.front()) << "\n";
}

void run_report(const PipelineConfig& cfg) {
    require_input(cfg.inputs.indicators, "indicators");
    const RunPaths paths = RunPaths::under(cfg.out_dir);
    require_file(paths.features, "features");

    const analysis::IndicatorTable ind = analysis::IndicatorTable::load(cfg.inputs.indicators);
    const feat::FeatureMatrix fm = feat::read_features(paths.features);

    std::map<std::string, double> cache;
    const auto score = [&](const std::string& target, const std::string& selector) {
        const SelectorSpec sel = parse_pipeline_selector(selector);
        const std::string key = target + "|" + sel.canon;
        const auto it = cache.find(key);
        if (it != cache.end())
            return it->second;
        const model::Dataset ds = make_dataset(fm, ind, sel, target);
        const FitOutcome out = train_one(cfg, ds, target, sel.canon, /*with_cv=*/false,
                                         /*keep_model=*/false);
        cache[key] = out.report.test_r2;
        std::cout << "[report] target=" << target << " selector=" << sel.canon
                  << " test_r2=" << fmt_r2(out.report.test_r2) << "\n";
        return out.report.test_r2;
    };

    {
        csv::Writer w(paths.table2, cfg.meta_line(), "target,cumulative,rca,tws,all");
        for (const std::string& target : cfg.report.table2_targets)
            w.write_line(target + "," + fmt_r2(score(target, "Cumulative")) + "," +
                         fmt_r2(score(target, "RCA")) + "," + fmt_r2(score(target, "TWS")) +
                         "," + fmt_r2(score(target, "All")));
        w.close();
    }
    {
        csv::Writer w(paths.table3, cfg.meta_line(), "target,census,all");
        for (const std::string& target : cfg.report.table3_targets)
            w.write_line(target + "," + fmt_r2(score(target, "census")) + "," +
                         fmt_r2(score(target, "All")));
        w.close();
    }
    std::cout << "[report] wrote " << paths.table2 << " and " << paths.table3 << "\n";
}

void run_all(const PipelineConfig& cfg) {
    // `gen` runs only when the inputs actually point at the generated
    // scenario; with external data the chain starts at ingest.
    const synth::ScenarioPaths scen = synth::ScenarioPaths::under(cfg.out_dir + "/scenario");
    if (cfg.inputs.traffic == scen.traffic)
        run_gen(cfg);
    run_ingest_stage(cfg);
    run_tessellate(cfg);
    run_interpolate(cfg);
    run_features_stage(cfg);
    run_analyze(cfg);
    run_train(cfg);
    run_explain(cfg);
    run_report(cfg);
}

}  // namespace zonecast::pipeline
