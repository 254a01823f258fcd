#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <zonecast/gbdt.hpp>
#include <zonecast/model.hpp>
#include <zonecast/synthgen.hpp>

namespace zonecast::pipeline {

/// Everything a run needs, loaded from a JSON config file and optionally
/// overridden by CLI flags. `finalize()` fills derived defaults (input paths
/// pointing at the generated scenario, thread count) and computes the config
/// hash that every output file carries.
struct PipelineConfig {
    std::string out_dir = "out";
    std::uint64_t seed = 42;
    int threads = 0;  // 0: machine parallelism
    /// auto: planar when the region bounding box exceeds lon/lat ranges,
    /// equirectangular otherwise. Explicit "planar"/"equirectangular" force it.
    std::string projection = "auto";
    int tz_offset_hours = 0;

    struct Inputs {
        std::string traffic;
        std::string zones;
        std::string region;
        std::string indicators;
        std::string category_map;
    } inputs;

    synth::ScenarioSpec scenario;

    struct Ingest {
        bool percentile_filter = true;
        double percentile = 99.0;
        double antenna_epsilon = 0.0;
        double malformed_limit = 0.01;
        std::string window_start;  // "YYYY-MM-DDTHH:MM", empty = unbounded
        std::string window_end;
        std::size_t rollup_row_budget = 4000000;
    } ingest;

    struct Features {
        bool per_capita_rca = false;
    } features;

    struct Analysis {
        int classes = 3;
        std::string class_target = "median_income";
        double correlation_threshold = 0.5;
        std::vector<std::string> plot_categories = {"news", "social_media", "streaming"};
    } analysis;

    struct Model {
        std::string kind = "gbdt";  // gbdt | ridge
        std::string selector = "All";
        std::vector<std::string> targets = {"median_income"};
        double train_ratio = 0.8;
        int folds = 5;
        double lambda = 1.0;
        bool shuffle_target = false;  // permutation-null control
        /// Pipeline defaults are sized for a few hundred zone rows (shallow,
        /// regularized, fast); the library defaults suit larger datasets.
        model::GbdtParams gbdt{.trees = 150,
                               .depth = 4,
                               .learning_rate = 0.08,
                               .min_leaf = 20,
                               .seed = 0,
                               .histogram_threshold = 256,
                               .max_bins = 64};
    } model;

    struct Report {
        std::vector<std::string> table2_targets = {"poverty", "median_income", "gini"};
        std::vector<std::string> table3_targets = {"median_income", "gini", "sup"};
    } report;

    std::string config_hash;  // of the canonical JSON form, set by finalize()

    /// The scenario seed tracks the pipeline seed unless the config sets
    /// `scenario.seed` explicitly.
    static constexpr std::uint64_t kSeedFollowsPipeline = ~0ULL;
    PipelineConfig() { scenario.seed = kSeedFollowsPipeline; }

    /// Parses and validates a config file. Unknown keys and type mismatches
    /// throw ConfigurationError naming the offending field path.
    static PipelineConfig load(const std::string& path);

    /// Validates cross-field constraints, defaults empty input paths to the
    /// scenario files under out_dir, resolves threads, computes config_hash.
    void finalize();

    std::string meta_line() const;  // "config_hash=... seed=..."
    std::vector<std::pair<std::string, std::string>> meta_fields() const;
};

/// Output locations of every stage under the configured out_dir.
struct RunPaths {
    std::string scenario_dir;
    std::string rollup;
    std::string sites;
    std::string ingest_stats;
    std::string cells;
    std::string weights;
    std::string series;
    std::string features;
    std::string classes;
    std::string correlation;
    std::string table2;
    std::string table3;
    std::string evaluation;

    static RunPaths under(const std::string& out_dir);
};

std::string model_path(const PipelineConfig& cfg, const std::string& target,
                       const std::string& selector);

// Stage entry points. Each reads its predecessors' files and rewrites its own
// outputs; missing predecessor outputs raise StageError naming the stage to
// run first.
void run_gen(const PipelineConfig& cfg);
void run_ingest_stage(const PipelineConfig& cfg);
void run_tessellate(const PipelineConfig& cfg);
void run_interpolate(const PipelineConfig& cfg);
void run_features_stage(const PipelineConfig& cfg);
void run_analyze(const PipelineConfig& cfg);
std::vector<model::EvaluationReport> run_train(const PipelineConfig& cfg);
void run_explain(const PipelineConfig& cfg);
void run_report(const PipelineConfig& cfg);
void run_all(const PipelineConfig& cfg);

}  // namespace zonecast::pipeline
