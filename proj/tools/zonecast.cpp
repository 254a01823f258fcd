#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <zonecast/errors.hpp>
#include <zonecast/pipeline.hpp>

namespace {

struct StageCommand {
    const char* name;
    const char* description;
};

constexpr StageCommand kStages[] = {
    {"gen", "generate the synthetic scenario (traffic, zones, indicators, manifest)"},
    {"ingest", "roll raw traffic up to (site, hour, category) and emit the site list"},
    {"tessellate", "build bounded Voronoi cells around sites and areal weights onto zones"},
    {"interpolate", "apportion station traffic onto zones through the areal weights"},
    {"features", "derive week signatures, usage intensity, and cumulative z-scores"},
    {"analyze", "zone classes, per-class profiles, correlation matrix, SVG charts"},
    {"train", "fit the configured model with cross-validation and save it"},
    {"explain", "per-feature attributions of the trained model"},
    {"report", "R-squared tables across feature selectors and census baseline"},
    {"all", "run every stage in order"},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zonecast: zone-level socio-economic prediction from mobile app traffic"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string selector;
    std::vector<std::string> targets;
    std::uint64_t seed = 0;
    int threads = 0;
    double percentile = 99.0;
    int tz_offset = 0;

    app.add_option("--config", config_path, "JSON config file (defaults apply without it)");
    auto* out_opt = app.add_option("--out", out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "run seed, recorded in every output");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads (0 = all cores)");
    auto* pct_opt =
        app.add_option("--percentile", percentile, "keep apps covering the top p% of traffic");
    auto* tz_opt = app.add_option("--tz-offset-hours", tz_offset,
                                  "local-time offset applied to hour-of-week slots");
    auto* sel_opt = app.add_option("--selector", selector,
                                   "feature selector: Cumulative, RCA, TWS, All, or census");
    auto* target_opt = app.add_option("--target", targets,
                                      "indicator target (repeatable) for train/explain");
    auto* shuffle_opt = app.add_flag("--shuffle-target",
                                     "permutation-null control: shuffle the target before "
                                     "splitting");
    auto* percap_opt = app.add_flag("--per-capita", "divide zone traffic by population in RCA");
    auto* nofilter_opt =
        app.add_flag("--no-percentile-filter", "disable the top-percentile app filter");

    for (const StageCommand& s : kStages)
        app.add_subcommand(s.name, s.description)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // malformed flags are configuration errors
    }

    try {
        zonecast::pipeline::PipelineConfig cfg;
        if (!config_path.empty())
            cfg = zonecast::pipeline::PipelineConfig::load(config_path);
        if (out_opt->count() > 0)
            cfg.out_dir = out_dir;
        if (seed_opt->count() > 0)
            cfg.seed = seed;
        if (threads_opt->count() > 0)
            cfg.threads = threads;
        if (pct_opt->count() > 0)
            cfg.ingest.percentile = percentile;
        if (nofilter_opt->count() > 0)
            cfg.ingest.percentile_filter = false;
        if (tz_opt->count() > 0)
            cfg.tz_offset_hours = tz_offset;
        if (sel_opt->count() > 0)
            cfg.model.selector = selector;
        if (target_opt->count() > 0)
            cfg.model.targets = targets;
        if (shuffle_opt->count() > 0)
            cfg.model.shuffle_target = true;
        if (percap_opt->count() > 0)
            cfg.features.per_capita_rca = true;
        cfg.finalize();

        const std::string stage = app.get_subcommands().front()->get_name();
        if (stage == "gen")
            zonecast::pipeline::run_gen(cfg);
        else if (stage == "ingest")
            zonecast::pipeline::run_ingest_stage(cfg);
        else if (stage == "tessellate")
            zonecast::pipeline::run_tessellate(cfg);
        else if (stage == "interpolate")
            zonecast::pipeline::run_interpolate(cfg);
        else if (stage == "features")
            zonecast::pipeline::run_features_stage(cfg);
        else if (stage == "analyze")
            zonecast::pipeline::run_analyze(cfg);
        else if (stage == "train")
            zonecast::pipeline::run_train(cfg);
        else if (stage == "explain")
            zonecast::pipeline::run_explain(cfg);
        else if (stage == "report")
            zonecast::pipeline::run_report(cfg);
        else if (stage == "all")
            zonecast::pipeline::run_all(cfg);
        return 0;
    } catch (const zonecast::ConfigurationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const zonecast::StageError& e) {
        std::cerr << "stage error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
