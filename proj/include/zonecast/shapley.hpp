#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <zonecast/gbdt.hpp>

namespace zonecast::model {

/// Exact feature attribution for one row of an ensemble: base_value is the
/// cover-weighted expected ensemble output, and values sum to
/// prediction - base_value (local accuracy).
struct Attribution {
    double base_value = 0.0;
    std::vector<double> values;  // per feature, same order as ensemble.feature_names
};

Attribution tree_shapley(const BoostedEnsemble& ensemble, const double* row);

struct AttributionMatrix {
    double base_value = 0.0;
    std::vector<std::string> feature_names;
    std::vector<double> values;  // row-major n x p
};

AttributionMatrix attribute_all(const BoostedEnsemble& ensemble, const std::vector<double>& X,
                                std::size_t n, int threads = 1);

/// One exported point of the beeswarm-style summary: the attribution a top
/// feature received on one row, with the raw feature value and its percentile
/// within the attributed rows.
struct SummaryRecord {
    std::string feature;
    std::size_t row = 0;
    double shap_value = 0.0;
    double feature_value = 0.0;
    double value_percentile = 0.0;  // 0..100
};

struct AttributionSummary {
    std::vector<std::string> top_features;  // mean |attribution| descending, feature name ascending
    std::vector<double> mean_abs;           // parallel to top_features
    std::vector<SummaryRecord> records;     // grouped by top feature, rows in order
};

AttributionSummary summarize_attributions(const AttributionMatrix& attributions,
                                          const std::vector<double>& X, std::size_t n,
                                          std::size_t top_k = 20);

}  // namespace zonecast::model
