#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <zonecast/csv.hpp>

namespace zonecast::analysis {

/// Socio-economic indicators, one row per zone. Missing cells are NaN; zones
/// with a missing value are dropped per use (class splits, regression
/// targets, correlation pairs), never imputed.
struct IndicatorTable {
    std::vector<std::string> zones;
    std::vector<std::string> columns;  // indicator names, zone_id excluded
    std::vector<double> values;        // row-major zones x columns, NaN = missing

    std::size_t ncols() const { return columns.size(); }
    double at(std::size_t row, std::size_t col) const { return values[row * ncols() + col]; }
    int column(const std::string& name) const;

    static IndicatorTable load(const std::string& path);
};

/// Zone classes from an ascending quantile split. Zones are kept sorted by id
/// so the labeling is independent of input order.
struct ClassLabels {
    std::vector<std::string> zones;
    std::vector<int> cls;  // parallel to zones, index into class_names
    std::vector<std::string> class_names;

    int class_of(const std::string& zone) const;  // -1 when the zone is unlabeled
};

/// Splits zones into k contiguous blocks of the ascending value order (ties
/// broken by zone id). When n is not divisible by k the remainder goes to the
/// lowest classes, so sizes differ by at most one.
ClassLabels quantile_classes(const std::vector<std::pair<std::string, double>>& values, int k);

/// Element-wise class means with 95% confidence half-widths (1.96 * s/sqrt(n),
/// sample standard deviation; 0 when a class has a single zone).
struct ClassMeans {
    std::vector<std::string> class_names;
    std::vector<std::string> columns;
    std::vector<double> mean;     // class-major: [c * columns.size() + j]
    std::vector<double> ci_half;  // same layout
    std::vector<std::size_t> class_sizes;
};

ClassMeans class_means(const ClassLabels& labels, const std::vector<std::string>& row_zones,
                       const std::vector<std::string>& columns,
                       const std::vector<double>& values);

/// Pairwise-deletion Pearson correlations with weak entries nulled (NaN).
struct CorrelationMatrix {
    std::vector<std::string> columns;
    std::vector<double> values;  // row-major square; NaN marks a nulled entry
    std::vector<std::string> warnings;
};

CorrelationMatrix masked_correlation(const IndicatorTable& table, double threshold);

void write_class_means(const std::string& path, const ClassMeans& means,
                       const std::string& x_label, const std::string& meta_line);
void write_correlation(const std::string& path, const CorrelationMatrix& matrix,
                       const std::string& meta_line);
void write_labels(const std::string& path, const ClassLabels& labels,
                  const std::string& meta_line);

}  // namespace zonecast::analysis
