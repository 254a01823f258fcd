#include <zonecast/analysis.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <zonecast/errors.hpp>

namespace zonecast::analysis {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_count_column(const std::string& name) {
    return name == "total_pop" || name.rfind("pop_", 0) == 0;
}

void check_range(const std::string& path, const std::string& zone, const std::string& column,
                 double v) {
    if (std::isnan(v))
        return;
    if (column == "gini" && (v < 0.0 || v > 1.0))
        throw FormatError(path + ": zone " + zone + " has gini " + csv::fmt_double(v) +
                          " outside [0, 1]");
    if (column == "poverty" && (v < 0.0 || v > 100.0))
        throw FormatError(path + ": zone " + zone + " has poverty " + csv::fmt_double(v) +
                          " outside [0, 100]");
    if (is_count_column(column) && v < 0.0)
        throw FormatError(path + ": zone " + zone + " has negative count in column " + column);
}

}  // namespace

int IndicatorTable::column(const std::string& name) const {
    for (std::size_t j = 0; j < columns.size(); ++j)
        if (columns[j] == name)
            return static_cast<int>(j);
    return -1;
}

IndicatorTable IndicatorTable::load(const std::string& path) {
    csv::Reader reader(path);
    const auto& header = reader.header();
    if (header.empty() || header[0] != "zone_id")
        throw FormatError(path + ": first indicator column must be zone_id");
    IndicatorTable table;
    table.columns.assign(header.begin() + 1, header.end());
    std::set<std::string> column_check(table.columns.begin(), table.columns.end());
    if (column_check.size() != table.columns.size())
        throw FormatError(path + ": duplicate indicator column name");
    if (table.columns.empty())
        throw FormatError(path + ": no indicator columns");

    std::set<std::string> seen;
    std::vector<std::string_view> fields;
    while (reader.next(fields)) {
        if (fields.size() != header.size())
            throw FormatError(path + ": row " + std::to_string(reader.data_lines_read()) +
                              " has " + std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(header.size()));
        std::string zone(fields[0]);
        if (zone.empty())
            throw FormatError(path + ": empty zone_id");
        if (!seen.insert(zone).second)
            throw FormatError(path + ": duplicate zone_id " + zone);
        table.zones.push_back(zone);
        for (std::size_t j = 1; j < fields.size(); ++j) {
            double v = kNaN;
            if (!fields[j].empty()) {
                const auto parsed = csv::parse_double(fields[j]);
                if (!parsed || std::isnan(*parsed))
                    throw FormatError(path + ": zone " + zone + " column " + header[j] +
                                      " is not numeric");
                v = *parsed;
            }
            check_range(path, zone, header[j], v);
            table.values.push_back(v);
        }
    }
    if (table.zones.empty())
        throw FormatError(path + ": no indicator rows");
    return table;
}

int ClassLabels::class_of(const std::string& zone) const {
    const auto it = std::lower_bound(zones.begin(), zones.end(), zone);
    if (it == zones.end() || *it != zone)
        return -1;
    return cls[static_cast<std::size_t>(it - zones.begin())];
}

ClassLabels quantile_classes(const std::vector<std::pair<std::string, double>>& values, int k) {
    if (k < 2)
        throw ConfigurationError("quantile split needs at least 2 classes, got " +
                                 std::to_string(k));
    const std::size_t n = values.size();
    if (n < static_cast<std::size_t>(k))
        throw AnalysisError("quantile split into " + std::to_string(k) + " classes needs at least " +
                            std::to_string(k) + " zones, got " + std::to_string(n));
    for (const auto& [zone, v] : values)
        if (std::isnan(v))
            throw AnalysisError("quantile split received a missing value for zone " + zone);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (values[a].second != values[b].second)
            return values[a].second < values[b].second;
        return values[a].first < values[b].first;
    });

    // n = q*k + r: the lowest r classes take q+1 zones each.
    const std::size_t q = n / static_cast<std::size_t>(k);
    const std::size_t r = n % static_cast<std::size_t>(k);
    std::vector<int> cls_by_input(n, 0);
    std::size_t pos = 0;
    for (int c = 0; c < k; ++c) {
        const std::size_t size = q + (static_cast<std::size_t>(c) < r ? 1 : 0);
        for (std::size_t i = 0; i < size; ++i)
            cls_by_input[order[pos++]] = c;
    }

    ClassLabels labels;
    if (k == 3) {
        labels.class_names = {"Low", "Medium", "High"};
    } else {
        for (int c = 1; c <= k; ++c)
            labels.class_names.push_back("Q" + std::to_string(c));
    }
    std::vector<std::size_t> zone_order(n);
    for (std::size_t i = 0; i < n; ++i)
        zone_order[i] = i;
    std::sort(zone_order.begin(), zone_order.end(),
              [&](std::size_t a, std::size_t b) { return values[a].first < values[b].first; });
    for (const std::size_t i : zone_order) {
        if (!labels.zones.empty() && labels.zones.back() == values[i].first)
            throw AnalysisError("quantile split received duplicate zone " + values[i].first);
        labels.zones.push_back(values[i].first);
        labels.cls.push_back(cls_by_input[i]);
    }
    return labels;
}

ClassMeans class_means(const ClassLabels& labels, const std::vector<std::string>& row_zones,
                       const std::vector<std::string>& columns,
                       const std::vector<double>& values) {
    const std::size_t ncols = columns.size();
    if (values.size() != row_zones.size() * ncols)
        throw AnalysisError("class means: value matrix does not match zones x columns");
    const std::size_t nclasses = labels.class_names.size();

    std::vector<std::vector<std::size_t>> members(nclasses);
    for (std::size_t i = 0; i < row_zones.size(); ++i) {
        const int c = labels.class_of(row_zones[i]);
        if (c >= 0)
            members[static_cast<std::size_t>(c)].push_back(i);
    }
    for (std::size_t c = 0; c < nclasses; ++c)
        if (members[c].empty())
            throw AnalysisError("class " + labels.class_names[c] +
                                " has no zones in the supplied matrix");

    ClassMeans out;
    out.class_names = labels.class_names;
    out.columns = columns;
    out.mean.assign(nclasses * ncols, 0.0);
    out.ci_half.assign(nclasses * ncols, 0.0);
    for (std::size_t c = 0; c < nclasses; ++c) {
        const auto& rows = members[c];
        const double n = static_cast<double>(rows.size());
        out.class_sizes.push_back(rows.size());
        for (std::size_t j = 0; j < ncols; ++j) {
            double sum = 0.0;
            for (const std::size_t i : rows)
                sum += values[i * ncols + j];
            const double mean = sum / n;
            double half = 0.0;
            if (rows.size() > 1) {
                double sq = 0.0;
                for (const std::size_t i : rows) {
                    const double d = values[i * ncols + j] - mean;
                    sq += d * d;
                }
                const double sd = std::sqrt(sq / (n - 1.0));
                half = 1.96 * sd / std::sqrt(n);
            }
            out.mean[c * ncols + j] = mean;
            out.ci_half[c * ncols + j] = half;
        }
    }
    return out;
}

CorrelationMatrix masked_correlation(const IndicatorTable& table, double threshold) {
    if (threshold < 0.0 || threshold > 1.0)
        throw ConfigurationError("correlation mask threshold must be in [0, 1], got " +
                                 csv::fmt_double(threshold));
    const std::size_t p = table.ncols();
    const std::size_t n = table.zones.size();
    CorrelationMatrix out;
    out.columns = table.columns;
    out.values.assign(p * p, kNaN);

    // Columns that are constant across their own non-missing rows cannot
    // carry correlation; their whole row/column stays null.
    std::vector<bool> degenerate(p, false);
    for (std::size_t j = 0; j < p; ++j) {
        double lo = kNaN;
        double hi = kNaN;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = table.at(i, j);
            if (std::isnan(v))
                continue;
            if (std::isnan(lo) || v < lo)
                lo = v;
            if (std::isnan(hi) || v > hi)
                hi = v;
        }
        if (std::isnan(lo) || lo == hi) {
            degenerate[j] = true;
            out.warnings.push_back("column " + table.columns[j] +
                                   " has no variance; correlations nulled");
        }
    }

    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = a + 1; b < p; ++b) {
            if (degenerate[a] || degenerate[b])
                continue;
            double sx = 0.0;
            double sy = 0.0;
            std::size_t m = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double x = table.at(i, a);
                const double y = table.at(i, b);
                if (std::isnan(x) || std::isnan(y))
                    continue;
                sx += x;
                sy += y;
                ++m;
            }
            if (m < 3) {
                out.warnings.push_back("pair (" + table.columns[a] + ", " + table.columns[b] +
                                       ") has fewer than 3 complete rows; nulled");
                continue;
            }
            const double mx = sx / static_cast<double>(m);
            const double my = sy / static_cast<double>(m);
            double sxy = 0.0;
            double sxx = 0.0;
            double syy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double x = table.at(i, a);
                const double y = table.at(i, b);
                if (std::isnan(x) || std::isnan(y))
                    continue;
                sxy += (x - mx) * (y - my);
                sxx += (x - mx) * (x - mx);
                syy += (y - my) * (y - my);
            }
            if (sxx <= 0.0 || syy <= 0.0) {
                out.warnings.push_back("pair (" + table.columns[a] + ", " + table.columns[b] +
                                       ") is constant on its complete rows; nulled");
                continue;
            }
            const double r = sxy / std::sqrt(sxx * syy);
            if (std::abs(r) >= threshold) {
                out.values[a * p + b] = r;
                out.values[b * p + a] = r;
            }
        }
    }
    for (std::size_t j = 0; j < p; ++j)
        out.values[j * p + j] = 1.0;
    return out;
}

void write_class_means(const std::string& path, const ClassMeans& means,
                       const std::string& x_label, const std::string& meta_line) {
    csv::Writer writer(path, meta_line, "class," + x_label + ",mean,ci");
    const std::size_t ncols = means.columns.size();
    for (std::size_t c = 0; c < means.class_names.size(); ++c) {
        for (std::size_t j = 0; j < ncols; ++j) {
            std::string line = means.class_names[c];
            line += ',';
            line += means.columns[j];
            line += ',';
            line += csv::fmt_double(means.mean[c * ncols + j]);
            line += ',';
            line += csv::fmt_double(means.ci_half[c * ncols + j]);
            writer.write_line(line);
        }
    }
    writer.close();
}

void write_correlation(const std::string& path, const CorrelationMatrix& matrix,
                       const std::string& meta_line) {
    std::string header = "column";
    for (const std::string& c : matrix.columns)
        header += "," + c;
    csv::Writer writer(path, meta_line, header);
    const std::size_t p = matrix.columns.size();
    for (std::size_t a = 0; a < p; ++a) {
        std::string line = matrix.columns[a];
        for (std::size_t b = 0; b < p; ++b) {
            line += ',';
            const double v = matrix.values[a * p + b];
            if (!std::isnan(v))
                line += csv::fmt_double(v);
        }
        writer.write_line(line);
    }
    writer.close();
}

void write_labels(const std::string& path, const ClassLabels& labels,
                  const std::string& meta_line) {
    csv::Writer writer(path, meta_line, "zone_id,class");
    for (std::size_t i = 0; i < labels.zones.size(); ++i)
        writer.write_line(labels.zones[i] + "," +
                          labels.class_names[static_cast<std::size_t>(labels.cls[i])]);
    writer.close();
}

}  // namespace zonecast::analysis
