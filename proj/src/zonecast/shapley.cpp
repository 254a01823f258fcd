#include <zonecast/shapley.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include <zonecast/errors.hpp>
#include <zonecast/parallel.hpp>

namespace zonecast::model {
namespace {

// Path-dependent tree attribution per Lundberg et al.'s polynomial-time
// recursion: the path records, for each unique feature met so far, the
// fraction of subsets flowing down when the feature is excluded (z, from
// training covers) or included (o), plus the permutation weight w. Entry 0 is
// the dummy root entry with feature -1.
struct PathEntry {
    int d = -1;
    double z = 1.0;
    double o = 1.0;
    double w = 1.0;
};

void extend(std::vector<PathEntry>& m, double pz, double po, int pi) {
    const std::size_t l = m.size();
    m.push_back(PathEntry{pi, pz, po, l == 0 ? 1.0 : 0.0});
    const double denom = static_cast<double>(l + 1);
    for (std::size_t i = l; i-- > 0;) {
        m[i + 1].w += po * m[i].w * static_cast<double>(i + 1) / denom;
        m[i].w = pz * m[i].w * static_cast<double>(l - i) / denom;
    }
}

void unwind(std::vector<PathEntry>& m, std::size_t u) {
    const std::size_t len = m.size();
    const double one = m[u].o;
    const double zero = m[u].z;
    double n = m[len - 1].w;
    for (std::size_t j = len - 1; j-- > 0;) {
        if (one != 0.0) {
            const double t = m[j].w;
            m[j].w = n * static_cast<double>(len) / (static_cast<double>(j + 1) * one);
            n = t - m[j].w * zero * static_cast<double>(len - 1 - j) / static_cast<double>(len);
        } else {
            m[j].w =
                m[j].w * static_cast<double>(len) / (zero * static_cast<double>(len - 1 - j));
        }
    }
    for (std::size_t j = u; j + 1 < len; ++j) {
        m[j].d = m[j + 1].d;
        m[j].z = m[j + 1].z;
        m[j].o = m[j + 1].o;
    }
    m.pop_back();
}

double unwound_sum(const std::vector<PathEntry>& m, std::size_t u) {
    std::vector<PathEntry> copy = m;
    unwind(copy, u);
    double s = 0.0;
    for (const PathEntry& e : copy)
        s += e.w;
    return s;
}

void recurse(const Tree& tree, const double* row, std::vector<double>& phi, int node_id,
             std::vector<PathEntry> m, double pz, double po, int pi) {
    extend(m, pz, po, pi);
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
    if (node.feature < 0) {
        for (std::size_t u = 1; u < m.size(); ++u)
            phi[static_cast<std::size_t>(m[u].d)] +=
                unwound_sum(m, u) * (m[u].o - m[u].z) * node.value;
        return;
    }
    const bool go_left = row[node.feature] <= node.threshold;
    const int hot = go_left ? node.left : node.right;
    const int cold = go_left ? node.right : node.left;
    double iz = 1.0;
    double io = 1.0;
    int k = -1;
    for (std::size_t u = 0; u < m.size(); ++u) {
        if (m[u].d == node.feature) {
            k = static_cast<int>(u);
            break;
        }
    }
    if (k >= 0) {
        iz = m[static_cast<std::size_t>(k)].z;
        io = m[static_cast<std::size_t>(k)].o;
        unwind(m, static_cast<std::size_t>(k));
    }
    const double r_node = node.cover;
    recurse(tree, row, phi, hot, m,
            iz * tree.nodes[static_cast<std::size_t>(hot)].cover / r_node, io, node.feature);
    recurse(tree, row, phi, cold, m,
            iz * tree.nodes[static_cast<std::size_t>(cold)].cover / r_node, 0.0, node.feature);
}

}  // namespace

Attribution tree_shapley(const BoostedEnsemble& ensemble, const double* row) {
    const std::size_t p = ensemble.feature_names.size();
    Attribution result;
    result.values.assign(p, 0.0);
    result.base_value = ensemble.base;
    std::vector<double> phi(p, 0.0);
    for (const Tree& tree : ensemble.trees) {
        result.base_value += ensemble.learning_rate * BoostedEnsemble::expected_value(tree);
        recurse(tree, row, phi, 0, {}, 1.0, 1.0, -1);
    }
    for (std::size_t j = 0; j < p; ++j)
        result.values[j] = ensemble.learning_rate * phi[j];
    return result;
}

AttributionMatrix attribute_all(const BoostedEnsemble& ensemble, const std::vector<double>& X,
                                std::size_t n, int threads) {
    const std::size_t p = ensemble.feature_names.size();
    if (X.size() != n * p)
        throw ModelError("attribution: feature matrix size does not match row count");
    AttributionMatrix out;
    out.feature_names = ensemble.feature_names;
    out.values.assign(n * p, 0.0);
    double base = ensemble.base;
    for (const Tree& tree : ensemble.trees)
        base += ensemble.learning_rate * BoostedEnsemble::expected_value(tree);
    out.base_value = base;
    parallel_for(n, threads, [&](std::size_t i) {
        std::vector<double> phi(p, 0.0);
        for (const Tree& tree : ensemble.trees)
            recurse(tree, X.data() + i * p, phi, 0, {}, 1.0, 1.0, -1);
        for (std::size_t j = 0; j < p; ++j)
            out.values[i * p + j] = ensemble.learning_rate * phi[j];
    });
    return out;
}

AttributionSummary summarize_attributions(const AttributionMatrix& attributions,
                                          const std::vector<double>& X, std::size_t n,
                                          std::size_t top_k) {
    const std::size_t p = attributions.feature_names.size();
    if (n == 0)
        throw ModelError("attribution summary needs at least one row");
    if (attributions.values.size() != n * p || X.size() != n * p)
        throw ModelError("attribution summary: matrix sizes do not match row count");

    std::vector<double> mean_abs(p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            mean_abs[j] += std::abs(attributions.values[i * p + j]);
    for (std::size_t j = 0; j < p; ++j)
        mean_abs[j] /= static_cast<double>(n);

    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (mean_abs[a] != mean_abs[b])
            return mean_abs[a] > mean_abs[b];
        return attributions.feature_names[a] < attributions.feature_names[b];
    });
    if (order.size() > top_k)
        order.resize(top_k);

    AttributionSummary summary;
    std::vector<double> column(n);
    for (const std::size_t j : order) {
        summary.top_features.push_back(attributions.feature_names[j]);
        summary.mean_abs.push_back(mean_abs[j]);
        for (std::size_t i = 0; i < n; ++i)
            column[i] = X[i * p + j];
        std::vector<double> sorted = column;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < n; ++i) {
            const double v = column[i];
            const auto lo = std::lower_bound(sorted.begin(), sorted.end(), v);
            const auto hi = std::upper_bound(lo, sorted.end(), v);
            const double less = static_cast<double>(lo - sorted.begin());
            const double equal = static_cast<double>(hi - lo);
            SummaryRecord rec;
            rec.feature = attributions.feature_names[j];
            rec.row = i;
            rec.shap_value = attributions.values[i * p + j];
            rec.feature_value = v;
            rec.value_percentile = (less + 0.5 * equal) / static_cast<double>(n) * 100.0;
            summary.records.push_back(std::move(rec));
        }
    }
    return summary;
}

}  // namespace zonecast::model
