#include <zonecast/gbdt.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <utility>
#include <vector>

#include <json.hpp>

#include <zonecast/errors.hpp>
#include <zonecast/parallel.hpp>

namespace zonecast::model {
namespace {

/// Midpoint of two consecutive candidate values, nudged so that the
/// navigation rule "value <= threshold goes left" always sends `lo` left and
/// `hi` right, even when rounding lands the midpoint on `hi`.
double split_threshold(double lo, double hi) {
    double t = std::midpoint(lo, hi);
    if (!(t < hi))
        t = lo;
    return t;
}

/// Global per-feature binning shared by every tree of a histogram-mode fit.
/// Feature j owns edges[offset[j] .. offset[j]+nedges[j]) in increasing
/// order; bin b holds values in (edges[b-1], edges[b]], so a split that keeps
/// bins 0..b on the left uses threshold edges[b].
struct BinLayout {
    std::vector<double> edges;
    std::vector<std::size_t> offset;
    std::vector<std::size_t> nedges;
    std::vector<std::size_t> hist_offset;
    std::size_t hist_size = 0;
    std::vector<std::uint8_t> bin;  // row-major n x p bin indices
};

BinLayout build_layout(const double* X, std::size_t n, std::size_t p, int max_bins) {
    BinLayout layout;
    layout.offset.resize(p);
    layout.nedges.resize(p);
    layout.hist_offset.resize(p);
    layout.bin.resize(n * p);
    const std::size_t bin_cap = static_cast<std::size_t>(max_bins);
    std::vector<double> col(n);
    std::vector<double> distinct;
    std::vector<std::size_t> cum;
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t r = 0; r < n; ++r)
            col[r] = X[r * p + j];
        std::sort(col.begin(), col.end());
        distinct.clear();
        cum.clear();
        for (std::size_t r = 0; r < n; ++r) {
            if (distinct.empty() || col[r] != distinct.back()) {
                distinct.push_back(col[r]);
                cum.push_back(r + 1);
            } else {
                cum.back() = r + 1;
            }
        }
        const std::size_t ndistinct = distinct.size();
        layout.offset[j] = layout.edges.size();
        if (ndistinct >= 2 && ndistinct <= bin_cap) {
            for (std::size_t i = 0; i + 1 < ndistinct; ++i)
                layout.edges.push_back(split_threshold(distinct[i], distinct[i + 1]));
        } else if (ndistinct > bin_cap) {
            // Equal-frequency cuts: place each of the max_bins-1 boundaries
            // after the first distinct value whose cumulative sample count
            // reaches the next quantile target, so ties never straddle a bin.
            std::size_t k = 1;
            const double per_bin = static_cast<double>(n) / static_cast<double>(bin_cap);
            for (std::size_t i = 0; i + 1 < ndistinct && k < bin_cap; ++i) {
                if (static_cast<double>(cum[i]) >= static_cast<double>(k) * per_bin) {
                    layout.edges.push_back(split_threshold(distinct[i], distinct[i + 1]));
                    while (k < bin_cap &&
                           static_cast<double>(cum[i]) >= static_cast<double>(k) * per_bin)
                        ++k;
                }
            }
        }
        layout.nedges[j] = layout.edges.size() - layout.offset[j];
    }
    std::size_t acc = 0;
    for (std::size_t j = 0; j < p; ++j) {
        layout.hist_offset[j] = acc;
        acc += layout.nedges[j] + 1;
    }
    layout.hist_size = acc;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < p; ++j) {
            const double* lo = layout.edges.data() + layout.offset[j];
            const double* hi = lo + layout.nedges[j];
            const double* it = std::lower_bound(lo, hi, X[r * p + j]);
            layout.bin[r * p + j] = static_cast<std::uint8_t>(it - lo);
        }
    }
    return layout;
}

struct SplitChoice {
    bool valid = false;
    double gain = 0.0;
    double threshold = 0.0;
    int left_bin = -1;  // highest bin index routed left (histogram mode only)
};

void build_hist(const BinLayout& layout, const std::vector<double>& residual,
                const std::vector<std::int32_t>& rows, std::size_t p, std::vector<double>& hsum,
                std::vector<std::int32_t>& hcnt) {
    hsum.assign(layout.hist_size, 0.0);
    hcnt.assign(layout.hist_size, 0);
    for (const std::int32_t r : rows) {
        const std::uint8_t* row_bins = layout.bin.data() + static_cast<std::size_t>(r) * p;
        const double g = residual[static_cast<std::size_t>(r)];
        for (std::size_t j = 0; j < p; ++j) {
            const std::size_t h = layout.hist_offset[j] + row_bins[j];
            hsum[h] += g;
            hcnt[h] += 1;
        }
    }
}

SplitChoice eval_hist_feature(const BinLayout& layout, std::size_t j,
                              const std::vector<double>& hsum,
                              const std::vector<std::int32_t>& hcnt, std::int64_t n_node,
                              double s_node, std::int64_t min_leaf) {
    SplitChoice best;
    const std::size_t nbins = layout.nedges[j] + 1;
    if (nbins < 2)
        return best;
    const std::size_t h0 = layout.hist_offset[j];
    const double parent_score = s_node * s_node / static_cast<double>(n_node);
    std::int64_t n_left = 0;
    double s_left = 0.0;
    for (std::size_t b = 0; b + 1 < nbins; ++b) {
        n_left += hcnt[h0 + b];
        s_left += hsum[h0 + b];
        const std::int64_t n_right = n_node - n_left;
        if (n_right < min_leaf)
            break;
        if (n_left < min_leaf)
            continue;
        const double s_right = s_node - s_left;
        const double gain = s_left * s_left / static_cast<double>(n_left) +
                            s_right * s_right / static_cast<double>(n_right) - parent_score;
        if (!best.valid || gain > best.gain) {
            best.valid = true;
            best.gain = gain;
            best.threshold = layout.edges[layout.offset[j] + b];
            best.left_bin = static_cast<int>(b);
        }
    }
    return best;
}

SplitChoice eval_exact_feature(const double* X, std::size_t p, std::size_t j,
                               const std::vector<double>& residual,
                               const std::vector<std::int32_t>& rows, double s_node,
                               std::int64_t min_leaf) {
    SplitChoice best;
    const std::size_t n_node = rows.size();
    std::vector<std::pair<double, double>> vals;
    vals.reserve(n_node);
    for (const std::int32_t r : rows)
        vals.emplace_back(X[static_cast<std::size_t>(r) * p + j],
                          residual[static_cast<std::size_t>(r)]);
    std::sort(vals.begin(), vals.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    const double parent_score = s_node * s_node / static_cast<double>(n_node);
    double s_left = 0.0;
    for (std::size_t i = 0; i + 1 < n_node; ++i) {
        s_left += vals[i].second;
        if (vals[i].first == vals[i + 1].first)
            continue;
        const std::int64_t n_left = static_cast<std::int64_t>(i) + 1;
        const std::int64_t n_right = static_cast<std::int64_t>(n_node) - n_left;
        if (n_left < min_leaf || n_right < min_leaf)
            continue;
        const double s_right = s_node - s_left;
        const double gain = s_left * s_left / static_cast<double>(n_left) +
                            s_right * s_right / static_cast<double>(n_right) - parent_score;
        if (!best.valid || gain > best.gain) {
            best.valid = true;
            best.gain = gain;
            best.threshold = split_threshold(vals[i].first, vals[i + 1].first);
        }
    }
    return best;
}

struct PendingNode {
    int id = 0;
    int depth = 0;
    double sum = 0.0;
    std::vector<std::int32_t> rows;
    std::vector<double> hsum;
    std::vector<std::int32_t> hcnt;
};

double sum_residuals(const std::vector<double>& residual, const std::vector<std::int32_t>& rows) {
    double s = 0.0;
    for (const std::int32_t r : rows)
        s += residual[static_cast<std::size_t>(r)];
    return s;
}

/// Grows one tree depth-first on the current residuals. Training rows are
/// routed to leaves during the build, so `pred` is advanced by eta * leaf
/// value in place. Histogram mode scans only the smaller child per split and
/// derives the larger child's histogram by subtraction from the parent's.
Tree fit_tree(const double* X, std::size_t p, const std::vector<double>& residual,
              std::vector<std::int32_t> root_rows, const GbdtParams& params,
              const BinLayout* layout, int threads, double eta, std::vector<double>& pred,
              std::vector<SplitChoice>& scratch) {
    const std::int64_t min_leaf = params.min_leaf;
    Tree tree;
    std::vector<PendingNode> stack;
    {
        PendingNode root;
        root.id = 0;
        root.depth = 0;
        root.sum = sum_residuals(residual, root_rows);
        root.rows = std::move(root_rows);
        if (layout && params.depth >= 1 &&
            static_cast<std::int64_t>(root.rows.size()) >= 2 * min_leaf)
            build_hist(*layout, residual, root.rows, p, root.hsum, root.hcnt);
        tree.nodes.emplace_back();
        stack.push_back(std::move(root));
    }
    while (!stack.empty()) {
        PendingNode nd = std::move(stack.back());
        stack.pop_back();
        const std::int64_t n_node = static_cast<std::int64_t>(nd.rows.size());
        const double n_d = static_cast<double>(n_node);
        tree.nodes[nd.id].cover = n_d;
        tree.nodes[nd.id].value = nd.sum / n_d;

        int best_feature = -1;
        SplitChoice best;
        if (nd.depth < params.depth && n_node >= 2 * min_leaf && p > 0) {
            scratch.assign(p, SplitChoice{});
            if (layout) {
                parallel_for(p, threads, [&](std::size_t j) {
                    scratch[j] =
                        eval_hist_feature(*layout, j, nd.hsum, nd.hcnt, n_node, nd.sum, min_leaf);
                });
            } else {
                parallel_for(p, threads, [&](std::size_t j) {
                    scratch[j] = eval_exact_feature(X, p, j, residual, nd.rows, nd.sum, min_leaf);
                });
            }
            // Serial reduction in ascending feature order with a strict
            // comparison: ties on gain resolve to the lowest feature index,
            // and within a feature to the lowest threshold.
            for (std::size_t j = 0; j < p; ++j) {
                if (scratch[j].valid && scratch[j].gain > 0.0 &&
                    (best_feature < 0 || scratch[j].gain > best.gain)) {
                    best = scratch[j];
                    best_feature = static_cast<int>(j);
                }
            }
        }
        if (best_feature < 0) {
            tree.nodes[nd.id].feature = -1;
            const double leaf_value = tree.nodes[nd.id].value;
            for (const std::int32_t r : nd.rows)
                pred[static_cast<std::size_t>(r)] += eta * leaf_value;
            continue;
        }

        PendingNode left_nd;
        PendingNode right_nd;
        if (layout) {
            const std::uint8_t* bins = layout->bin.data();
            const std::size_t jf = static_cast<std::size_t>(best_feature);
            for (const std::int32_t r : nd.rows) {
                if (static_cast<int>(bins[static_cast<std::size_t>(r) * p + jf]) <= best.left_bin)
                    left_nd.rows.push_back(r);
                else
                    right_nd.rows.push_back(r);
            }
        } else {
            const std::size_t jf = static_cast<std::size_t>(best_feature);
            for (const std::int32_t r : nd.rows) {
                if (X[static_cast<std::size_t>(r) * p + jf] <= best.threshold)
                    left_nd.rows.push_back(r);
                else
                    right_nd.rows.push_back(r);
            }
        }
        left_nd.sum = sum_residuals(residual, left_nd.rows);
        right_nd.sum = sum_residuals(residual, right_nd.rows);
        left_nd.depth = right_nd.depth = nd.depth + 1;
        const int left_id = static_cast<int>(tree.nodes.size());
        left_nd.id = left_id;
        right_nd.id = left_id + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        TreeNode& split_node = tree.nodes[nd.id];
        split_node.feature = best_feature;
        split_node.threshold = best.threshold;
        split_node.left = left_id;
        split_node.right = left_id + 1;

        if (layout) {
            const auto needs_hist = [&](const PendingNode& child) {
                return child.depth < params.depth &&
                       static_cast<std::int64_t>(child.rows.size()) >= 2 * min_leaf;
            };
            PendingNode& small = left_nd.rows.size() <= right_nd.rows.size() ? left_nd : right_nd;
            PendingNode& large = (&small == &left_nd) ? right_nd : left_nd;
            const bool small_needs = needs_hist(small);
            const bool large_needs = needs_hist(large);
            if (small_needs || large_needs) {
                build_hist(*layout, residual, small.rows, p, small.hsum, small.hcnt);
                if (large_needs) {
                    large.hsum = std::move(nd.hsum);
                    large.hcnt = std::move(nd.hcnt);
                    for (std::size_t h = 0; h < layout->hist_size; ++h) {
                        large.hsum[h] -= small.hsum[h];
                        large.hcnt[h] -= small.hcnt[h];
                    }
                }
                if (!small_needs) {
                    small.hsum = std::vector<double>();
                    small.hcnt = std::vector<std::int32_t>();
                }
            }
        }
        stack.push_back(std::move(right_nd));
        stack.push_back(std::move(left_nd));
    }
    return tree;
}

void validate_params(const GbdtParams& params) {
    if (params.trees < 0)
        throw ModelError("gbdt: tree count must be non-negative");
    if (params.depth < 0)
        throw ModelError("gbdt: tree depth must be non-negative");
    if (!(params.learning_rate > 0.0) || params.learning_rate > 1.0)
        throw ModelError("gbdt: learning rate must be in (0, 1]");
    if (params.min_leaf < 1)
        throw ModelError("gbdt: min rows per leaf must be at least 1");
    if (params.max_bins < 2 || params.max_bins > 255)
        throw ModelError("gbdt: max bins must be between 2 and 255");
}

}  // namespace

BoostedEnsemble fit_gbdt(const double* X, const double* y, std::size_t n, std::size_t p,
                         const GbdtParams& params, const std::vector<std::string>& feature_names,
                         int threads) {
    validate_params(params);
    if (n == 0)
        throw ModelError("gbdt: cannot fit on an empty dataset");
    if (feature_names.size() != p)
        throw ModelError("gbdt: feature name count does not match feature count");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(y[i]))
            throw ModelError("gbdt: target contains a non-finite value");
    for (std::size_t i = 0; i < n * p; ++i)
        if (!std::isfinite(X[i]))
            throw ModelError("gbdt: feature matrix contains a non-finite value");

    BoostedEnsemble ensemble;
    ensemble.params = params;
    ensemble.learning_rate = params.learning_rate;
    ensemble.feature_names = feature_names;

    double ymin = y[0];
    double ymax = y[0];
    double ysum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ymin = std::min(ymin, y[i]);
        ymax = std::max(ymax, y[i]);
        ysum += y[i];
    }
    // A constant target gets the exact constant as base score, so residuals
    // are exactly zero rather than mean-rounding noise.
    ensemble.base = ymin == ymax ? ymin : ysum / static_cast<double>(n);

    const bool use_hist =
        p > 0 && params.histogram_threshold >= 0 &&
        n >= static_cast<std::size_t>(std::max(params.histogram_threshold, 0));
    BinLayout layout;
    if (use_hist)
        layout = build_layout(X, n, p, params.max_bins);

    std::vector<double> pred(n, ensemble.base);
    std::vector<double> residual(n);
    std::vector<std::int32_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0);
    std::vector<SplitChoice> scratch;

    for (int t = 0; t < params.trees; ++t) {
        for (std::size_t i = 0; i < n; ++i)
            residual[i] = y[i] - pred[i];
        Tree tree = fit_tree(X, p, residual, all_rows, params, use_hist ? &layout : nullptr,
                             threads, ensemble.learning_rate, pred, scratch);
        const bool stalled = tree.nodes.size() == 1;
        ensemble.trees.push_back(std::move(tree));
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = y[i] - pred[i];
            sq += d * d;
        }
        ensemble.train_mse.push_back(sq / static_cast<double>(n));
        // Split gains are between-group variances, invariant to the constant
        // residual shift a single-leaf round applies — so once the root
        // cannot split, no later round can either.
        if (stalled)
            break;
    }
    return ensemble;
}

double BoostedEnsemble::predict_row(const double* row) const {
    double out = base;
    for (const Tree& tree : trees) {
        const TreeNode* nodes = tree.nodes.data();
        int i = 0;
        while (nodes[i].feature >= 0)
            i = row[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
        out += learning_rate * nodes[i].value;
    }
    return out;
}

std::vector<double> BoostedEnsemble::predict_all(const std::vector<double>& X,
                                                 std::size_t n) const {
    const std::size_t p = feature_names.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = predict_row(X.data() + i * p);
    return out;
}

double BoostedEnsemble::expected_value(const Tree& tree) {
    if (tree.nodes.empty())
        return 0.0;
    double acc = 0.0;
    for (const TreeNode& node : tree.nodes)
        if (node.feature < 0)
            acc += node.value * node.cover;
    const double root_cover = tree.nodes[0].cover;
    return root_cover > 0.0 ? acc / root_cover : 0.0;
}

void save_ensemble(const std::string& path, const BoostedEnsemble& ensemble,
                   const std::vector<std::pair<std::string, std::string>>& meta) {
    nlohmann::ordered_json doc;
    nlohmann::ordered_json m = nlohmann::ordered_json::object();
    for (const auto& [key, value] : meta)
        m[key] = value;
    doc["_meta"] = std::move(m);
    doc["kind"] = "gbdt";
    doc["split_rule"] = "feature value <= threshold goes left; feature -1 marks a leaf";
    doc["base"] = ensemble.base;
    doc["learning_rate"] = ensemble.learning_rate;
    doc["params"] = {{"trees", ensemble.params.trees},
                     {"depth", ensemble.params.depth},
                     {"learning_rate", ensemble.params.learning_rate},
                     {"min_leaf", ensemble.params.min_leaf},
                     {"seed", ensemble.params.seed},
                     {"histogram_threshold", ensemble.params.histogram_threshold},
                     {"max_bins", ensemble.params.max_bins}};
    doc["feature_names"] = ensemble.feature_names;
    doc["train_mse"] = ensemble.train_mse;
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const Tree& tree : ensemble.trees) {
        nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
        for (const TreeNode& node : tree.nodes) {
            nodes.push_back({{"feature", node.feature},
                             {"threshold", node.threshold},
                             {"left", node.left},
                             {"right", node.right},
                             {"value", node.value},
                             {"cover", node.cover}});
        }
        trees.push_back({{"nodes", std::move(nodes)}});
    }
    doc["trees"] = std::move(trees);

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw FormatError("cannot open model file for writing: " + path);
    out << doc.dump(1, '\t') << '\n';
    if (!out)
        throw FormatError("failed while writing model file: " + path);
}

BoostedEnsemble load_ensemble(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open model file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("model file " + path + " is not valid JSON: " + e.what());
    }
    try {
        BoostedEnsemble ensemble;
        if (doc.at("kind").get<std::string>() != "gbdt")
            throw FormatError("model file " + path + " is not a gbdt dump");
        ensemble.base = doc.at("base").get<double>();
        ensemble.learning_rate = doc.at("learning_rate").get<double>();
        const auto& params = doc.at("params");
        ensemble.params.trees = params.at("trees").get<int>();
        ensemble.params.depth = params.at("depth").get<int>();
        ensemble.params.learning_rate = params.at("learning_rate").get<double>();
        ensemble.params.min_leaf = params.at("min_leaf").get<int>();
        ensemble.params.seed = params.at("seed").get<std::uint64_t>();
        ensemble.params.histogram_threshold = params.at("histogram_threshold").get<int>();
        ensemble.params.max_bins = params.at("max_bins").get<int>();
        ensemble.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
        ensemble.train_mse = doc.at("train_mse").get<std::vector<double>>();
        const int p = static_cast<int>(ensemble.feature_names.size());
        for (const auto& jtree : doc.at("trees")) {
            Tree tree;
            for (const auto& jnode : jtree.at("nodes")) {
                TreeNode node;
                node.feature = jnode.at("feature").get<int>();
                node.threshold = jnode.at("threshold").get<double>();
                node.left = jnode.at("left").get<int>();
                node.right = jnode.at("right").get<int>();
                node.value = jnode.at("value").get<double>();
                node.cover = jnode.at("cover").get<double>();
                tree.nodes.push_back(node);
            }
            const int nnodes = static_cast<int>(tree.nodes.size());
            if (nnodes == 0)
                throw FormatError("model file " + path + " contains an empty tree");
            for (const TreeNode& node : tree.nodes) {
                if (node.feature >= 0) {
                    if (node.feature >= p || node.left < 0 || node.left >= nnodes ||
                        node.right < 0 || node.right >= nnodes)
                        throw FormatError("model file " + path +
                                          " contains an out-of-range node reference");
                } else if (node.left != -1 || node.right != -1) {
                    throw FormatError("model file " + path + " contains a leaf with children");
                }
            }
            ensemble.trees.push_back(std::move(tree));
        }
        return ensemble;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("model file " + path + " has an invalid layout: " + e.what());
    }
}

}  // namespace zonecast::model
