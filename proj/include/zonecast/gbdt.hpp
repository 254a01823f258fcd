#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace zonecast::model {

struct GbdtParams {
    int trees = 300;
    int depth = 6;
    double learning_rate = 0.1;
    int min_leaf = 5;
    std::uint64_t seed = 0;  // recorded for provenance; the fit itself is exhaustive, not sampled
    /// Training sets with at least this many rows use histogram split finding;
    /// smaller ones use exact greedy search over sorted unique thresholds.
    int histogram_threshold = 256;
    int max_bins = 255;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf value before learning-rate scaling
    double cover = 0.0;  // training rows routed through this node
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
};

/// Squared-loss boosted trees: each round fits a depth-limited regression
/// tree to the current residuals with greedy variance-reduction splits, and
/// predictions advance by learning_rate times the leaf means.
struct BoostedEnsemble {
    double base = 0.0;  // train-target mean
    double learning_rate = 0.1;
    GbdtParams params;
    std::vector<std::string> feature_names;
    std::vector<Tree> trees;
    std::vector<double> train_mse;  // per boosting round

    double predict_row(const double* row) const;
    std::vector<double> predict_all(const std::vector<double>& X, std::size_t n) const;
    /// Cover-weighted mean leaf value — the tree's output for a row about
    /// which nothing is known.
    static double expected_value(const Tree& tree);
};

BoostedEnsemble fit_gbdt(const double* X, const double* y, std::size_t n, std::size_t p,
                         const GbdtParams& params, const std::vector<std::string>& feature_names,
                         int threads = 1);

/// JSON round-trip of the full ensemble (feature names, thresholds, leaf
/// values, covers, base score, learning rate).
void save_ensemble(const std::string& path, const BoostedEnsemble& ensemble,
                   const std::vector<std::pair<std::string, std::string>>& meta);
BoostedEnsemble load_ensemble(const std::string& path);

}  // namespace zonecast::model
