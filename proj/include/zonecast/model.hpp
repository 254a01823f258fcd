#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace zonecast::model {

/// Rows aligned across X (row-major), y, and row_keys.
struct Dataset {
    std::vector<std::string> row_keys;
    std::vector<std::string> feature_names;
    std::vector<double> X;
    std::vector<double> y;

    std::size_t n() const { return y.size(); }
    std::size_t p() const { return feature_names.size(); }
    const double* row(std::size_t i) const { return X.data() + i * p(); }

    Dataset subset(const std::vector<std::size_t>& indices) const;
};

/// Deterministic 80:20-style split: Fisher-Yates shuffle under `seed`, first
/// floor(ratio*n) rows train. Throws ModelError when n < 10.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            double train_ratio,
                                                                            std::uint64_t seed);

/// K disjoint folds over [0, n): shuffled, sizes differing by at most one,
/// remainder going to the first folds. Throws ModelError when n < k.
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, int k, std::uint64_t seed);

/// 1 - SS_res/SS_tot. Throws ModelError for fewer than 2 rows or zero-variance
/// truth.
double r_squared(const std::vector<double>& y_true, const std::vector<double>& y_pred);

struct EvaluationReport {
    std::string target;
    std::string selector;
    std::string model_kind;
    std::uint64_t seed = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::size_t n_features = 0;
    std::vector<double> fold_r2;  // empty when CV skipped
    double train_r2 = 0.0;
    double test_r2 = 0.0;
};

}  // namespace zonecast::model
