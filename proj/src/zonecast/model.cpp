#include "zonecast/model.hpp"

#include <numeric>

#include "zonecast/errors.hpp"
#include "zonecast/rng.hpp"

namespace zonecast::model {

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.feature_names = feature_names;
    const std::size_t pp = p();
    out.X.reserve(indices.size() * pp);
    out.y.reserve(indices.size());
    out.row_keys.reserve(indices.size());
    for (const std::size_t i : indices) {
        out.row_keys.push_back(row_keys[i]);
        out.y.push_back(y[i]);
        out.X.insert(out.X.end(), X.begin() + static_cast<std::ptrdiff_t>(i * pp),
                     X.begin() + static_cast<std::ptrdiff_t>((i + 1) * pp));
    }
    return out;
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i)
        std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    return idx;
}

}  // namespace

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            double train_ratio,
                                                                            std::uint64_t seed) {
    if (n < 10)
        throw ModelError("split needs at least 10 rows, got " + std::to_string(n));
    if (!(train_ratio > 0.0) || !(train_ratio < 1.0))
        throw ModelError("train ratio must lie strictly between 0 and 1");
    const auto idx = shuffled_indices(n, seed);
    const std::size_t n_train = static_cast<std::size_t>(train_ratio * static_cast<double>(n));
    std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    if (train.empty() || test.empty())
        throw ModelError("split ratio leaves an empty side");
    return {std::move(train), std::move(test)};
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2)
        throw ModelError("k-fold needs k >= 2, got " + std::to_string(k));
    if (n < static_cast<std::size_t>(k))
        throw ModelError("k-fold needs at least k rows, got " + std::to_string(n) + " for k=" +
                         std::to_string(k));
    const auto idx = shuffled_indices(n, seed);
    const std::size_t q = n / static_cast<std::size_t>(k);
    const std::size_t r = n % static_cast<std::size_t>(k);
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    std::size_t pos = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const std::size_t size = q + (f < r ? 1 : 0);
        folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                        idx.begin() + static_cast<std::ptrdiff_t>(pos + size));
        pos += size;
    }
    return folds;
}

double r_squared(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
    if (y_true.size() != y_pred.size())
        throw ModelError("r_squared: size mismatch");
    const std::size_t n = y_true.size();
    if (n < 2)
        throw ModelError("r_squared needs at least 2 rows, got " + std::to_string(n));
    double mean = 0.0;
    for (const double v : y_true)
        mean += v;
    mean /= static_cast<double>(n);
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dt = y_true[i] - mean;
        const double dr = y_true[i] - y_pred[i];
        ss_tot += dt * dt;
        ss_res += dr * dr;
    }
    if (ss_tot <= 0.0)
        throw ModelError("r_squared undefined: zero-variance truth");
    return 1.0 - ss_res / ss_tot;
}

}  // namespace zonecast::model
