#pragma once

#include <cstddef>
#include <vector>

namespace zonecast::model {

/// Linear model fit by ridge regression. Features are standardized
/// internally (population std; constant columns are left out of the fit and
/// get coefficient 0); `coef`/`intercept` are expressed back in raw feature
/// space, `coef_std` in the standardized space the penalty acts in.
struct RidgeModel {
    std::vector<double> coef;
    std::vector<double> coef_std;
    double intercept = 0.0;

    double predict(const double* row) const;
    std::vector<double> predict_all(const std::vector<double>& X, std::size_t n) const;
};

/// Minimizes ‖y − Xβ‖² + λ‖β‖² over the standardized design. λ = 0 with a
/// rank-deficient design resolves to the minimum-norm (pseudo-inverse)
/// solution. Uses the dual formulation when p > n, so wide feature matrices
/// cost O(n²p) rather than O(p³).
RidgeModel fit_ridge(const double* X, const double* y, std::size_t n, std::size_t p,
                     double lambda);

}  // namespace zonecast::model
