#include "zonecast/ridge.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "zonecast/errors.hpp"

namespace zonecast::model {

double RidgeModel::predict(const double* row) const {
    double acc = intercept;
    for (std::size_t j = 0; j < coef.size(); ++j)
        acc += coef[j] * row[j];
    return acc;
}

std::vector<double> RidgeModel::predict_all(const std::vector<double>& X, std::size_t n) const {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = predict(X.data() + i * coef.size());
    return out;
}

namespace {

// Minimum-norm solve of (A + λI) x = b for symmetric PSD A. With λ > 0 the
// matrix is definite and an LDLT factorization suffices; at λ = 0 a possibly
// singular A goes through an eigendecomposition with small eigenvalues
// dropped, which is exactly the pseudo-inverse convention.
Eigen::VectorXd solve_psd(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double lambda) {
    if (lambda > 0.0) {
        Eigen::MatrixXd M = A;
        M.diagonal().array() += lambda;
        return M.ldlt().solve(b);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
    const Eigen::VectorXd& d = eig.eigenvalues();
    const double tol = d.size() > 0 ? 1e-12 * std::max(1.0, d.cwiseAbs().maxCoeff()) : 0.0;
    Eigen::VectorXd proj = eig.eigenvectors().transpose() * b;
    for (Eigen::Index i = 0; i < d.size(); ++i)
        proj[i] = d[i] > tol ? proj[i] / d[i] : 0.0;
    return eig.eigenvectors() * proj;
}

}  // namespace

RidgeModel fit_ridge(const double* X, const double* y, std::size_t n, std::size_t p,
                     double lambda) {
    if (n == 0 || p == 0)
        throw ModelError("ridge fit needs at least one row and one feature");
    if (lambda < 0.0)
        throw ModelError("ridge lambda must be non-negative");

    // Standardize: center all columns, scale the non-constant ones.
    std::vector<double> mean(p, 0.0), scale(p, 1.0);
    std::vector<char> active(p, 1);
    for (std::size_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += X[i * p + j];
        mean[j] = s / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = X[i * p + j] - mean[j];
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n));
        if (sd <= 1e-12 * std::max(1.0, std::abs(mean[j]))) {
            active[j] = 0;  // constant column: no information, coefficient 0
        } else {
            scale[j] = sd;
        }
    }
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < p; ++j)
        if (active[j])
            cols.push_back(j);

    double y_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        y_mean += y[i];
    y_mean /= static_cast<double>(n);

    RidgeModel modelout;
    modelout.coef.assign(p, 0.0);
    modelout.coef_std.assign(p, 0.0);
    modelout.intercept = y_mean;
    if (cols.empty())
        return modelout;

    const std::size_t pa = cols.size();
    Eigen::MatrixXd Z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pa));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < pa; ++k)
            Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                (X[i * p + cols[k]] - mean[cols[k]]) / scale[cols[k]];
    Eigen::VectorXd yc(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        yc[static_cast<Eigen::Index>(i)] = y[i] - y_mean;

    Eigen::VectorXd beta;
    if (pa <= n) {
        beta = solve_psd(Z.transpose() * Z, Z.transpose() * yc, lambda);
    } else {
        // Dual form: (ZZᵀ + λI) α = y, β = Zᵀ α. Identical minimizer, and the
        // λ = 0 pseudo-inverse route yields the minimum-norm coefficients.
        const Eigen::VectorXd alpha = solve_psd(Z * Z.transpose(), yc, lambda);
        beta = Z.transpose() * alpha;
    }

    for (std::size_t k = 0; k < pa; ++k) {
        const std::size_t j = cols[k];
        modelout.coef_std[j] = beta[static_cast<Eigen::Index>(k)];
        modelout.coef[j] = beta[static_cast<Eigen::Index>(k)] / scale[j];
    }
    double adjust = 0.0;
    for (std::size_t j = 0; j < p; ++j)
        adjust += modelout.coef[j] * mean[j];
    modelout.intercept = y_mean - adjust;
    return modelout;
}

}  // namespace zonecast::model
