#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include <zonecast/errors.hpp>
#include <zonecast/ridge.hpp>
#include <zonecast/rng.hpp>

using namespace zonecast;

namespace {

// Independent dense linear solve (Gauss elimination with partial pivoting).
std::vector<double> solve_dense(std::vector<std::vector<double>> A, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col]))
                piv = r;
        std::swap(A[col], A[piv]);
        std::swap(b[col], b[piv]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col)
                continue;
            const double f = A[r][col] / A[col][col];
            for (std::size_t c = col; c < n; ++c)
                A[r][c] -= f * A[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = b[i] / A[i][i];
    return x;
}

// Oracle predictions from the normal equations on the standardized design,
// mirroring the documented model: center every column, scale by population
// std, center y, solve (Z'Z + lambda I) beta = Z'y, predict ybar + Z beta.
std::vector<double> oracle_predictions(const std::vector<double>& X, const std::vector<double>& y,
                                       std::size_t n, std::size_t p, double lambda) {
    std::vector<double> mean(p, 0.0), scale(p, 1.0);
    for (std::size_t j = 0; j < p; ++j) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i)
            s += X[i * p + j];
        mean[j] = s / static_cast<double>(n);
        double ss = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = X[i * p + j] - mean[j];
            ss += d * d;
        }
        scale[j] = std::sqrt(ss / static_cast<double>(n));
    }
    std::vector<double> Z(n * p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            Z[i * p + j] = (X[i * p + j] - mean[j]) / scale[j];
    double ybar = 0;
    for (std::size_t i = 0; i < n; ++i)
        ybar += y[i];
    ybar /= static_cast<double>(n);

    std::vector<std::vector<double>> A(p, std::vector<double>(p, 0.0));
    std::vector<double> b(p, 0.0);
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t c = 0; c < p; ++c)
            for (std::size_t i = 0; i < n; ++i)
                A[a][c] += Z[i * p + a] * Z[i * p + c];
        A[a][a] += lambda;
        for (std::size_t i = 0; i < n; ++i)
            b[a] += Z[i * p + a] * (y[i] - ybar);
    }
    const auto beta = solve_dense(A, b);
    std::vector<double> pred(n, ybar);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            pred[i] += beta[j] * Z[i * p + j];
    return pred;
}

}  // namespace

TEST_CASE("unpenalized ridge recovers an exact linear relation") {
    std::vector<double> X, y;
    for (int i = 0; i < 20; ++i) {
        X.push_back(static_cast<double>(i));
        y.push_back(2.0 * i + 1.0);
    }
    const auto m = model::fit_ridge(X.data(), y.data(), 20, 1, 0.0);
    CHECK(m.coef[0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(m.intercept == doctest::Approx(1.0).epsilon(1e-10));
    const auto pred = m.predict_all(X, 20);
    for (int i = 0; i < 20; ++i)
        CHECK(pred[i] == doctest::Approx(y[i]).epsilon(1e-10));
}

TEST_CASE("ridge predictions match the normal-equations oracle") {
    Rng rng(12);
    const std::size_t n = 40, p = 6;
    std::vector<double> X(n * p), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j)
            X[i * p + j] = rng.uniform_in(-3.0, 3.0) * (j + 1.0);
        y[i] = 5.0 + 2.0 * X[i * p] - 1.5 * X[i * p + 3] + rng.normal();
    }
    for (const double lambda : {0.0, 0.5, 3.0, 25.0}) {
        const auto m = model::fit_ridge(X.data(), y.data(), n, p, lambda);
        const auto want = oracle_predictions(X, y, n, p, lambda);
        const auto got = m.predict_all(X, n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-8));
    }
}

TEST_CASE("standardized coefficient norm shrinks monotonically in lambda") {
    Rng rng(3);
    const std::size_t n = 30, p = 5;
    std::vector<double> X(n * p), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j)
            X[i * p + j] = rng.normal();
        y[i] = X[i * p] - X[i * p + 2] + 0.3 * rng.normal();
    }
    double prev = 1e300;
    for (const double lambda : {0.0, 0.1, 1.0, 10.0, 100.0, 1000.0}) {
        const auto m = model::fit_ridge(X.data(), y.data(), n, p, lambda);
        double norm = 0;
        for (const double c : m.coef_std)
            norm += c * c;
        CHECK(norm <= prev + 1e-12);
        prev = norm;
    }

    // Extreme penalty: prediction collapses to the target mean.
    const auto flat = model::fit_ridge(X.data(), y.data(), n, p, 1e12);
    double ybar = 0;
    for (const double v : y)
        ybar += v;
    ybar /= static_cast<double>(n);
    const auto pred = flat.predict_all(X, n);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(pred[i] == doctest::Approx(ybar).epsilon(1e-6));
}

TEST_CASE("wide designs interpolate through the dual path") {
    Rng rng(8);
    const std::size_t n = 5, p = 12;
    std::vector<double> X(n * p), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j)
            X[i * p + j] = rng.normal();
        y[i] = rng.uniform_in(-10.0, 10.0);
    }
    const auto m = model::fit_ridge(X.data(), y.data(), n, p, 0.0);
    const auto pred = m.predict_all(X, n);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(pred[i] == doctest::Approx(y[i]).epsilon(1e-6));
}

TEST_CASE("rank-deficient design resolves to the symmetric minimum-norm fit") {
    // Two identical columns: the pseudo-inverse splits the weight evenly.
    Rng rng(5);
    const std::size_t n = 25, p = 2;
    std::vector<double> X(n * p), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = rng.normal();
        X[i * p] = v;
        X[i * p + 1] = v;
        y[i] = 3.0 * v + 0.5;
    }
    const auto m = model::fit_ridge(X.data(), y.data(), n, p, 0.0);
    CHECK(m.coef_std[0] == doctest::Approx(m.coef_std[1]).epsilon(1e-9));
    const auto pred = m.predict_all(X, n);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(pred[i] == doctest::Approx(y[i]).epsilon(1e-8));
}

TEST_CASE("constant columns get coefficient zero and do not disturb the fit") {
    Rng rng(6);
    const std::size_t n = 30, p = 3;
    std::vector<double> X(n * p), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        X[i * p] = rng.normal();
        X[i * p + 1] = 7.0;  // constant
        X[i * p + 2] = rng.normal();
        y[i] = 2.0 * X[i * p] - X[i * p + 2];
    }
    const auto m = model::fit_ridge(X.data(), y.data(), n, p, 0.0);
    CHECK(m.coef[1] == 0.0);
    CHECK(m.coef_std[1] == 0.0);
    const auto pred = m.predict_all(X, n);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(pred[i] == doctest::Approx(y[i]).epsilon(1e-8));

    // All-constant design: intercept-only model predicting the mean.
    std::vector<double> Xc(n, 1.0);
    const auto mc = model::fit_ridge(Xc.data(), y.data(), n, 1, 1.0);
    double ybar = 0;
    for (const double v : y)
        ybar += v;
    ybar /= static_cast<double>(n);
    CHECK(mc.intercept == doctest::Approx(ybar).epsilon(1e-12));
    CHECK(mc.coef[0] == 0.0);
}

TEST_CASE("negative lambda is rejected") {
    std::vector<double> X = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<double> y = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK_THROWS_AS(model::fit_ridge(X.data(), y.data(), 10, 1, -0.5), ModelError);
}
