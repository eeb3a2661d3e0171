#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "common.hpp"

// Derivative-free minimization (Nelder-Mead) and small least-squares
// helpers shared by the fitting code.

namespace mzlab {

struct nm_result {
    std::vector<double> x;
    double f = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

// Standard Nelder-Mead with reflection 1, expansion 2, contraction 1/2,
// shrink 1/2. The initial simplex perturbs each coordinate by
// max(0.25, 0.25|x_i|).
template <typename F>
nm_result nelder_mead(F&& f, std::vector<double> x0, double xatol = 1e-10,
                      double fatol = 1e-14, std::size_t maxiter = 4000) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> simplex(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i)
        simplex[i + 1][i] += std::max(0.25, 0.25 * std::fabs(x0[i]));
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = f(simplex[i]);

    std::vector<std::size_t> order(n + 1);
    nm_result res;
    for (res.iterations = 0; res.iterations < maxiter; ++res.iterations) {
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });

        double xspread = 0.0;
        for (std::size_t i = 1; i <= n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                xspread = std::max(xspread,
                                   std::fabs(simplex[order[i]][j] - simplex[order[0]][j]));
        if (xspread < xatol && std::fabs(fv[order[n]] - fv[order[0]]) < fatol) {
            res.converged = true;
            break;
        }

        const std::size_t worst = order[n], best = order[0], second = order[n - 1];
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j];
        }
        for (double& c : centroid) c /= double(n);

        auto blend = [&](double coef) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j)
                p[j] = centroid[j] + coef * (simplex[worst][j] - centroid[j]);
            return p;
        };

        std::vector<double> xr = blend(-1.0);
        const double fr = f(xr);
        if (fr < fv[best]) {
            std::vector<double> xe = blend(-2.0);
            const double fe = f(xe);
            if (fe < fr) {
                simplex[worst] = std::move(xe);
                fv[worst] = fe;
            } else {
                simplex[worst] = std::move(xr);
                fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            simplex[worst] = std::move(xr);
            fv[worst] = fr;
        } else {
            const bool outside = fr < fv[worst];
            std::vector<double> xc = blend(outside ? -0.5 : 0.5);
            const double fc = f(xc);
            if (fc < std::min(fr, fv[worst])) {
                simplex[worst] = std::move(xc);
                fv[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t j = 0; j < n; ++j)
                        simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
                    fv[i] = f(simplex[i]);
                }
            }
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fv[i] < fv[best]) best = i;
    res.x = simplex[best];
    res.f = fv[best];
    return res;
}

struct ols_fit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // sum of squared residuals
};

inline ols_fit ols(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("ols: need >= 2 matching points");
    const double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    if (det == 0.0) throw fit_error("ols: degenerate abscissae");
    ols_fit fit;
    fit.slope = (n * sxy - sx * sy) / det;
    fit.intercept = (sy - fit.slope * sx) / n;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - fit.slope * x[i] - fit.intercept;
        fit.residual += r * r;
    }
    return fit;
}

// Least-squares line through the origin: y ~ slope * x.
inline double ols_through_origin(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.empty())
        throw std::invalid_argument("ols_through_origin: need >= 1 matching point");
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    if (sxx == 0.0) throw fit_error("ols_through_origin: degenerate abscissae");
    return sxy / sxx;
}

// Degree-2 least squares y ~ c0 + c1 x + c2 x^2; returns {c0,c1,c2} and,
// via *coef_se, large-sample standard errors of the coefficients.
inline std::array<double, 3> quadratic_fit(const std::vector<double>& x,
                                           const std::vector<double>& y,
                                           std::array<double, 3>* coef_se = nullptr) {
    const std::size_t m = x.size();
    if (y.size() != m || m < 3) throw std::invalid_argument("quadratic_fit: need >= 3 points");
    // normal equations A c = b with A_jk = sum x^(j+k)
    double p[5] = {double(m), 0, 0, 0, 0};
    double b[3] = {0, 0, 0};
    for (std::size_t i = 0; i < m; ++i) {
        double xp = 1.0;
        for (int j = 1; j <= 4; ++j) {
            xp *= x[i];
            p[j] += xp;
        }
        b[0] += y[i];
        b[1] += y[i] * x[i];
        b[2] += y[i] * x[i] * x[i];
    }
    double a[3][4] = {{p[0], p[1], p[2], b[0]}, {p[1], p[2], p[3], b[1]}, {p[2], p[3], p[4], b[2]}};
    // Gaussian elimination with partial pivoting on the 3x4 tableau
    double inv[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        if (a[piv][col] == 0.0) throw fit_error("quadratic_fit: singular system");
        std::swap(a[col], a[piv]);
        std::swap(inv[col], inv[piv]);
        const double d = a[col][col];
        for (int c = 0; c < 4; ++c) a[col][c] /= d;
        for (int c = 0; c < 3; ++c) inv[col][c] /= d;
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            for (int c = 0; c < 4; ++c) a[r][c] -= f * a[col][c];
            for (int c = 0; c < 3; ++c) inv[r][c] -= f * inv[col][c];
        }
    }
    std::array<double, 3> coef = {a[0][3], a[1][3], a[2][3]};
    if (coef_se) {
        double rss = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double r = y[i] - (coef[0] + coef[1] * x[i] + coef[2] * x[i] * x[i]);
            rss += r * r;
        }
        const double sigma2 = m > 3 ? rss / double(m - 3) : 0.0;
        for (int j = 0; j < 3; ++j) (*coef_se)[j] = std::sqrt(std::max(0.0, sigma2 * inv[j][j]));
    }
    return coef;
}

}  // namespace mzlab
