#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "common.hpp"
#include "optim.hpp"

// Steady travelling-wave profiles of the KdV-Burgers equation in the frame
// where the wave speed and far-field jump are scaled out:
//
//   u'' = (1/R) u' + u/2 - u^2/2,   u(+inf) = 0,  u(-inf) = 1,
//
// with R the Reynolds-like ratio of inertia to (viscosity x dispersion).
// For R > 1/sqrt(2) the left state is approached through a decaying
// oscillation (a wave train); below it the profile is monotone. The module
// also provides the local spatial average of a profile, the Burgers shock
// ansatz used as the effective equation, the least-squares fit of its
// effective viscosity, and the power-law fit of eps_eff against R.

namespace mzlab {

struct wave_profile {
    std::vector<double> xi;  // uniform grid, ascending
    std::vector<double> u;
    double reynolds = 0.0;
    bool oscillatory = false;

    double dx() const {
        if (xi.size() < 2) throw std::invalid_argument("wave_profile: need >= 2 points");
        return xi[1] - xi[0];
    }
};

struct profile_grid {
    double xi_min = -200.0;
    double xi_max = 40.0;
    double dx = 0.01;
};

namespace detail {

// index of the rightmost grid point nearest a downward crossing of `level`
inline std::size_t rightmost_crossing(const std::vector<double>& u, double level) {
    for (std::size_t i = u.size() - 1; i > 0; --i) {
        const double a = u[i - 1] - level, b = u[i] - level;
        if ((a >= 0.0 && b < 0.0) || (a <= 0.0 && b > 0.0)) {
            const double f = std::fabs(a) / (std::fabs(a) + std::fabs(b));
            return (f < 0.5) ? i - 1 : i;
        }
    }
    throw numerical_error("profile never crosses level " + std::to_string(level));
}

}  // namespace detail

// Integrates the profile ODE backward from the right end, starting on the
// stable manifold of the rest state u=0: eigenvalue
// lambda_- = (1/R - sqrt(1/R^2 + 2))/2, launch displacement 1e-7 along
// (1, lambda_-). The grid is recentered so that xi=0 sits on the grid point
// nearest the rightmost crossing of u = 1/2.
inline wave_profile steady_profile(double reynolds, const profile_grid& grid = {}) {
    if (!(reynolds > 0.0)) throw std::invalid_argument("steady_profile: R must be positive");
    if (!(grid.dx > 0.0) || !(grid.xi_max > grid.xi_min))
        throw std::invalid_argument("steady_profile: bad grid");
    const std::size_t n = std::size_t(std::llround((grid.xi_max - grid.xi_min) / grid.dx));
    if (n < 10) throw std::invalid_argument("steady_profile: span too short");

    const double inv_r = 1.0 / reynolds;
    const double lambda = 0.5 * (inv_r - std::sqrt(inv_r * inv_r + 2.0));
    const double delta = 1e-7;

    std::vector<double> u(n + 1);
    double y0 = delta, y1 = lambda * delta;  // (u, u')
    u[n] = y0;
    const double h = -grid.dx;  // backward sweep
    auto f0 = [](double, double b) { return b; };
    auto f1 = [inv_r](double a, double b) { return inv_r * b + 0.5 * a - 0.5 * a * a; };
    for (std::size_t i = n; i > 0; --i) {
        const double k1a = f0(y0, y1), k1b = f1(y0, y1);
        const double k2a = f0(y0 + 0.5 * h * k1a, y1 + 0.5 * h * k1b);
        const double k2b = f1(y0 + 0.5 * h * k1a, y1 + 0.5 * h * k1b);
        const double k3a = f0(y0 + 0.5 * h * k2a, y1 + 0.5 * h * k2b);
        const double k3b = f1(y0 + 0.5 * h * k2a, y1 + 0.5 * h * k2b);
        const double k4a = f0(y0 + h * k3a, y1 + h * k3b);
        const double k4b = f1(y0 + h * k3a, y1 + h * k3b);
        y0 += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        y1 += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
        if (!std::isfinite(y0) || !std::isfinite(y1))
            throw integration_blowup(grid.xi_min + double(i - 1) * grid.dx);
        u[i - 1] = y0;
    }
    if (std::fabs(u[0] - 1.0) > 0.05)
        throw std::invalid_argument("steady_profile: span too short, profile not settled at left end");

    const std::size_t center = detail::rightmost_crossing(u, 0.5);
    wave_profile p;
    p.u = std::move(u);
    p.reynolds = reynolds;
    p.xi.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
        p.xi[i] = (double(i) - double(center)) * grid.dx;

    // non-monotonicity of u marks the oscillatory regime
    int prev_sign = 0;
    for (std::size_t i = 1; i < p.u.size(); ++i) {
        const double d = p.u[i] - p.u[i - 1];
        if (std::fabs(d) < 1e-12) continue;
        const int s = d > 0.0 ? 1 : -1;
        if (prev_sign != 0 && s != prev_sign) {
            p.oscillatory = true;
            break;
        }
        prev_sign = s;
    }
    return p;
}

// Sliding trapezoidal average over windows [xi - ell/2, xi + ell/2].
// Points whose window leaves the domain are dropped, so the result covers
// a narrower xi range than the input.
inline wave_profile window_average(const wave_profile& p, double ell) {
    const double dx = p.dx();
    const auto half = std::size_t(std::llround(0.5 * ell / dx));
    if (half < 1 || std::fabs(2.0 * double(half) * dx - ell) > 1e-9)
        throw std::invalid_argument("window_average: ell must be a positive even multiple of dx");
    if (p.u.size() < 2 * half + 1)
        throw std::invalid_argument("window_average: profile shorter than the window");

    // prefix sums make each trapezoid O(1)
    std::vector<double> prefix(p.u.size() + 1, 0.0);
    for (std::size_t i = 0; i < p.u.size(); ++i) prefix[i + 1] = prefix[i] + p.u[i];

    wave_profile out;
    out.reynolds = p.reynolds;
    out.oscillatory = p.oscillatory;
    const std::size_t first = half, last = p.u.size() - 1 - half;
    out.xi.reserve(last - first + 1);
    out.u.reserve(last - first + 1);
    for (std::size_t i = first; i <= last; ++i) {
        const double interior = prefix[i + half] - prefix[i - half + 1];
        const double trap = 0.5 * p.u[i - half] + interior + 0.5 * p.u[i + half];
        out.xi.push_back(p.xi[i]);
        out.u.push_back(trap * dx / ell);
    }
    return out;
}

// Burgers shock ansatz v(xi) = (1 - tanh((xi - shift)/(4 eps)))/2.
inline std::vector<double> burgers_profile(double eps, double shift,
                                           const std::vector<double>& xi) {
    if (!(eps > 0.0)) throw std::invalid_argument("burgers_profile: eps must be positive");
    std::vector<double> v(xi.size());
    for (std::size_t i = 0; i < xi.size(); ++i)
        v[i] = 0.5 * (1.0 - std::tanh((xi[i] - shift) / (4.0 * eps)));
    return v;
}

struct burgers_fit {
    double eps_eff = 0.0;
    double shift = 0.0;
    double residual = 0.0;  // trapezoid integral of |ubar - v|^2
    double ell = 0.0;
    double reynolds = 0.0;
};

// Least-squares fit of the Burgers ansatz to an averaged profile. The
// objective is minimized by Nelder-Mead from four eps starting points;
// disagreement between the converged restarts beyond 1e-3 is reported as
// instability rather than silently picking one basin.
inline burgers_fit fit_eps_eff(const wave_profile& averaged, double ell) {
    const double dx = averaged.dx();
    const std::vector<double>& xi = averaged.xi;
    const std::vector<double>& ub = averaged.u;

    auto objective = [&](const std::vector<double>& q) {
        const double eps = q[0], shift = q[1];
        if (!(eps > 1e-8)) return 1e100;
        double acc = 0.0;
        for (std::size_t i = 0; i < xi.size(); ++i) {
            const double v = 0.5 * (1.0 - std::tanh((xi[i] - shift) / (4.0 * eps)));
            const double r = ub[i] - v;
            const double w = (i == 0 || i + 1 == xi.size()) ? 0.5 : 1.0;
            acc += w * r * r;
        }
        return acc * dx;
    };

    double shift0 = 0.0;
    try {
        const std::size_t c = detail::rightmost_crossing(ub, 0.5);
        shift0 = xi[c];
    } catch (const numerical_error&) {
        // profile entirely above or below 1/2: keep shift0 = 0
    }

    const double starts[] = {0.3, 1.0, 3.0, 10.0};
    std::vector<nm_result> results;
    for (double e0 : starts)
        results.push_back(nelder_mead(objective, {e0, shift0}));

    double eps_lo = results[0].x[0], eps_hi = results[0].x[0];
    std::size_t best = 0;
    for (std::size_t i = 1; i < results.size(); ++i) {
        eps_lo = std::min(eps_lo, results[i].x[0]);
        eps_hi = std::max(eps_hi, results[i].x[0]);
        if (results[i].f < results[best].f) best = i;
    }
    if (eps_hi - eps_lo > 1e-3)
        throw fit_error("fit_eps_eff: restarts disagree, eps spread " +
                        std::to_string(eps_hi - eps_lo));

    burgers_fit fit;
    fit.eps_eff = results[best].x[0];
    fit.shift = results[best].x[1];
    fit.residual = results[best].f;
    fit.ell = ell;
    fit.reynolds = averaged.reynolds;
    return fit;
}

struct similarity_fit {
    double nu = 0.0;
    double log_prefactor = 0.0;
    double fit_residual = 0.0;  // sum of squared residuals in log-log space
    std::vector<double> r_values;
};

// Power-law fit eps_eff = C R^nu by least squares of log eps_eff on log R.
inline similarity_fit similarity_exponent(const std::vector<burgers_fit>& fits) {
    std::vector<double> lr, le, rs;
    for (const auto& f : fits) {
        if (!(f.reynolds > 0.0) || !(f.eps_eff > 0.0))
            throw std::invalid_argument("similarity_exponent: R and eps_eff must be positive");
        lr.push_back(std::log(f.reynolds));
        le.push_back(std::log(f.eps_eff));
        rs.push_back(f.reynolds);
    }
    std::vector<double> sorted = rs;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("similarity_exponent: R values must be distinct");
    if (rs.size() < 4)
        throw std::invalid_argument("similarity_exponent: need at least 4 Reynolds numbers");
    const ols_fit line = ols(lr, le);
    similarity_fit out;
    out.nu = line.slope;
    out.log_prefactor = line.intercept;
    out.fit_residual = line.residual;
    out.r_values = std::move(rs);
    return out;
}

}  // namespace mzlab
