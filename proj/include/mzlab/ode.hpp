#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "common.hpp"
#include "rng.hpp"

// ODE systems (general and Hamiltonian) and a fixed-step classical RK4
// integrator. Hamiltonian systems use the canonical pairing in which the
// coordinates come in (q,p) pairs: with 1-based indices,
//   R_i = dH/dphi_{i+1} for odd i,   R_i = -dH/dphi_{i-1} for even i.

namespace mzlab {

using state_vector = std::vector<double>;

struct system_def {
    std::size_t n = 0;
    std::function<state_vector(const state_vector&)> rhs;
    std::function<double(const state_vector&)> hamiltonian;      // optional
    std::function<state_vector(const state_vector&)> grad_h;     // optional
    // optional allocation-free variant of rhs for ensemble hot loops
    std::function<void(const double*, double*)> rhs_inplace;
    bool has_hamiltonian() const { return bool(hamiltonian); }
};

struct trajectory {
    std::vector<double> times;
    std::vector<state_vector> states;
};

// One classical RK4 step of dy/dt = f(y,t) on a fixed-size state.
// f(y, t, dydt) must fill dydt. This is the allocation-free hot path used
// by the ensemble and kernel estimators.
template <std::size_t N, typename F>
inline void rk4_step(F&& f, std::array<double, N>& y, double t, double dt) {
    std::array<double, N> k1, k2, k3, k4, tmp;
    f(y, t, k1);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
    f(tmp, t + 0.5 * dt, k2);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
    f(tmp, t + 0.5 * dt, k3);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + dt * k3[i];
    f(tmp, t + dt, k4);
    for (std::size_t i = 0; i < N; ++i)
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

// Dynamic-size RK4 step for system_def rhs.
inline void rk4_step_dyn(const system_def& sys, state_vector& y, double dt) {
    const std::size_t n = y.size();
    state_vector k1 = sys.rhs(y), tmp(n);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
    state_vector k2 = sys.rhs(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
    state_vector k3 = sys.rhs(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + dt * k3[i];
    state_vector k4 = sys.rhs(tmp);
    for (std::size_t i = 0; i < n; ++i)
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

// Integrate from t=0 to t_end on the uniform grid i*dt. Throws
// integration_blowup at the first non-finite state.
inline trajectory integrate(const system_def& sys, const state_vector& x0, double dt,
                            double t_end) {
    if (dt <= 0.0) throw std::invalid_argument("integrate: dt must be positive");
    if (t_end < 0.0) throw std::invalid_argument("integrate: t_end must be >= 0");
    if (x0.size() != sys.n) throw std::invalid_argument("integrate: x0 dimension mismatch");
    if (!all_finite(x0)) throw std::invalid_argument("integrate: x0 not finite");

    const std::size_t n_steps = std::size_t(std::llround(t_end / dt));
    trajectory tr;
    tr.times.reserve(n_steps + 1);
    tr.states.reserve(n_steps + 1);
    tr.times.push_back(0.0);
    tr.states.push_back(x0);
    state_vector y = x0;
    for (std::size_t s = 1; s <= n_steps; ++s) {
        rk4_step_dyn(sys, y, dt);
        if (!all_finite(y)) throw integration_blowup(double(s) * dt);
        tr.times.push_back(double(s) * dt);
        tr.states.push_back(y);
    }
    return tr;
}

// Build the canonical-pairing rhs from a Hamiltonian gradient. When
// `check_gradient` is set, grad_h is verified against central differences
// of H at 16 random probe points (tolerance 1e-5).
inline system_def hamiltonian_system(std::function<double(const state_vector&)> h,
                                     std::function<state_vector(const state_vector&)> grad_h,
                                     std::size_t n, bool check_gradient = false,
                                     std::uint64_t probe_seed = 0) {
    if (n == 0 || n % 2 != 0)
        throw std::invalid_argument("hamiltonian_system: dimension must be even");
    system_def sys;
    sys.n = n;
    sys.hamiltonian = h;
    sys.grad_h = grad_h;
    sys.rhs = [grad_h, n](const state_vector& x) {
        state_vector g = grad_h(x), r(n);
        for (std::size_t i = 0; i + 1 < n; i += 2) {
            r[i] = g[i + 1];
            r[i + 1] = -g[i];
        }
        return r;
    };
    if (check_gradient) {
        rng gen(probe_seed);
        const double fd_h = 1e-5;
        for (int p = 0; p < 16; ++p) {
            state_vector x(n);
            for (auto& xi : x) xi = gen.normal();
            state_vector g = grad_h(x);
            for (std::size_t i = 0; i < n; ++i) {
                state_vector xp = x, xm = x;
                xp[i] += fd_h;
                xm[i] -= fd_h;
                const double fd = (h(xp) - h(xm)) / (2.0 * fd_h);
                if (std::fabs(fd - g[i]) > 1e-5 * (1.0 + std::fabs(g[i])))
                    throw numerical_error("hamiltonian_system: grad_h inconsistent with H");
            }
        }
    }
    return sys;
}

// Two linear oscillators with the quartic coupling phi1^2*phi3^2/2:
//   H = (phi1^2 + phi2^2 + phi3^2 + phi4^2 + phi1^2*phi3^2) / 2.
inline double hald_hamiltonian_value(const state_vector& x) {
    return 0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3] +
                  x[0] * x[0] * x[2] * x[2]);
}

inline state_vector hald_gradient(const state_vector& x) {
    return {x[0] * (1.0 + x[2] * x[2]), x[1], x[2] * (1.0 + x[0] * x[0]), x[3]};
}

// Allocation-free Hald rhs for the fast path.
inline void hald_rhs4(const std::array<double, 4>& y, double /*t*/, std::array<double, 4>& dy) {
    dy[0] = y[1];
    dy[1] = -y[0] * (1.0 + y[2] * y[2]);
    dy[2] = y[3];
    dy[3] = -y[2] * (1.0 + y[0] * y[0]);
}

inline system_def hald_system() {
    system_def sys = hamiltonian_system(hald_hamiltonian_value, hald_gradient, 4);
    sys.rhs_inplace = [](const double* y, double* dy) {
        dy[0] = y[1];
        dy[1] = -y[0] * (1.0 + y[2] * y[2]);
        dy[2] = y[3];
        dy[3] = -y[2] * (1.0 + y[0] * y[0]);
    };
    return sys;
}

}  // namespace mzlab
