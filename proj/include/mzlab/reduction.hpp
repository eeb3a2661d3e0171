#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "common.hpp"
#include "ode.hpp"
#include "rng.hpp"
#include "sampling.hpp"

// Reduced dynamical systems: Galerkin truncation, the conditional-
// expectation averaged system generated by the renormalized Hamiltonian,
// and the t-model. For the Hald system the averaged and t-model
// right-hand sides are known in closed form:
//   averaged: dPhi1 = Phi2,  dPhi2 = -Phi1 (1 + 1/(1+Phi1^2))
//   t-model:  adds the damping  -2 t Phi1^2 Phi2 / (1+Phi1^2)^2  to dPhi2,
// and the renormalized Hamiltonian (relative to the origin, T=1) is
//   Hhat(Phi1,Phi2) = (Phi1^2 + Phi2^2)/2 + log(1+Phi1^2)/2.

namespace mzlab {

enum class model_kind { galerkin, averaged, t_model, volterra_memory, white_noise };

struct memory_kernel;  // defined in memory.hpp

struct reduced_model {
    model_kind kind = model_kind::galerkin;
    std::size_t m = 0;
    // rhs(resolved state, t); Galerkin and averaged models ignore t
    std::function<state_vector(const state_vector&, double)> rhs;
    std::shared_ptr<const memory_kernel> kernel;  // volterra_memory only
    std::vector<double> noise_amp;                // white_noise only
};

inline reduced_model galerkin_model(const system_def& sys, const partition& part) {
    if (part.m == 0 || part.m > sys.n)
        throw std::invalid_argument("galerkin_model: resolved dimension out of range");
    reduced_model model;
    model.kind = model_kind::galerkin;
    model.m = part.m;
    const std::size_t n = sys.n, m = part.m;
    auto rhs = sys.rhs;
    model.rhs = [rhs, n, m](const state_vector& xhat, double) {
        state_vector full(n, 0.0);
        for (std::size_t i = 0; i < m; ++i) full[i] = xhat[i];
        state_vector r = rhs(full);
        r.resize(m);
        return r;
    };
    return model;
}

struct renormalized_hamiltonian {
    std::function<double(const state_vector&)> evaluate;  // relative to the origin
};

struct hhat_estimate {
    double value = 0.0;
    double std_err = 0.0;
    bool precision_warning = false;
};

// Monte-Carlo renormalized Hamiltonian for the Hald system, resolved pair
// (phi1,phi2): Hhat(xhat) = -log Int exp(-H(xhat,phi3,phi4)/T) dphi3 dphi4,
// reported relative to xhat = 0. Importance sampling with N(0,sqrt(T))
// proposals on the unresolved pair; the same draws evaluate the numerator
// and the origin so that their Monte-Carlo errors cancel in the difference.
inline hhat_estimate renormalized_hamiltonian_mc(const canonical_density& density,
                                                 const partition& part,
                                                 const std::vector<double>& xhat,
                                                 std::size_t n_samples, std::uint64_t seed) {
    if (part.m != 2) throw std::invalid_argument("renormalized_hamiltonian_mc: resolved pair expected");
    if (xhat.size() < 2) throw std::invalid_argument("renormalized_hamiltonian_mc: xhat too short");
    if (n_samples == 0) throw std::invalid_argument("renormalized_hamiltonian_mc: n_samples must be > 0");
    const double T = density.temperature;
    rng gen(seed);
    state_vector x(4), x0(4, 0.0);
    std::vector<double> w(n_samples), w0(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double g3 = std::sqrt(T) * gen.normal();
        const double g4 = std::sqrt(T) * gen.normal();
        const double back = 0.5 * (g3 * g3 + g4 * g4) / T;  // removes the proposal density
        x[0] = xhat[0]; x[1] = xhat[1]; x[2] = g3; x[3] = g4;
        x0[2] = g3; x0[3] = g4;
        w[i] = std::exp(-density.system.hamiltonian(x) / T + back);
        w0[i] = std::exp(-density.system.hamiltonian(x0) / T + back);
    }
    const ensemble_stats z = mean_stats(w), z0 = mean_stats(w0);
    hhat_estimate est;
    est.value = -std::log(z.estimate) + std::log(z0.estimate);
    est.std_err = std::sqrt(std::pow(z.std_err / z.estimate, 2) +
                            std::pow(z0.std_err / z0.estimate, 2));
    est.precision_warning = est.std_err > 0.05;
    return est;
}

inline renormalized_hamiltonian hald_renormalized_hamiltonian() {
    renormalized_hamiltonian h;
    h.evaluate = [](const state_vector& p) {
        return 0.5 * (p[0] * p[0] + p[1] * p[1]) + 0.5 * std::log1p(p[0] * p[0]);
    };
    return h;
}

inline reduced_model hald_averaged_model() {
    reduced_model model;
    model.kind = model_kind::averaged;
    model.m = 2;
    model.rhs = [](const state_vector& p, double) {
        return state_vector{p[1], -p[0] * (1.0 + 1.0 / (1.0 + p[0] * p[0]))};
    };
    return model;
}

inline reduced_model hald_t_model() {
    reduced_model model;
    model.kind = model_kind::t_model;
    model.m = 2;
    model.rhs = [](const state_vector& p, double t) {
        const double q = 1.0 + p[0] * p[0];
        return state_vector{p[1],
                            -p[0] * (1.0 + 1.0 / q) - 2.0 * t * p[0] * p[0] * p[1] / (q * q)};
    };
    return model;
}

// RK4 on a reduced model's (possibly time-dependent) rhs.
inline trajectory integrate_reduced(const reduced_model& model, const state_vector& x0,
                                    double dt, double t_end) {
    if (dt <= 0.0) throw std::invalid_argument("integrate_reduced: dt must be positive");
    if (x0.size() != model.m) throw std::invalid_argument("integrate_reduced: x0 dimension mismatch");
    const std::size_t n_steps = std::size_t(std::llround(t_end / dt));
    const std::size_t m = model.m;
    trajectory tr;
    tr.times.reserve(n_steps + 1);
    tr.states.reserve(n_steps + 1);
    tr.times.push_back(0.0);
    tr.states.push_back(x0);
    state_vector y = x0, tmp(m);
    for (std::size_t s = 1; s <= n_steps; ++s) {
        const double t = double(s - 1) * dt;
        const state_vector k1 = model.rhs(y, t);
        for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
        const state_vector k2 = model.rhs(tmp, t + 0.5 * dt);
        for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
        const state_vector k3 = model.rhs(tmp, t + 0.5 * dt);
        for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + dt * k3[i];
        const state_vector k4 = model.rhs(tmp, t + dt);
        for (std::size_t i = 0; i < m; ++i)
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (!all_finite(y)) throw integration_blowup(double(s) * dt);
        tr.times.push_back(double(s) * dt);
        tr.states.push_back(y);
    }
    return tr;
}

struct monotonicity_report {
    double max_increment = 0.0;    // largest per-step increase of Hhat
    bool non_increasing = false;   // within the given tolerance
    std::vector<double> times;
    std::vector<double> hhat;      // Hhat along the numerical solution
};

// Evaluates Hhat along the numerical solution of a reduced model and
// reports the largest positive per-step increment.
inline monotonicity_report lyapunov_check(const reduced_model& model,
                                          const renormalized_hamiltonian& hhat,
                                          const state_vector& x0, double dt, double t_end,
                                          double tolerance = 1e-6) {
    const trajectory tr = integrate_reduced(model, x0, dt, t_end);
    monotonicity_report rep;
    rep.times = tr.times;
    rep.hhat.reserve(tr.states.size());
    for (const auto& s : tr.states) rep.hhat.push_back(hhat.evaluate(s));
    for (std::size_t i = 1; i < rep.hhat.size(); ++i)
        rep.max_increment = std::max(rep.max_increment, rep.hhat[i] - rep.hhat[i - 1]);
    rep.non_increasing = rep.max_increment <= tolerance;
    return rep;
}

}  // namespace mzlab
