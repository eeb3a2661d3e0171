#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "common.hpp"
#include "ode.hpp"
#include "rng.hpp"

// Canonical and conditional sampling, and Monte-Carlo conditional
// expectations (the projection onto functions of the resolved variables).
//
// For the Hald system everything is sampled exactly: conditioned on
// (x1,x2), the unresolved pair is Gaussian with
//   x3 ~ N(0, T/(1+x1^2)),   x4 ~ N(0, T),
// and the x1 marginal of the canonical density is
//   proportional to exp(-x1^2/(2T)) / sqrt(1+x1^2),
// which a rejection step against N(0,sqrt(T)) samples with acceptance
// probability 1/sqrt(1+x1^2). Metropolis is provided for generic
// Hamiltonians.

namespace mzlab {

struct canonical_density {
    system_def system;
    double temperature = 1.0;
};

// Resolved variables are the first m coordinates by convention.
struct partition {
    std::size_t m = 0;
};

struct metropolis_result {
    std::vector<state_vector> samples;
    double acceptance_rate = 0.0;
    bool acceptance_warning = false;  // rate outside [0.05, 0.95]
};

// Whole-vector symmetric Gaussian proposals; one proposal per sweep.
// Returns post-burn-in states thinned by `thinning`.
inline metropolis_result sample_canonical_metropolis(const canonical_density& density,
                                                     std::size_t n_samples, std::size_t burn_in,
                                                     double proposal_scale, std::uint64_t seed,
                                                     std::size_t thinning = 10) {
    if (n_samples == 0) throw std::invalid_argument("metropolis: n_samples must be > 0");
    if (proposal_scale <= 0.0) throw std::invalid_argument("metropolis: proposal_scale must be > 0");
    if (!density.system.has_hamiltonian())
        throw std::invalid_argument("metropolis: density requires a Hamiltonian");
    if (thinning == 0) thinning = 1;

    rng gen(seed);
    const std::size_t n = density.system.n;
    const double invT = 1.0 / density.temperature;
    state_vector x(n, 0.0), prop(n);
    double h = density.system.hamiltonian(x);

    metropolis_result result;
    result.samples.reserve(n_samples);
    std::size_t accepted = 0, post_burn_steps = 0;
    const std::size_t total = burn_in + n_samples * thinning;
    for (std::size_t step = 0; step < total; ++step) {
        for (std::size_t i = 0; i < n; ++i) prop[i] = x[i] + proposal_scale * gen.normal();
        const double hp = density.system.hamiltonian(prop);
        if (hp <= h || gen.uniform() < std::exp(-(hp - h) * invT)) {
            x = prop;
            h = hp;
            if (step >= burn_in) ++accepted;
        }
        if (step >= burn_in) {
            ++post_burn_steps;
            if (post_burn_steps % thinning == 0) result.samples.push_back(x);
        }
    }
    result.acceptance_rate = post_burn_steps ? double(accepted) / double(post_burn_steps) : 0.0;
    result.acceptance_warning =
        result.acceptance_rate < 0.05 || result.acceptance_rate > 0.95;
    return result;
}

// Exact conditional sampler for the Hald system given (x1,x2).
inline std::vector<std::pair<double, double>> sample_hald_conditional(double x1, double x2,
                                                                      std::size_t n_samples,
                                                                      std::uint64_t seed,
                                                                      double temperature = 1.0) {
    (void)x2;  // the unresolved pair is independent of x2
    if (n_samples == 0) throw std::invalid_argument("sample_hald_conditional: n_samples must be > 0");
    rng gen(seed);
    const double s3 = std::sqrt(temperature / (1.0 + x1 * x1));
    const double s4 = std::sqrt(temperature);
    std::vector<std::pair<double, double>> out;
    out.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i)
        out.emplace_back(s3 * gen.normal(), s4 * gen.normal());
    return out;
}

// One exact draw of x1 from its canonical marginal (rejection step).
inline double sample_hald_x1(rng& gen, double temperature = 1.0) {
    const double sT = std::sqrt(temperature);
    for (;;) {
        const double x1 = sT * gen.normal();
        if (gen.uniform() * std::sqrt(1.0 + x1 * x1) < 1.0) return x1;
    }
}

// One exact draw from the full Hald canonical density.
inline std::array<double, 4> sample_hald_canonical(rng& gen, double temperature = 1.0) {
    const double sT = std::sqrt(temperature);
    const double x1 = sample_hald_x1(gen, temperature);
    const double x2 = sT * gen.normal();
    const double x3 = std::sqrt(temperature / (1.0 + x1 * x1)) * gen.normal();
    const double x4 = sT * gen.normal();
    return {x1, x2, x3, x4};
}

// Exact draw of the unresolved tail given the first m Hald coordinates.
// m=2: fills (x3,x4); m=1: fills (x2,x3,x4).
inline std::array<double, 4> sample_hald_given(const std::vector<double>& xhat, std::size_t m,
                                               rng& gen, double temperature = 1.0) {
    if (m != 1 && m != 2)
        throw std::invalid_argument("sample_hald_given: resolved dimension must be 1 or 2");
    if (xhat.size() < m) throw std::invalid_argument("sample_hald_given: xhat too short");
    const double sT = std::sqrt(temperature);
    std::array<double, 4> x{};
    x[0] = xhat[0];
    x[1] = m == 2 ? xhat[1] : sT * gen.normal();
    x[2] = std::sqrt(temperature / (1.0 + x[0] * x[0])) * gen.normal();
    x[3] = sT * gen.normal();
    return x;
}

// Monte-Carlo conditional expectation E[g | resolved = xhat] for the Hald
// system, using the exact conditional sampler.
template <typename G>
ensemble_stats conditional_expectation_mc(G&& g, const std::vector<double>& xhat,
                                          const partition& part, std::size_t n_samples,
                                          std::uint64_t seed, double temperature = 1.0) {
    if (n_samples == 0) throw std::invalid_argument("conditional_expectation_mc: n_samples must be > 0");
    rng gen(seed);
    std::vector<double> values;
    values.reserve(n_samples);
    state_vector x(4);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const auto full = sample_hald_given(xhat, part.m, gen, temperature);
        x.assign(full.begin(), full.end());
        const double v = g(x);
        if (!std::isfinite(v)) throw numerical_error("conditional_expectation_mc: non-finite g");
        values.push_back(v);
    }
    return mean_stats(values);
}

}  // namespace mzlab
