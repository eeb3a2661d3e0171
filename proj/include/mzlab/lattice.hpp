#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "common.hpp"
#include "optim.hpp"
#include "rng.hpp"

// Real-space renormalization for the 1D Ising chain. Configurations are
// weighted by exp(sum_j a_j sum_i s_i s_{i+j}); decimation keeps every
// second site, and the renormalized nearest-neighbor coupling K' is read
// off by matching the empirical pair moment, tanh K' = E[s_i s_{i+1}],
// which is the exact maximum-likelihood inverse for the 1D chain. The
// exact decimation map K' = (1/2) log cosh 2K serves as the reference.

namespace mzlab {

struct spin_chain {
    std::vector<int> spins;  // entries are +1 or -1
    bool periodic = true;

    std::size_t size() const { return spins.size(); }
};

// couplings.a[j-1] multiplies the separation-j pair sum (separations >= 1)
struct coupling_vector {
    std::vector<double> a;

    static coupling_vector nearest_neighbor(double k) { return coupling_vector{{k}}; }
    std::size_t max_separation() const { return a.size(); }
};

inline void check_chain(const spin_chain& chain) {
    for (int s : chain.spins)
        if (s != 1 && s != -1) throw std::invalid_argument("spin_chain: entries must be +-1");
}

// Average of s_i s_{i+j} over all pairs at separation j (wraparound pairs
// included for periodic chains).
inline double pair_moment(const spin_chain& chain, std::size_t j) {
    const std::size_t n = chain.size();
    if (j == 0 || j >= n) throw std::invalid_argument("pair_moment: need 0 < separation < N");
    double acc = 0.0;
    std::size_t count = 0;
    if (chain.periodic) {
        for (std::size_t i = 0; i < n; ++i) acc += chain.spins[i] * chain.spins[(i + j) % n];
        count = n;
    } else {
        for (std::size_t i = 0; i + j < n; ++i) acc += chain.spins[i] * chain.spins[i + j];
        count = n - j;
    }
    return acc / double(count);
}

// Exponent of the sampling weight, W = sum_j a_j sum_i s_i s_{i+j}.
inline double chain_weight_exponent(const spin_chain& chain, const coupling_vector& couplings) {
    const std::size_t n = chain.size();
    if (couplings.max_separation() >= n)
        throw std::invalid_argument("chain_weight_exponent: separation must be < N");
    double w = 0.0;
    for (std::size_t j = 1; j <= couplings.max_separation(); ++j) {
        const double aj = couplings.a[j - 1];
        if (aj == 0.0) continue;
        double pair_sum = 0.0;
        if (chain.periodic) {
            for (std::size_t i = 0; i < n; ++i)
                pair_sum += chain.spins[i] * chain.spins[(i + j) % n];
        } else {
            for (std::size_t i = 0; i + j < n; ++i)
                pair_sum += chain.spins[i] * chain.spins[i + j];
        }
        w += aj * pair_sum;
    }
    return w;
}

struct sweep_result {
    std::size_t proposed = 0;
    std::size_t accepted = 0;

    double acceptance_rate() const {
        return proposed ? double(accepted) / double(proposed) : 0.0;
    }
};

// One Metropolis pass over the sites in index order. At each site a flip
// is proposed with probability 1/2 and accepted with min(1, e^{dW}).
//
// The proposal coin is load-bearing: domain walls move at dW = 0, so a
// scan that proposes a flip at every site accepts those moves with
// probability one and can never hold still there. That kernel leaves the
// Boltzmann weight invariant but is reducible (flip cascades partition
// the state space), and a run started in one component equilibrates to
// the wrong distribution. The lazy proposal keeps a positive holding
// probability at every site, which makes the scan irreducible and
// aperiodic while leaving the acceptance rule untouched.
inline sweep_result metropolis_sweep(spin_chain& chain, const coupling_vector& couplings,
                                     rng& gen) {
    const std::size_t n = chain.size();
    if (couplings.max_separation() >= n)
        throw std::invalid_argument("metropolis_sweep: separation must be < N");
    sweep_result res;
    auto& s = chain.spins;
    for (std::size_t i = 0; i < n; ++i) {
        if (gen.uniform() >= 0.5) continue;
        ++res.proposed;
        double field = 0.0;  // sum over couplings of both neighbors of site i
        for (std::size_t j = 1; j <= couplings.max_separation(); ++j) {
            const double aj = couplings.a[j - 1];
            if (aj == 0.0) continue;
            if (chain.periodic) {
                field += aj * (s[(i + j) % n] + s[(i + n - j) % n]);
            } else {
                if (i + j < n) field += aj * s[i + j];
                if (i >= j) field += aj * s[i - j];
            }
        }
        const double dw = -2.0 * double(s[i]) * field;
        if (dw >= 0.0 || gen.uniform() < std::exp(dw)) {
            s[i] = -s[i];
            ++res.accepted;
        }
    }
    return res;
}

// Convenience: a single deterministic sweep from a fresh seed.
inline sweep_result metropolis_sweep(spin_chain& chain, const coupling_vector& couplings,
                                     std::uint64_t seed) {
    rng gen(seed);
    return metropolis_sweep(chain, couplings, gen);
}

struct chain_samples {
    std::vector<spin_chain> samples;
    double acceptance_rate = 0.0;
};

struct chain_mc_params {
    std::size_t n_sites = 64;
    std::size_t n_samples = 20000;
    std::size_t burn_in = 1000;
    std::size_t thinning = 5;  // sweeps between retained configurations
    bool periodic = true;
    std::uint64_t seed = 1;
};

// Markov chain over configurations: burn-in sweeps from the all-up state,
// then n_samples configurations separated by `thinning` sweeps each.
inline chain_samples sample_chains(const coupling_vector& couplings,
                                   const chain_mc_params& params) {
    if (params.n_sites < 2) throw std::invalid_argument("sample_chains: need N >= 2");
    if (params.n_samples == 0) throw std::invalid_argument("sample_chains: n_samples must be > 0");
    if (params.thinning == 0) throw std::invalid_argument("sample_chains: thinning must be > 0");
    rng gen(params.seed);
    spin_chain chain{std::vector<int>(params.n_sites, 1), params.periodic};
    for (std::size_t b = 0; b < params.burn_in; ++b) metropolis_sweep(chain, couplings, gen);
    chain_samples out;
    out.samples.reserve(params.n_samples);
    sweep_result totals;
    for (std::size_t k = 0; k < params.n_samples; ++k) {
        for (std::size_t t = 0; t < params.thinning; ++t) {
            const sweep_result r = metropolis_sweep(chain, couplings, gen);
            totals.proposed += r.proposed;
            totals.accepted += r.accepted;
        }
        out.samples.push_back(chain);
    }
    out.acceptance_rate = totals.acceptance_rate();
    return out;
}

// Keeps the even-index sites; the coarse chain inherits periodicity.
inline spin_chain decimate(const spin_chain& chain) {
    if (chain.size() % 2 != 0) throw std::invalid_argument("decimate: N must be even");
    spin_chain out;
    out.periodic = chain.periodic;
    out.spins.reserve(chain.size() / 2);
    for (std::size_t i = 0; i < chain.size(); i += 2) out.spins.push_back(chain.spins[i]);
    return out;
}

// Moment-matched nearest-neighbor coupling: tanh K' equals the pooled
// adjacent-pair moment of the (decimated) samples.
inline double estimate_renormalized_coupling(const std::vector<spin_chain>& samples) {
    if (samples.size() < 1000)
        throw std::invalid_argument("estimate_renormalized_coupling: need >= 1000 samples");
    double acc = 0.0;
    for (const auto& c : samples) acc += pair_moment(c, 1);
    const double moment = acc / double(samples.size());
    if (moment <= -1.0 || moment >= 1.0)
        throw numerical_error("estimate_renormalized_coupling: pair moment saturated");
    return std::atanh(moment);
}

// Correlation length from the decay of c(j) = E[s_i s_{i+j}]. Because
// c(0) = 1 exactly, log c(j) is fit through the origin; separations are
// kept only up to the first one that is non-positive or within 3 standard
// errors of zero, so the noise floor never enters the fit.
inline double correlation_length(const std::vector<spin_chain>& samples,
                                 std::size_t j_max = 0) {
    if (samples.empty()) throw std::invalid_argument("correlation_length: no samples");
    const std::size_t n = samples[0].size();
    if (j_max == 0) j_max = std::max<std::size_t>(1, std::min<std::size_t>(n / 4, 12));
    std::vector<double> js, logs;
    for (std::size_t j = 1; j <= j_max; ++j) {
        double sum = 0.0, sumsq = 0.0;
        for (const auto& c : samples) {
            const double m = pair_moment(c, j);
            sum += m;
            sumsq += m * m;
        }
        const double ns = double(samples.size());
        const double mean = sum / ns;
        const double var = std::max(0.0, (sumsq - ns * mean * mean) / std::max(1.0, ns - 1.0));
        const double se = std::sqrt(var / ns);
        if (mean <= 0.0 || mean < 3.0 * se) break;
        js.push_back(double(j));
        logs.push_back(std::log(mean));
    }
    if (js.empty()) throw fit_error("correlation_length: correlations below noise floor");
    const double slope = ols_through_origin(js, logs);
    if (slope >= 0.0) throw fit_error("correlation_length: correlations do not decay");
    return -1.0 / slope;
}

struct rg_step {
    double k_in = 0.0;
    double k_out_est = 0.0;
    double k_out_exact = 0.0;  // (1/2) log cosh 2 k_in
    double xi_in = 0.0;        // lattice units of the input chain
    double xi_out = 0.0;       // lattice units of the decimated chain
};

inline double decimation_map(double k) { return 0.5 * std::log(std::cosh(2.0 * k)); }

// Iterates sample -> decimate -> estimate, starting each level from the
// previous estimated coupling. Correlation lengths below the noise floor
// (e.g. along the K=0 fixed point) are recorded as NaN rather than
// aborting the flow.
inline std::vector<rg_step> rg_flow(double k0, std::size_t n_steps,
                                    const chain_mc_params& params) {
    if (n_steps < 1) throw std::invalid_argument("rg_flow: need n_steps >= 1");
    std::size_t final_n = params.n_sites;
    for (std::size_t s = 0; s < n_steps; ++s) {
        if (final_n % 2 != 0 || final_n / 2 < 16)
            throw std::invalid_argument("rg_flow: chain too short for requested depth");
        final_n /= 2;
    }
    auto xi_or_nan = [](const std::vector<spin_chain>& samples) {
        try {
            return correlation_length(samples);
        } catch (const fit_error&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    };
    std::vector<rg_step> steps;
    double k = k0;
    chain_mc_params level = params;
    for (std::size_t s = 0; s < n_steps; ++s) {
        level.seed = params.seed + s;  // fresh stream per level
        chain_samples draw = sample_chains(coupling_vector::nearest_neighbor(k), level);
        std::vector<spin_chain> coarse;
        coarse.reserve(draw.samples.size());
        for (const auto& c : draw.samples) coarse.push_back(decimate(c));
        rg_step step;
        step.k_in = k;
        step.k_out_est = estimate_renormalized_coupling(coarse);
        step.k_out_exact = decimation_map(k);
        step.xi_in = xi_or_nan(draw.samples);
        step.xi_out = xi_or_nan(coarse);
        steps.push_back(step);
        k = step.k_out_est;
        level.n_sites /= 2;
    }
    return steps;
}

// Brute-force expectation over all 2^N configurations; the exactness
// oracle for small chains.
template <class F>
double enumerate_expectation(std::size_t n, const coupling_vector& couplings, bool periodic,
                             F&& observable) {
    if (n == 0 || n > 20) throw std::invalid_argument("enumerate_expectation: need 0 < N <= 20");
    spin_chain chain{std::vector<int>(n, 1), periodic};
    double z = 0.0, acc = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t(1) << n); ++mask) {
        for (std::size_t i = 0; i < n; ++i)
            chain.spins[i] = (mask >> i) & 1 ? 1 : -1;
        const double w = std::exp(chain_weight_exponent(chain, couplings));
        z += w;
        acc += w * observable(chain);
    }
    return acc / z;
}

}  // namespace mzlab
