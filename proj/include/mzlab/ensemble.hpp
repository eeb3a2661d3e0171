#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"
#include "ode.hpp"
#include "parallel.hpp"
#include "reduction.hpp"
#include "rng.hpp"
#include "sampling.hpp"

// Brute-force estimation of the conditional mean trajectory
// E[phihat(t) | resolved(0) = xhat] by ensemble simulation of the full
// system, and comparison of reduced models against it.
//
// Determinism contract: replica i uses the stream base_seed + i; replicas
// are accumulated into fixed 128-replica blocks and the per-block partial
// sums are combined by pairwise summation in block-index order, so the
// result is bitwise independent of the worker count.

namespace mzlab {

struct mean_trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> means;     // [time][component]
    std::vector<std::vector<double>> std_errs;  // [time][component]
    std::size_t n_replicas = 0;
    std::size_t n_excluded = 0;  // replicas dropped after a blowup
};

struct ensemble_options {
    std::size_t record_stride = 1;   // record every k-th step
    std::size_t block_size = kDefaultBlock;
    std::size_t n_workers = 0;       // 0 = hardware concurrency
    double temperature = 1.0;
};

namespace detail {

// Pairwise reduction of per-block partials in block-index order.
inline void pairwise_combine(std::vector<std::vector<double>>& blocks) {
    std::size_t active = blocks.size();
    while (active > 1) {
        const std::size_t half = (active + 1) / 2;
        for (std::size_t i = 0; i + half < active; ++i) {
            auto& dst = blocks[i];
            const auto& src = blocks[i + half];
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
        active = half;
    }
}

}  // namespace detail

// Ensemble mean of the resolved components of the Hald system; initial
// data are drawn from the exact conditional density given xhat.
inline mean_trajectory ensemble_mean_trajectory(const system_def& sys, const partition& part,
                                                const std::vector<double>& xhat,
                                                std::size_t n_replicas, double dt, double t_end,
                                                std::uint64_t seed,
                                                const ensemble_options& opts = {}) {
    if (sys.n != 4) throw std::invalid_argument("ensemble_mean_trajectory: 4-dimensional system expected");
    if (part.m != 1 && part.m != 2)
        throw std::invalid_argument("ensemble_mean_trajectory: conditional sampler needs m in {1,2}");
    if (n_replicas == 0) throw std::invalid_argument("ensemble_mean_trajectory: n_replicas must be > 0");
    if (dt <= 0.0) throw std::invalid_argument("ensemble_mean_trajectory: dt must be positive");
    const std::size_t stride = opts.record_stride ? opts.record_stride : 1;
    const std::size_t n_steps = std::size_t(std::llround(t_end / dt));
    const std::size_t n_rec = n_steps / stride + 1;
    const std::size_t m = part.m;

    const std::size_t n_blocks = n_blocks_for(n_replicas, opts.block_size);
    std::vector<std::vector<double>> block_sum(n_blocks, std::vector<double>(n_rec * m, 0.0));
    std::vector<std::vector<double>> block_sumsq(n_blocks, std::vector<double>(n_rec * m, 0.0));
    std::vector<std::size_t> block_excluded(n_blocks, 0);

    const bool fast = bool(sys.rhs_inplace);
    const std::size_t workers = opts.n_workers ? opts.n_workers : default_workers();

    parallel_blocks(n_replicas, opts.block_size, workers, [&](std::size_t begin, std::size_t end,
                                                              std::size_t b) {
        std::vector<double> record(n_rec * m);
        std::array<double, 4> y{}, k1{}, k2{}, k3{}, k4{}, tmp{};
        state_vector ydyn(4);
        auto& sum = block_sum[b];
        auto& sumsq = block_sumsq[b];
        for (std::size_t r = begin; r < end; ++r) {
            rng gen = replica_rng(seed, r);
            const auto x0 = sample_hald_given(xhat, m, gen, opts.temperature);
            bool ok = true;
            if (fast) {
                y = x0;
                for (std::size_t j = 0; j < m; ++j) record[j] = y[j];
                std::size_t rec = 1;
                for (std::size_t s = 1; s <= n_steps; ++s) {
                    sys.rhs_inplace(y.data(), k1.data());
                    for (int i = 0; i < 4; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
                    sys.rhs_inplace(tmp.data(), k2.data());
                    for (int i = 0; i < 4; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
                    sys.rhs_inplace(tmp.data(), k3.data());
                    for (int i = 0; i < 4; ++i) tmp[i] = y[i] + dt * k3[i];
                    sys.rhs_inplace(tmp.data(), k4.data());
                    for (int i = 0; i < 4; ++i)
                        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                    if (s % stride == 0) {
                        if (!(std::isfinite(y[0]) && std::isfinite(y[1]) &&
                              std::isfinite(y[2]) && std::isfinite(y[3]))) {
                            ok = false;
                            break;
                        }
                        for (std::size_t j = 0; j < m; ++j) record[rec * m + j] = y[j];
                        ++rec;
                    }
                }
            } else {
                ydyn.assign(x0.begin(), x0.end());
                for (std::size_t j = 0; j < m; ++j) record[j] = ydyn[j];
                std::size_t rec = 1;
                for (std::size_t s = 1; s <= n_steps; ++s) {
                    rk4_step_dyn(sys, ydyn, dt);
                    if (s % stride == 0) {
                        if (!all_finite(ydyn)) {
                            ok = false;
                            break;
                        }
                        for (std::size_t j = 0; j < m; ++j) record[rec * m + j] = ydyn[j];
                        ++rec;
                    }
                }
            }
            if (!ok) {
                ++block_excluded[b];
                continue;
            }
            for (std::size_t k = 0; k < n_rec * m; ++k) {
                sum[k] += record[k];
                sumsq[k] += record[k] * record[k];
            }
        }
    });

    std::size_t excluded = 0;
    for (std::size_t e : block_excluded) excluded += e;
    if (excluded * 100 > n_replicas)
        throw numerical_error("ensemble_mean_trajectory: more than 1% of replicas blew up");
    const double n_used = double(n_replicas - excluded);
    if (n_used < 2.0) throw numerical_error("ensemble_mean_trajectory: too few surviving replicas");

    detail::pairwise_combine(block_sum);
    detail::pairwise_combine(block_sumsq);

    mean_trajectory out;
    out.n_replicas = n_replicas;
    out.n_excluded = excluded;
    out.times.resize(n_rec);
    out.means.assign(n_rec, std::vector<double>(m));
    out.std_errs.assign(n_rec, std::vector<double>(m));
    for (std::size_t r = 0; r < n_rec; ++r) {
        out.times[r] = double(r * stride) * dt;
        for (std::size_t j = 0; j < m; ++j) {
            const double s1 = block_sum[0][r * m + j], s2 = block_sumsq[0][r * m + j];
            const double mean = s1 / n_used;
            const double var = std::max(0.0, (s2 - n_used * mean * mean) / (n_used - 1.0));
            out.means[r][j] = mean;
            out.std_errs[r][j] = std::sqrt(var / n_used);
        }
    }
    // at t=0 the resolved components are conditioned on exactly
    for (std::size_t j = 0; j < m; ++j) {
        out.means[0][j] = xhat[j];
        out.std_errs[0][j] = 0.0;
    }
    return out;
}

// Largest |value| of a series over a time window.
inline double envelope_max(const std::vector<double>& times, const std::vector<double>& values,
                           double t_lo, double t_hi) {
    if (times.size() != values.size()) throw std::invalid_argument("envelope_max: size mismatch");
    double env = 0.0;
    bool seen = false;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < t_lo || times[i] > t_hi) continue;
        env = std::max(env, std::fabs(values[i]));
        seen = true;
    }
    if (!seen) throw std::invalid_argument("envelope_max: empty window");
    return env;
}

inline std::vector<double> component_series(const mean_trajectory& tr, std::size_t j) {
    std::vector<double> s;
    s.reserve(tr.means.size());
    for (const auto& row : tr.means) s.push_back(row.at(j));
    return s;
}

struct comparison_entry {
    std::string label;
    model_kind kind;
    std::vector<std::vector<double>> abs_err;  // [time][component]
    std::vector<double> l2;                    // per-time Euclidean deviation
    std::vector<double> sup;                   // per-time max-abs deviation
    double early_sup = 0.0;                    // sup over t <= 2
    double late_sup = 0.0;                     // sup over t >= 30
};

struct reduction_comparison {
    std::vector<double> times;
    std::vector<comparison_entry> entries;
};

// Integrates each reduced model from x0 on the truth grid and tabulates
// deviations from the ensemble means.
inline reduction_comparison compare_reductions(
    const mean_trajectory& truth,
    const std::vector<std::pair<std::string, const reduced_model*>>& models,
    const state_vector& x0, double dt) {
    if (truth.times.size() < 2) throw std::invalid_argument("compare_reductions: truth too short");
    const double grid_dt = truth.times[1] - truth.times[0];
    const double ratio = grid_dt / dt;
    const std::size_t stride = std::size_t(std::llround(ratio));
    if (stride == 0 || std::fabs(ratio - double(stride)) > 1e-9)
        throw std::invalid_argument("compare_reductions: model dt does not align with the truth grid");

    reduction_comparison cmp;
    cmp.times = truth.times;
    const double t_end = truth.times.back();
    const std::size_t m = truth.means.front().size();

    for (const auto& [label, model] : models) {
        if (model->m != m) throw std::invalid_argument("compare_reductions: resolved dimension mismatch");
        const trajectory tr = integrate_reduced(*model, x0, dt, t_end);
        comparison_entry e;
        e.label = label;
        e.kind = model->kind;
        e.abs_err.assign(truth.times.size(), std::vector<double>(m));
        e.l2.resize(truth.times.size());
        e.sup.resize(truth.times.size());
        for (std::size_t r = 0; r < truth.times.size(); ++r) {
            const std::size_t idx = r * stride;
            if (idx >= tr.states.size())
                throw std::invalid_argument("compare_reductions: grid misalignment");
            double l2 = 0.0, sup = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                const double err = std::fabs(tr.states[idx][j] - truth.means[r][j]);
                e.abs_err[r][j] = err;
                l2 += err * err;
                sup = std::max(sup, err);
            }
            e.l2[r] = std::sqrt(l2);
            e.sup[r] = sup;
            if (truth.times[r] <= 2.0) e.early_sup = std::max(e.early_sup, sup);
            if (truth.times[r] >= 30.0) e.late_sup = std::max(e.late_sup, sup);
        }
        cmp.entries.push_back(std::move(e));
    }
    return cmp;
}

}  // namespace mzlab
