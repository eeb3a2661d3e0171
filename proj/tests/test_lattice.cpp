#include <catch2/catch_amalgamated.hpp>

#include <mzlab/common.hpp>
#include <mzlab/lattice.hpp>
#include <mzlab/rng.hpp>

#include <cmath>
#include <vector>

using namespace mzlab;

namespace {

std::vector<spin_chain> decimated(const chain_samples& cs) {
    std::vector<spin_chain> out;
    out.reserve(cs.samples.size());
    for (const auto& c : cs.samples) out.push_back(decimate(c));
    return out;
}

double coupling_from(const chain_samples& cs) {
    return estimate_renormalized_coupling(decimated(cs));
}

}  // namespace

TEST_CASE("the weight exponent counts coupled pairs") {
    const coupling_vector k = coupling_vector::nearest_neighbor(0.7);
    spin_chain up{std::vector<int>(4, 1), true};
    REQUIRE(chain_weight_exponent(up, k) == Catch::Approx(4 * 0.7).margin(1e-15));
    spin_chain alt{{1, -1, 1, -1}, true};
    REQUIRE(chain_weight_exponent(alt, k) == Catch::Approx(-4 * 0.7).margin(1e-15));
    REQUIRE(chain_weight_exponent(alt, coupling_vector{{0.0}}) == 0.0);
    // A separation-2 coupling pairs each site with its second neighbor.
    REQUIRE(chain_weight_exponent(alt, coupling_vector{{0.0, 0.3}}) ==
            Catch::Approx(4 * 0.3).margin(1e-15));
    // Open chains drop the wraparound pairs.
    spin_chain open_up{std::vector<int>(4, 1), false};
    REQUIRE(chain_weight_exponent(open_up, k) == Catch::Approx(3 * 0.7).margin(1e-15));
    REQUIRE_THROWS_AS(chain_weight_exponent(up, coupling_vector{{1, 1, 1, 1}}),
                      std::invalid_argument);
}

TEST_CASE("pair moments average over the right pair set") {
    spin_chain alt{{1, -1, 1, -1, 1, -1}, true};
    REQUIRE(pair_moment(alt, 1) == -1.0);
    REQUIRE(pair_moment(alt, 2) == 1.0);
    spin_chain open_alt = alt;
    open_alt.periodic = false;
    REQUIRE(pair_moment(open_alt, 1) == -1.0);
    spin_chain mixed{{1, 1, -1, 1}, false};
    REQUIRE(pair_moment(mixed, 1) == Catch::Approx(-1.0 / 3.0).margin(1e-15));
    REQUIRE_THROWS_AS(pair_moment(alt, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(pair_moment(alt, 6), std::invalid_argument);
}

TEST_CASE("sweeps are deterministic in the seed") {
    const coupling_vector k = coupling_vector::nearest_neighbor(0.5);
    spin_chain a{std::vector<int>(32, 1), true};
    spin_chain b = a;
    const sweep_result ra = metropolis_sweep(a, k, 99);
    const sweep_result rb = metropolis_sweep(b, k, 99);
    REQUIRE(a.spins == b.spins);
    REQUIRE(ra.proposed == rb.proposed);
    REQUIRE(ra.accepted == rb.accepted);
    // The convenience overload is the rng overload with a fresh stream.
    spin_chain c{std::vector<int>(32, 1), true};
    rng gen(99);
    metropolis_sweep(c, k, gen);
    REQUIRE(a.spins == c.spins);
    REQUIRE_THROWS_AS(metropolis_sweep(a, coupling_vector{std::vector<double>(32, 0.1)}, 1),
                      std::invalid_argument);
}

TEST_CASE("free spins accept every proposal") {
    chain_mc_params prm;
    prm.n_sites = 64;
    prm.n_samples = 20000;
    prm.burn_in = 1000;
    prm.thinning = 5;
    prm.seed = 19;
    const chain_samples c0 = sample_chains(coupling_vector::nearest_neighbor(0.0), prm);
    // Every single-spin flip has dW = 0, so acceptance is exactly one.
    REQUIRE(c0.acceptance_rate == 1.0);
    REQUIRE(std::fabs(coupling_from(c0)) < 0.02);
    REQUIRE_THROWS_AS(correlation_length(c0.samples), fit_error);
}

TEST_CASE("strong coupling freezes the chain") {
    chain_mc_params prm;
    prm.n_sites = 64;
    prm.n_samples = 3000;
    prm.burn_in = 1000;
    prm.thinning = 5;
    prm.seed = 17;
    const chain_samples c3 = sample_chains(coupling_vector::nearest_neighbor(3.0), prm);
    REQUIRE(c3.acceptance_rate < 0.2);
}

TEST_CASE("decimation keeps the even sites") {
    const spin_chain alt{{1, -1, 1, -1}, true};
    REQUIRE(decimate(alt).spins == std::vector<int>{1, 1});
    const spin_chain up{std::vector<int>(8, 1), true};
    REQUIRE(decimate(up).spins == std::vector<int>(4, 1));
    REQUIRE(decimate(decimate(up)).spins == std::vector<int>(2, 1));
    REQUIRE(decimate(up).periodic);
    const spin_chain odd{std::vector<int>(7, 1), true};
    REQUIRE_THROWS_AS(decimate(odd), std::invalid_argument);
}

TEST_CASE("the estimated coarse coupling matches the exact decimation map") {
    chain_mc_params prm;
    prm.n_sites = 64;
    prm.n_samples = 20000;
    prm.burn_in = 1000;
    prm.thinning = 5;
    prm.seed = 17;
    for (double k : {0.3, 0.5, 1.0}) {
        const chain_samples cs = sample_chains(coupling_vector::nearest_neighbor(k), prm);
        REQUIRE(std::fabs(coupling_from(cs) - decimation_map(k)) < 0.05);
        REQUIRE_FALSE(cs.samples.empty());
    }
    REQUIRE_THROWS_AS(estimate_renormalized_coupling(std::vector<spin_chain>(10)),
                      std::invalid_argument);
    // A frozen ensemble saturates the pair moment.
    const std::vector<spin_chain> frozen(1000, spin_chain{std::vector<int>(8, 1), true});
    REQUIRE_THROWS_AS(estimate_renormalized_coupling(frozen), numerical_error);
}

TEST_CASE("more samples shrink the coupling error") {
    chain_mc_params small;
    small.n_sites = 64;
    small.burn_in = 1000;
    small.thinning = 5;
    small.seed = 23;
    small.n_samples = 1000;
    chain_mc_params big = small;
    big.n_samples = 100000;
    const coupling_vector k = coupling_vector::nearest_neighbor(0.5);
    const double target = decimation_map(0.5);
    const double e_small = std::fabs(coupling_from(sample_chains(k, small)) - target);
    const double e_big = std::fabs(coupling_from(sample_chains(k, big)) - target);
    REQUIRE(e_big < e_small);
}

TEST_CASE("the correlation length matches the transfer-matrix value and halves") {
    chain_mc_params prm;
    prm.n_sites = 64;
    prm.n_samples = 20000;
    prm.burn_in = 1000;
    prm.thinning = 5;
    prm.seed = 17;
    const chain_samples cs = sample_chains(coupling_vector::nearest_neighbor(0.5), prm);
    const double xi = correlation_length(cs.samples);
    const double exact = -1.0 / std::log(std::tanh(0.5));
    REQUIRE(std::fabs(xi - exact) / exact < 0.2);
    // Decimation halves distances, so the coarse chain's length is xi/2.
    const double xi_dec = correlation_length(decimated(cs));
    REQUIRE(std::fabs(xi_dec - 0.5 * xi) / (0.5 * xi) < 0.25);
    REQUIRE_THROWS_AS(correlation_length(std::vector<spin_chain>{}), std::invalid_argument);

    // Decimation preserves the coarse marginal: the separation-2 moment of
    // the fine chain is the separation-1 moment of the kept sites.
    std::vector<double> fine2, coarse1;
    for (const auto& c : cs.samples) {
        fine2.push_back(pair_moment(c, 2));
        coarse1.push_back(pair_moment(decimate(c), 1));
    }
    const ensemble_stats f2 = mean_stats(fine2), c1 = mean_stats(coarse1);
    const double z = (f2.estimate - c1.estimate) / std::hypot(f2.std_err, c1.std_err);
    REQUIRE(std::fabs(z) < 3.0);
}

TEST_CASE("every decimation shortens the measured correlation length") {
    struct row {
        double k;
        std::size_t n;
    };
    for (const row r : {row{0.3, 64}, row{1.0, 128}, row{2.0, 256}}) {
        chain_mc_params prm;
        prm.n_sites = r.n;
        prm.n_samples = 5000;
        prm.burn_in = 2000;
        prm.thinning = 10;
        prm.seed = 29;
        const chain_samples cs = sample_chains(coupling_vector::nearest_neighbor(r.k), prm);
        const double xi_in = correlation_length(cs.samples);
        const double xi_out = correlation_length(decimated(cs));
        REQUIRE(xi_out < xi_in);
    }
}

TEST_CASE("sampled moments on a small ring match brute-force enumeration") {
    const coupling_vector k = coupling_vector::nearest_neighbor(0.5);
    auto pm1 = [](const spin_chain& c) { return pair_moment(c, 1); };
    auto pm2 = [](const spin_chain& c) { return pair_moment(c, 2); };
    const double ex1 = enumerate_expectation(8, k, true, pm1);
    const double ex2 = enumerate_expectation(8, k, true, pm2);
    // Transfer-matrix closed form on the N = 8 ring, t = tanh K.
    const double t = std::tanh(0.5);
    const double t8 = std::pow(t, 8);
    REQUIRE(ex1 == Catch::Approx((t + std::pow(t, 7)) / (1.0 + t8)).margin(1e-12));
    REQUIRE(ex2 == Catch::Approx((t * t + std::pow(t, 6)) / (1.0 + t8)).margin(1e-12));

    chain_mc_params prm;
    prm.n_sites = 8;
    prm.n_samples = 40000;
    prm.burn_in = 1000;
    prm.thinning = 10;
    prm.seed = 91;
    const chain_samples cs = sample_chains(k, prm);
    std::vector<double> v1, v2;
    for (const auto& c : cs.samples) {
        v1.push_back(pair_moment(c, 1));
        v2.push_back(pair_moment(c, 2));
    }
    const ensemble_stats s1 = mean_stats(v1), s2 = mean_stats(v2);
    REQUIRE(std::fabs(s1.estimate - ex1) <= 3.0 * s1.std_err);
    REQUIRE(std::fabs(s2.estimate - ex2) <= 3.0 * s2.std_err);

    REQUIRE_THROWS_AS(enumerate_expectation(0, k, true, pm1), std::invalid_argument);
    REQUIRE_THROWS_AS(enumerate_expectation(24, k, true, pm1), std::invalid_argument);
}

TEST_CASE("the coupling flow follows the exact iterates downhill") {
    chain_mc_params prm;
    prm.n_sites = 128;
    prm.n_samples = 8000;
    prm.burn_in = 2000;
    prm.thinning = 5;
    prm.seed = 37;
    const std::vector<rg_step> flow = rg_flow(2.0, 2, prm);
    REQUIRE(flow.size() == 2);
    const double e1 = decimation_map(2.0);
    const double e2 = decimation_map(e1);
    REQUIRE(std::fabs(flow[0].k_out_est - e1) < 0.05);
    REQUIRE(std::fabs(flow[1].k_out_est - e2) < 0.05);
    REQUIRE(flow[0].k_out_exact == e1);
    REQUIRE(flow[0].k_in == 2.0);
    REQUIRE(flow[1].k_in == flow[0].k_out_est);
    // The 1D chain flows to the trivial fixed point, monotonically here.
    REQUIRE(2.0 > flow[0].k_out_est);
    REQUIRE(flow[0].k_out_est > flow[1].k_out_est);
    REQUIRE(flow[0].xi_out < flow[0].xi_in);
}

TEST_CASE("the flow records a dead correlation length as NaN") {
    chain_mc_params prm;
    prm.n_sites = 64;
    prm.n_samples = 2000;
    prm.burn_in = 500;
    prm.thinning = 5;
    prm.seed = 19;
    const std::vector<rg_step> flow = rg_flow(0.0, 1, prm);
    REQUIRE(std::isnan(flow[0].xi_in));
    REQUIRE(std::isnan(flow[0].xi_out));
    REQUIRE(std::fabs(flow[0].k_out_est) < 0.05);
    REQUIRE(flow[0].k_out_exact == 0.0);
    // Same seed, same flow.
    const std::vector<rg_step> again = rg_flow(0.0, 1, prm);
    REQUIRE(again[0].k_out_est == flow[0].k_out_est);
}

TEST_CASE("the flow rejects depths the chain cannot support") {
    chain_mc_params prm;
    prm.n_sites = 64;
    prm.n_samples = 2000;
    REQUIRE_THROWS_AS(rg_flow(0.5, 3, prm), std::invalid_argument);
    REQUIRE_THROWS_AS(rg_flow(0.5, 0, prm), std::invalid_argument);
    prm.n_sites = 63;
    REQUIRE_THROWS_AS(rg_flow(0.5, 1, prm), std::invalid_argument);
}

TEST_CASE("chain construction and validation") {
    spin_chain bad{{1, 0, -1}, true};
    REQUIRE_THROWS_AS(check_chain(bad), std::invalid_argument);
    chain_mc_params prm;
    prm.n_sites = 1;
    REQUIRE_THROWS_AS(sample_chains(coupling_vector::nearest_neighbor(0.5), prm),
                      std::invalid_argument);
    prm.n_sites = 8;
    prm.n_samples = 0;
    REQUIRE_THROWS_AS(sample_chains(coupling_vector::nearest_neighbor(0.5), prm),
                      std::invalid_argument);
    prm.n_samples = 10;
    prm.thinning = 0;
    REQUIRE_THROWS_AS(sample_chains(coupling_vector::nearest_neighbor(0.5), prm),
                      std::invalid_argument);
}
