#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

// Shared error types and small statistics helpers used across the library.
//
// Error convention: std::invalid_argument for violated call contracts
// (bad sizes, non-positive parameters), numerical_error subclasses for
// failures that depend on the data (blowups, failed fits). The CLI maps
// the former to exit code 2 and the latter to exit code 3.

namespace mzlab {

struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct integration_blowup : numerical_error {
    double t_fail;
    explicit integration_blowup(double t)
        : numerical_error("non-finite state at t=" + std::to_string(t)), t_fail(t) {}
};

struct fit_error : numerical_error {
    explicit fit_error(const std::string& msg) : numerical_error(msg) {}
};

// Scalar Monte-Carlo estimate with its standard error.
struct ensemble_stats {
    double estimate = 0.0;
    double std_err = 0.0;
    std::size_t n_samples = 0;
};

// Mean and standard error of a sample vector.
inline ensemble_stats mean_stats(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean_stats: empty sample");
    double s = 0.0;
    for (double x : v) s += x;
    const double mean = s / double(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double var = v.size() > 1 ? ss / double(v.size() - 1) : 0.0;
    return {mean, std::sqrt(var / double(v.size())), v.size()};
}

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace mzlab
