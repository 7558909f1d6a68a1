#pragma once

// Shared test oracles. These stay independent of the library code paths they
// are used to check: pmf formulas are written out from first principles.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "cbp/rng.hpp"

namespace testutil {

inline double binom_pmf(std::int64_t n, double p, std::int64_t i) {
    if (i < 0 || i > n) return 0.0;
    if (p <= 0.0) return i == 0 ? 1.0 : 0.0;
    if (p >= 1.0) return i == n ? 1.0 : 0.0;
    const double lg = std::lgamma(double(n) + 1.0) - std::lgamma(double(i) + 1.0) -
                      std::lgamma(double(n - i) + 1.0) + double(i) * std::log(p) +
                      double(n - i) * std::log1p(-p);
    return std::exp(lg);
}

inline double poisson_pmf(double rate, std::int64_t i) {
    return std::exp(-rate + double(i) * std::log(rate) - std::lgamma(double(i) + 1.0));
}

// Truncated series sum of E[s^Y] for Poisson, to absolute error < tol.
inline double poisson_pgf_series(double rate, double s, double tol = 1e-14) {
    double term = std::exp(-rate);
    double acc = term;
    for (std::int64_t i = 1; i < 10000; ++i) {
        term *= rate * s / double(i);
        acc += term;
        if (term < tol && i > rate * s) break;
    }
    return acc;
}

inline std::vector<double> empirical_pmf(const std::function<std::int64_t()>& draw, int n,
                                         std::size_t support) {
    std::vector<double> pmf(support + 1, 0.0);
    for (int i = 0; i < n; ++i) {
        const std::int64_t v = draw();
        if (v >= 0 && static_cast<std::size_t>(v) <= support) pmf[static_cast<std::size_t>(v)] += 1.0;
    }
    for (auto& q : pmf) q /= double(n);
    return pmf;
}

// Total-variation distance between two (sub-)pmfs on a common index range.
inline double tv_distance(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = std::max(a.size(), b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = i < a.size() ? a[i] : 0.0;
        const double y = i < b.size() ? b[i] : 0.0;
        acc += std::abs(x - y);
    }
    return 0.5 * acc;
}

inline std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

struct Stats {
    double mean = 0.0;
    double sd = 0.0;
    double se = 0.0;
};

inline Stats summarize(const std::vector<double>& xs) {
    const double n = double(xs.size());
    double sum = 0.0;
    for (double x : xs) sum += x;
    Stats s;
    s.mean = sum / n;
    double m2 = 0.0;
    for (double x : xs) m2 += (x - s.mean) * (x - s.mean);
    if (xs.size() > 1) {
        s.sd = std::sqrt(m2 / (n - 1.0));
        s.se = s.sd / std::sqrt(n);
    }
    return s;
}

} // namespace testutil
