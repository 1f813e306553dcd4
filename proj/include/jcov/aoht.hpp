/**
 * Asymptotically optimal hard threshold for an unknown noise level.
 *
 * For an m x n matrix (beta = m/n <= 1) the singular values are thresholded
 * at omega(beta) * median singular value, with
 *   omega(beta) = lambda*(beta) / sqrt(mu_beta),
 * lambda*(beta) the known-noise optimal coefficient and mu_beta the median of
 * the Marchenko-Pastur law of ratio beta.
 */
#pragma once

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace jcov::aoht {

/// Known-noise coefficient: sqrt(2(b+1) + 8b / ((b+1) + sqrt(b^2 + 14b + 1))).
inline double lambda_star(double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("aoht: beta must lie in (0, 1]");
    return std::sqrt(2.0 * (beta + 1.0) + 8.0 * beta / ((beta + 1.0) + std::sqrt(beta * beta + 14.0 * beta + 1.0)));
}

/**
 * Marchenko-Pastur CDF at t, ratio beta, unit variance. The substitution
 * t = a + (b - a)(1 - cos th)/2 removes the square-root edge behaviour,
 * leaving a smooth integrand on [0, pi].
 */
inline double mp_cdf(double t, double beta) {
    const double lo = (1.0 - std::sqrt(beta)) * (1.0 - std::sqrt(beta));
    const double hi = (1.0 + std::sqrt(beta)) * (1.0 + std::sqrt(beta));
    if (t <= lo) return 0.0;
    if (t >= hi) return 1.0;
    const double half = 0.5 * (hi - lo);
    const double pi = boost::math::constants::pi<double>();
    auto integrand = [&](double th) {
        const double s = std::sin(th);
        const double x = lo + half * (1.0 - std::cos(th));
        // sin^2 / x stays finite at th -> 0 even when lo == 0.
        return x > 0.0 ? half * half * s * s / (2.0 * pi * beta * x) : half * (1.0 + std::cos(th)) / (2.0 * pi * beta);
    };
    const double th_end = std::acos(1.0 - (t - lo) / half);
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, th_end, 15, 1e-13);
}

/// Median of the Marchenko-Pastur law, by bisection to 1e-12 in t.
inline double mp_median(double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("aoht: beta must lie in (0, 1]");
    const double lo = (1.0 - std::sqrt(beta)) * (1.0 - std::sqrt(beta));
    const double hi = (1.0 + std::sqrt(beta)) * (1.0 + std::sqrt(beta));
    auto f = [beta](double t) { return mp_cdf(t, beta) - 0.5; };
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-12; };
    const auto [a, b] = boost::math::tools::bisect(f, lo, hi, tol);
    return 0.5 * (a + b);
}

/// omega(beta), memoized per beta.
inline double omega(double beta) {
    static std::mutex mu;
    static std::map<double, double> cache;
    {
        std::lock_guard lock(mu);
        if (auto it = cache.find(beta); it != cache.end()) return it->second;
    }
    const double w = lambda_star(beta) / std::sqrt(mp_median(beta));
    std::lock_guard lock(mu);
    cache.emplace(beta, w);
    return w;
}

/// Aspect ratio min/max of an l x K matrix.
inline double aspect_ratio(long rows, long cols) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("aoht: empty matrix");
    return rows <= cols ? static_cast<double>(rows) / static_cast<double>(cols)
                        : static_cast<double>(cols) / static_cast<double>(rows);
}

}  // namespace jcov::aoht
