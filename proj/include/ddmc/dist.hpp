#ifndef DDMC_DIST_HPP
#define DDMC_DIST_HPP

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <cstdint>
#include <stdexcept>

// Exact distribution primitives. All sampling in this project is driven by
// open-(0,1) uniforms pushed through quantile transforms, so every stream is
// reproducible from raw engine output alone.

namespace ddmc::dist {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p outside (0,1)");
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

inline double poisson_pmf(std::int64_t k, double mean) {
    if (k < 0) return 0.0;
    return std::exp(double(k) * std::log(mean) - mean - std::lgamma(double(k) + 1.0));
}

/// P(N <= k) for N ~ Poisson(mean).
inline double poisson_cdf(std::int64_t k, double mean) {
    if (k < 0) return 0.0;
    return boost::math::gamma_q(double(k) + 1.0, mean);
}

/// Smallest k with P(N <= k) >= v; the smoothed-quantile inverse used for
/// coupled sampling: pushing the same v through normal_quantile yields the
/// comonotone Gaussian partner.
inline std::int64_t poisson_quantile(double mean, double v) {
    if (!(mean >= 0.0)) throw std::invalid_argument("poisson_quantile: negative mean");
    if (mean == 0.0) return 0;
    if (mean < 30.0) {
        double pmf = std::exp(-mean);
        double cdf = pmf;
        std::int64_t k = 0;
        const std::int64_t kmax = static_cast<std::int64_t>(mean + 40.0 * std::sqrt(mean) + 64.0);
        while (cdf < v && k < kmax) {
            ++k;
            pmf *= mean / double(k);
            cdf += pmf;
        }
        return k;
    }
    // Normal-approximation guess, then exact walk with the pmf recursion.
    std::int64_t k = static_cast<std::int64_t>(std::floor(mean + std::sqrt(mean) * normal_quantile(v)));
    if (k < 0) k = 0;
    double cdf = poisson_cdf(k, mean);
    double pmf = poisson_pmf(k, mean);
    if (cdf >= v) {
        while (k > 0) {
            double below = cdf - pmf;
            if (below < v) break;
            cdf = below;
            pmf *= double(k) / mean;
            --k;
        }
        return k;
    }
    while (cdf < v) {
        ++k;
        pmf *= mean / double(k);
        cdf += pmf;
    }
    return k;
}

inline double binomial_half_pmf(std::int64_t k, std::int64_t n) {
    if (k < 0 || k > n) return 0.0;
    return std::exp(std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) -
                    std::lgamma(double(n - k) + 1.0) - double(n) * std::log(2.0));
}

/// P(X <= k) for X ~ Binomial(n, 1/2).
inline double binomial_half_cdf(std::int64_t k, std::int64_t n) {
    if (k < 0) return 0.0;
    if (k >= n) return 1.0;
    return boost::math::ibeta(double(n - k), double(k) + 1.0, 0.5);
}

/// Smallest k with P(X <= k) >= v, X ~ Binomial(n, 1/2).
inline std::int64_t binomial_half_quantile(std::int64_t n, double v) {
    if (n < 0) throw std::invalid_argument("binomial_half_quantile: negative n");
    if (n == 0) return 0;
    if (n <= 64) {
        double pmf = std::pow(0.5, double(n));
        double cdf = pmf;
        std::int64_t k = 0;
        while (cdf < v && k < n) {
            pmf *= double(n - k) / double(k + 1);
            ++k;
            cdf += pmf;
        }
        return k;
    }
    const double mu = 0.5 * double(n);
    const double sd = 0.5 * std::sqrt(double(n));
    std::int64_t k = static_cast<std::int64_t>(std::floor(mu + sd * normal_quantile(v)));
    if (k < 0) k = 0;
    if (k > n) k = n;
    double cdf = binomial_half_cdf(k, n);
    double pmf = binomial_half_pmf(k, n);
    if (cdf >= v) {
        while (k > 0) {
            double below = cdf - pmf;
            if (below < v) break;
            cdf = below;
            pmf *= double(k) / double(n - k + 1);
            --k;
        }
        return k;
    }
    while (cdf < v && k < n) {
        pmf *= double(n - k) / double(k + 1);
        ++k;
        cdf += pmf;
    }
    return k;
}

}  // namespace ddmc::dist

#endif
