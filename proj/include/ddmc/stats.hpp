#ifndef DDMC_STATS_HPP
#define DDMC_STATS_HPP

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ddmc/dist.hpp"

namespace ddmc::stats {

inline double mean(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / double(x.size());
}

inline double variance(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / double(x.size() - 1);
}

/// Linear-interpolation quantile of a sorted sample (R type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
    if (sorted.size() == 1) return sorted[0];
    const double h = p * double(sorted.size() - 1);
    const std::size_t i = std::min(sorted.size() - 2, std::size_t(std::floor(h)));
    return sorted[i] + (h - double(i)) * (sorted[i + 1] - sorted[i]);
}

inline double median(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    return quantile_sorted(x, 0.5);
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous cdf.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
    std::sort(x.begin(), x.end());
    const double n = double(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max(d, std::abs(f - double(i) / n));
        d = std::max(d, std::abs(double(i + 1) / n - f));
    }
    return d;
}

/// Asymptotic two-sided KS p-value (Kolmogorov distribution tail).
inline double ks_pvalue(double d, std::size_t n) {
    const double t = (std::sqrt(double(n)) + 0.12 + 0.11 / std::sqrt(double(n))) * d;
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * t * t);
        s += term;
        if (std::abs(term) < 1e-12) break;
    }
    return std::clamp(s, 0.0, 1.0);
}

inline double chi2_pvalue(double stat, double dof) {
    if (dof <= 0.0) return 1.0;
    return boost::math::gamma_q(dof / 2.0, stat / 2.0);
}

/// One-sample chi-square test of observed counts against expected counts.
/// Bins with expected < min_expected are merged into their neighbor.
inline double chi2_gof_pvalue(std::vector<double> observed, std::vector<double> expected,
                              double min_expected = 5.0) {
    std::vector<double> obs, exp;
    double o_acc = 0.0, e_acc = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        o_acc += observed[i];
        e_acc += expected[i];
        if (e_acc >= min_expected) {
            obs.push_back(o_acc);
            exp.push_back(e_acc);
            o_acc = e_acc = 0.0;
        }
    }
    if (e_acc > 0.0 && !exp.empty()) {
        obs.back() += o_acc;
        exp.back() += e_acc;
    }
    if (obs.size() < 2) return 1.0;
    double stat = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i)
        stat += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
    return chi2_pvalue(stat, double(obs.size() - 1));
}

/// Two-sample chi-square homogeneity test on integer-valued samples.
inline double chi2_two_sample_pvalue(const std::vector<std::int64_t>& a,
                                     const std::vector<std::int64_t>& b,
                                     double min_expected = 5.0) {
    std::int64_t lo = a[0], hi = a[0];
    for (auto v : a) { lo = std::min(lo, v); hi = std::max(hi, v); }
    for (auto v : b) { lo = std::min(lo, v); hi = std::max(hi, v); }
    const std::size_t nbins = std::size_t(hi - lo + 1);
    std::vector<double> ca(nbins, 0.0), cb(nbins, 0.0);
    for (auto v : a) ca[std::size_t(v - lo)] += 1.0;
    for (auto v : b) cb[std::size_t(v - lo)] += 1.0;

    // Merge bins until both pooled expectations are adequate.
    std::vector<double> ma, mb;
    double aa = 0.0, bb = 0.0;
    const double ra = double(a.size()) / double(a.size() + b.size());
    for (std::size_t i = 0; i < nbins; ++i) {
        aa += ca[i];
        bb += cb[i];
        const double tot = aa + bb;
        if (tot * ra >= min_expected && tot * (1.0 - ra) >= min_expected) {
            ma.push_back(aa);
            mb.push_back(bb);
            aa = bb = 0.0;
        }
    }
    if ((aa + bb) > 0.0 && !ma.empty()) {
        ma.back() += aa;
        mb.back() += bb;
    }
    if (ma.size() < 2) return 1.0;
    double stat = 0.0;
    const double sa = double(a.size()), sb = double(b.size());
    for (std::size_t i = 0; i < ma.size(); ++i) {
        const double tot = ma[i] + mb[i];
        const double ea = tot * sa / (sa + sb);
        const double eb = tot * sb / (sa + sb);
        stat += (ma[i] - ea) * (ma[i] - ea) / ea + (mb[i] - eb) * (mb[i] - eb) / eb;
    }
    return chi2_pvalue(stat, double(ma.size() - 1));
}

/// Wilson score upper confidence limit for a binomial proportion.
inline double wilson_upper(std::int64_t successes, std::int64_t trials, double confidence = 0.99) {
    if (trials <= 0) throw std::invalid_argument("wilson_upper: no trials");
    const double z = dist::normal_quantile(0.5 + confidence / 2.0);
    const double n = double(trials);
    const double p = double(successes) / n;
    const double z2 = z * z;
    const double center = p + z2 / (2.0 * n);
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    return std::min(1.0, (center + half) / (1.0 + z2 / n));
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear_fit: bad input");
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

}  // namespace ddmc::stats

#endif
