#ifndef DDMC_KMT_HPP
#define DDMC_KMT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "ddmc/rng.hpp"
#include "ddmc/stats.hpp"

namespace ddmc {

/// Jointly sampled Poisson path and Brownian path on [0, T] realizing a
/// strong coupling with sup |P(t) - t - B(t)| growing logarithmically in T.
///
/// Construction: dyadic conditional-quantile scheme. At the top level a
/// single uniform V drives both the Poisson count N = F_Poisson^{-1}(V) and
/// the Brownian endpoint B(T) = Phi^{-1}(V) sqrt(T); each dyadic split reuses
/// one uniform for the Binomial(n, 1/2) child count and the Gaussian bridge
/// midpoint. Both marginals are exact by construction, and within a cell a
/// larger count never maps to a smaller Brownian value.
///
/// Arrival times inside finest cells and off-grid Brownian values are drawn
/// lazily and memoized. Within one pair, a refined point becomes a permanent
/// grid point for subsequent bridge fills, so queries must be presented in a
/// per-pair monotone or bracketed pattern for reproducibility. A pair is
/// single-threaded; distinct pairs may be used concurrently.
class KmtPair {
  public:
    KmtPair(double horizon, int levels, RngStream& rng)
        : horizon_(horizon), levels_(levels), refine_rng_(0) {
        if (!(horizon >= 1.0)) throw std::invalid_argument("KmtPair: horizon must be >= 1");
        if (levels < 0) throw std::invalid_argument("KmtPair: levels must be >= 0");
        if (levels > 30) throw std::invalid_argument("KmtPair: levels too large");
        ncells_ = std::int64_t(1) << levels;
        delta_ = horizon_ / double(ncells_);

        const double v0 = rng.uniform();
        std::vector<std::int64_t> counts{dist::poisson_quantile(horizon_, v0)};
        b_.assign(2, 0.0);
        b_[1] = dist::normal_quantile(v0) * std::sqrt(horizon_);

        for (int l = 0; l < levels; ++l) {
            const double w = horizon_ / double(std::int64_t(1) << l);
            const double mid_sd = 0.5 * std::sqrt(w);
            std::vector<std::int64_t> nc(counts.size() * 2);
            std::vector<double> nb(counts.size() * 2 + 1);
            for (std::size_t i = 0; i < counts.size(); ++i) {
                const double v = rng.uniform();
                const std::int64_t k = dist::binomial_half_quantile(counts[i], v);
                nc[2 * i] = k;
                nc[2 * i + 1] = counts[i] - k;
                nb[2 * i] = b_[i];
                nb[2 * i + 1] = 0.5 * (b_[i] + b_[i + 1]) + mid_sd * dist::normal_quantile(v);
            }
            nb.back() = b_.back();
            counts.swap(nc);
            b_.swap(nb);
        }
        cum_.assign(std::size_t(ncells_) + 1, 0);
        for (std::int64_t i = 0; i < ncells_; ++i)
            cum_[std::size_t(i) + 1] = cum_[std::size_t(i)] + counts[std::size_t(i)];
        refine_rng_ = rng.spawn(0x6b6d74ULL);
    }

    double horizon() const { return horizon_; }
    int levels() const { return levels_; }
    double cell_width() const { return delta_; }
    std::int64_t num_cells() const { return ncells_; }
    std::int64_t total_count() const { return cum_.back(); }

    /// Cumulative Poisson count at the dyadic node `node * cell_width()`.
    std::int64_t count_at_node(std::int64_t node) const { return cum_[std::size_t(node)]; }

    double brownian_at_node(std::int64_t node) const { return b_[std::size_t(node)]; }

    /// Sorted arrival times inside one finest cell (materialized on first
    /// access: conditionally on the count they are i.i.d. uniform).
    const std::vector<double>& arrivals_in_cell(std::int64_t cell) {
        auto it = arrivals_.find(cell);
        if (it != arrivals_.end()) return it->second;
        const std::int64_t m = cum_[std::size_t(cell) + 1] - cum_[std::size_t(cell)];
        std::vector<double> a(std::size_t(m), 0.0);
        const double t0 = double(cell) * delta_;
        for (auto& v : a) v = t0 + delta_ * refine_rng_.uniform();
        std::sort(a.begin(), a.end());
        return arrivals_.emplace(cell, std::move(a)).first->second;
    }

    /// B(t) for any t in [0, T]; dyadic nodes return the stored value, other
    /// points are bridge-filled once and memoized.
    double brownian(double t) {
        if (t < -1e-12 || t > horizon_ + 1e-12)
            throw std::out_of_range("KmtPair::brownian: t outside [0, horizon]");
        const std::int64_t nearest = std::llround(t / delta_);
        if (nearest >= 0 && nearest <= ncells_ && std::abs(t - double(nearest) * delta_) < 1e-9 * delta_)
            return b_[std::size_t(nearest)];
        const std::int64_t cell = std::clamp<std::int64_t>(std::int64_t(t / delta_), 0, ncells_ - 1);
        auto& pts = refined_[cell];
        auto hit = pts.find(t);
        if (hit != pts.end()) return hit->second;
        double t0 = double(cell) * delta_, v0 = b_[std::size_t(cell)];
        double t1 = double(cell + 1) * delta_, v1 = b_[std::size_t(cell) + 1];
        auto up = pts.upper_bound(t);
        if (up != pts.end() && up->first < t1) { t1 = up->first; v1 = up->second; }
        if (up != pts.begin()) {
            auto lo = std::prev(up);
            if (lo->first > t0) { t0 = lo->first; v0 = lo->second; }
        }
        const double frac = (t - t0) / (t1 - t0);
        const double mean = v0 + frac * (v1 - v0);
        const double var = (t1 - t) * frac;
        const double val = mean + std::sqrt(std::max(0.0, var)) * refine_rng_.normal();
        pts.emplace(t, val);
        return val;
    }

    /// Cumulative count just left of t (arrivals strictly before t).
    std::int64_t count_before(double t, std::int64_t cell) {
        const auto& a = arrivals_in_cell(cell);
        const auto it = std::lower_bound(a.begin(), a.end(), t);
        return cum_[std::size_t(cell)] + (it - a.begin());
    }

  private:
    double horizon_;
    int levels_;
    double delta_ = 0.0;
    std::int64_t ncells_ = 1;
    std::vector<std::int64_t> cum_;
    std::vector<double> b_;
    std::unordered_map<std::int64_t, std::vector<double>> arrivals_;
    std::unordered_map<std::int64_t, std::map<double, double>> refined_;
    RngStream refine_rng_;
};

inline int default_levels(double horizon) {
    return std::max(1, int(std::ceil(std::log2(std::max(1.0, horizon / 0.25)))));
}

inline KmtPair sample_coupled_pair(double horizon, int levels, RngStream& rng) {
    return KmtPair(horizon, levels, rng);
}

inline double refine_brownian(KmtPair& pair, double t) { return pair.brownian(t); }

/// sup |P(t) - t - B(t)| over the dyadic grid and both one-sided limits of P
/// at every arrival time. Deterministic on repeated evaluation (memoized).
inline double kmt_error(KmtPair& pair) {
    double err = 0.0;
    const double delta = pair.cell_width();
    for (std::int64_t i = 0; i <= pair.num_cells(); ++i) {
        const double t = double(i) * delta;
        err = std::max(err, std::abs(double(pair.count_at_node(i)) - t - pair.brownian_at_node(i)));
    }
    for (std::int64_t c = 0; c < pair.num_cells(); ++c) {
        if (pair.count_at_node(c + 1) == pair.count_at_node(c)) continue;
        const auto arrivals = pair.arrivals_in_cell(c);  // copy: brownian() mutates caches
        std::int64_t count = pair.count_at_node(c);
        for (double tau : arrivals) {
            const double bt = pair.brownian(tau);
            err = std::max(err, std::abs(double(count) - tau - bt));
            ++count;
            err = std::max(err, std::abs(double(count) - tau - bt));
        }
    }
    return err;
}

// ---------------------------------------------------------------------------
// Statistical validation of the coupling layer.

struct TailCellSpec {
    enum class Kind { poisson_sup, brownian_integral, brownian_oscillation };
    Kind kind = Kind::poisson_sup;
    double S = 1.0;    // window / interval length
    double T = 0.0;    // total horizon (oscillation cells only)
    double A = 1.0;    // threshold
    double rho = 1.0;  // integrand bound (integral cells only)
};

struct TailCellResult {
    TailCellSpec spec;
    double bound = 0.0;
    std::int64_t replicas = 0;
    std::int64_t exceedances = 0;
    double freq = 0.0;
    double wilson99_upper = 0.0;
    bool vacuous = false;  // bound >= 1
    bool skipped = false;  // lemma hypothesis violated
    bool pass = false;
};

struct ErrorGrowth {
    std::vector<double> horizons;
    std::vector<double> medians;
    double c0 = 0.0;  // median ~ c0 + c1 log T
    double c1 = 0.0;
    double r2 = 0.0;
    double tail_horizon = 0.0;
    std::vector<double> tail_x;
    std::vector<double> tail_log_freq;
    double tail_r2 = 0.0;
};

struct TailReport {
    std::vector<TailCellResult> cells;
    std::optional<ErrorGrowth> growth;
};

namespace detail {

/// Exact sup of |P(t) - t| over [0, S] via the arrival representation.
inline double poisson_sup_replica(double S, RngStream& rng) {
    double sup = 0.0, t = 0.0;
    std::int64_t c = 0;
    for (;;) {
        const double tau = t + rng.exponential();
        if (tau >= S) {
            sup = std::max(sup, std::abs(double(c) - S));
            return sup;
        }
        sup = std::max(sup, std::abs(double(c) - tau));
        ++c;
        sup = std::max(sup, std::abs(double(c) - tau));
        t = tau;
    }
}

inline double brownian_sup_replica(double S, RngStream& rng, int steps = 2048) {
    const double sd = std::sqrt(S / double(steps));
    double b = 0.0, sup = 0.0;
    for (int i = 0; i < steps; ++i) {
        b += sd * rng.normal();
        sup = std::max(sup, std::abs(b));
    }
    return sup;
}

/// sup over |t - s| <= S, 0 <= s,t <= T of |B(t) - B(s)| on a grid, via
/// sliding-window extrema.
inline double brownian_oscillation_replica(double S, double T, RngStream& rng, double dt = 0.002) {
    const int n = int(std::ceil(T / dt));
    const int w = std::max(1, int(std::round(S / dt)));
    std::vector<double> b(std::size_t(n) + 1);
    b[0] = 0.0;
    const double sd = std::sqrt(dt);
    for (int i = 1; i <= n; ++i) b[std::size_t(i)] = b[std::size_t(i) - 1] + sd * rng.normal();
    std::vector<int> qmin, qmax;
    std::size_t hmin = 0, hmax = 0;
    double osc = 0.0;
    for (int i = 0; i <= n; ++i) {
        while (qmax.size() > hmax && b[std::size_t(qmax.back())] <= b[std::size_t(i)]) qmax.pop_back();
        qmax.push_back(i);
        while (qmin.size() > hmin && b[std::size_t(qmin.back())] >= b[std::size_t(i)]) qmin.pop_back();
        qmin.push_back(i);
        while (qmax[hmax] < i - w) ++hmax;
        while (qmin[hmin] < i - w) ++hmin;
        osc = std::max(osc, b[std::size_t(qmax[hmax])] - b[std::size_t(qmin[hmin])]);
    }
    return osc;
}

}  // namespace detail

inline double tail_cell_bound(const TailCellSpec& c) {
    switch (c.kind) {
        case TailCellSpec::Kind::poisson_sup:
            return 2.0 * std::exp(-c.A * c.A / (4.0 * c.S));
        case TailCellSpec::Kind::brownian_integral:
            return 2.0 * std::exp(-c.A * c.A / (2.0 * c.S * c.rho * c.rho));
        case TailCellSpec::Kind::brownian_oscillation:
            return 2.0 * std::ceil(c.T / c.S) * std::exp(-c.A * c.A / (18.0 * c.S));
    }
    return 1.0;
}

/// Monte Carlo check of the Chernoff-bound cells. A cell passes when the
/// Wilson 99% upper confidence limit of the empirical exceedance frequency is
/// below the theoretical bound; cells whose bound exceeds 1 are vacuous and
/// auto-pass, cells violating the Poisson lemma hypothesis A <= 2 log(2) S
/// are flagged skipped rather than failed.
inline TailReport validate_tail_bounds(const std::vector<TailCellSpec>& grid, int replicas,
                                       RngStream& rng, int threads = 1) {
    if (replicas < 1000)
        throw std::invalid_argument("validate_tail_bounds: needs at least 1e3 replicas");
    TailReport report;
    for (const auto& spec : grid) {
        TailCellResult cell;
        cell.spec = spec;
        cell.bound = tail_cell_bound(spec);
        cell.vacuous = cell.bound >= 1.0;
        if (spec.kind == TailCellSpec::Kind::poisson_sup && spec.A > 2.0 * std::log(2.0) * spec.S) {
            cell.skipped = true;
            report.cells.push_back(cell);
            continue;
        }
        cell.replicas = replicas;
        const std::uint64_t base = rng.raw();
        std::vector<std::uint8_t> exceeded(std::size_t(replicas), 0);
        for_each_replica(replicas, base, threads, [&](int r, RngStream& s) {
            double sup = 0.0;
            switch (spec.kind) {
                case TailCellSpec::Kind::poisson_sup:
                    sup = detail::poisson_sup_replica(spec.S, s);
                    break;
                case TailCellSpec::Kind::brownian_integral:
                    sup = spec.rho * detail::brownian_sup_replica(spec.S, s);
                    break;
                case TailCellSpec::Kind::brownian_oscillation:
                    sup = detail::brownian_oscillation_replica(spec.S, spec.T, s);
                    break;
            }
            exceeded[std::size_t(r)] = sup >= spec.A ? 1 : 0;
        });
        for (auto e : exceeded) cell.exceedances += e;
        cell.freq = double(cell.exceedances) / double(replicas);
        cell.wilson99_upper = stats::wilson_upper(cell.exceedances, replicas, 0.99);
        cell.pass = cell.vacuous || cell.wilson99_upper <= cell.bound;
        report.cells.push_back(cell);
    }
    return report;
}

/// Median coupling error across horizons, fitted against log T, plus the
/// exceedance tail at one fixed horizon.
inline ErrorGrowth kmt_error_growth(const std::vector<double>& horizons, int replicas,
                                    RngStream& rng, double tail_horizon = 256.0, int threads = 1) {
    ErrorGrowth g;
    g.horizons = horizons;
    g.tail_horizon = tail_horizon;
    std::vector<double> log_t;
    std::vector<double> tail_errors;
    for (double T : horizons) {
        const std::uint64_t base = rng.raw();
        std::vector<double> errors(std::size_t(replicas), 0.0);
        for_each_replica(replicas, base, threads, [&](int r, RngStream& s) {
            KmtPair pair(T, default_levels(T), s);
            errors[std::size_t(r)] = kmt_error(pair);
        });
        g.medians.push_back(stats::median(errors));
        log_t.push_back(std::log(T));
        if (T == tail_horizon) tail_errors = errors;
    }
    if (horizons.size() >= 2) {
        const auto fit = stats::linear_fit(log_t, g.medians);
        g.c0 = fit.intercept;
        g.c1 = fit.slope;
        g.r2 = fit.r2;
    }
    if (tail_errors.empty() && tail_horizon > 0.0) {
        const std::uint64_t base = rng.raw();
        tail_errors.resize(std::size_t(replicas));
        for_each_replica(replicas, base, threads, [&](int r, RngStream& s) {
            KmtPair pair(tail_horizon, default_levels(tail_horizon), s);
            tail_errors[std::size_t(r)] = kmt_error(pair);
        });
    }
    if (!tail_errors.empty()) {
        std::sort(tail_errors.begin(), tail_errors.end());
        const double med = stats::quantile_sorted(tail_errors, 0.5);
        for (double p : {0.5, 0.4, 0.3, 0.22, 0.16, 0.11, 0.08, 0.05}) {
            g.tail_x.push_back(stats::quantile_sorted(tail_errors, 1.0 - p) - med);
            g.tail_log_freq.push_back(std::log(p));
        }
        g.tail_r2 = stats::linear_fit(g.tail_x, g.tail_log_freq).r2;
    }
    return g;
}

}  // namespace ddmc

#endif
