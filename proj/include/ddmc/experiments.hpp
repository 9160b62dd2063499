#ifndef DDMC_EXPERIMENTS_HPP
#define DDMC_EXPERIMENTS_HPP

#include <Eigen/Cholesky>
#include <algorithm>
#include <optional>
#include <vector>

#include "ddmc/simulate.hpp"
#include "ddmc/stats.hpp"

namespace ddmc {

// ---------------------------------------------------------------------------
// Moderate-deviation exit times.

/// Exit times of the Sigma*^-1-weighted deviation from equilibrium, with the
/// exp((1/2 -+ h) K eta^2) bracket.
struct ExitTimeSample {
    double K = 0.0;
    double eta = 0.0;
    double h = 0.0;
    std::vector<double> tau;
    std::vector<bool> censored;  // reached max_horizon instead of the threshold
    double bracket_lower = 0.0;
    double bracket_upper = 0.0;
    double hit_fraction = 0.0;  // uncensored taus inside the open bracket
    bool eta_band_advisory = false;  // K eta^2 outside the recommended 4..8 band
};

/// Simulates the chain from floor(K x*)/K with plain exponential clocks until
/// ||X - x*||_{Sigma*^-1} >= eta, censoring at max_horizon.
inline ExitTimeSample moderate_deviation_times(const Model& m, const EquilibriumReport& eq,
                                               double K, double eta, double h, int replicas,
                                               double max_horizon, RngStream& rng,
                                               int threads = 1) {
    if (!eq.stable) throw std::invalid_argument("moderate_deviation_times: unstable equilibrium");
    Eigen::SelfAdjointEigenSolver<Mat> es(eq.S_star);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument("moderate_deviation_times: S* is not positive definite");
    if (!(eta > 0.0) || !(h >= 0.0) || replicas < 1)
        throw std::invalid_argument("moderate_deviation_times: bad parameters");

    const Mat prec = eq.Sigma_star.llt().solve(Mat::Identity(m.d, m.d));
    const auto weighted_norm = [&](const Vec& v) { return std::sqrt(double(v.dot(prec * v))); };

    // Reachability: eta must be attainable inside the domain.
    double boundary_dist = std::numeric_limits<double>::infinity();
    {
        // Distance from x* to the domain boundary in the weighted norm,
        // probed along coordinate directions and the simplex normal.
        for (int i = 0; i < m.d; ++i) {
            Vec dir = Vec::Zero(m.d);
            dir[i] = 1.0;
            const double wn = weighted_norm(dir);
            boundary_dist = std::min(boundary_dist, (eq.x_star[i] - m.domain.lo[i]) * wn);
            boundary_dist = std::min(boundary_dist, (m.domain.hi[i] - eq.x_star[i]) * wn);
        }
        if (m.domain.simplex) {
            const Vec ones = Vec::Ones(m.d);
            boundary_dist = std::min(boundary_dist, (1.0 - eq.x_star.sum()) *
                                                        weighted_norm(ones) / double(m.d));
        }
    }
    if (eta >= boundary_dist)
        throw std::invalid_argument(
            "moderate_deviation_times: eta unreachable within the domain compact");

    ExitTimeSample out;
    out.K = K;
    out.eta = eta;
    out.h = h;
    out.bracket_lower = std::exp((0.5 - h) * K * eta * eta);
    out.bracket_upper = std::exp((0.5 + h) * K * eta * eta);
    // desk-feasible band for K eta^2 (also covers eta >> K^{-1/2})
    const double keta2 = K * eta * eta;
    out.eta_band_advisory = keta2 < 4.0 || keta2 > 8.0;

    out.tau.assign(std::size_t(replicas), 0.0);
    std::vector<std::uint8_t> cens(std::size_t(replicas), 0);
    const std::uint64_t base = rng.raw();
    for_each_replica(replicas, base, threads, [&](int r, RngStream& s) {
        ChainSimulator sim(m, K, eq.x_star, exponential_channels(s.raw()));
        double t_hit = -1.0;
        Vec dev(m.d);
        while (true) {
            auto ev = sim.step(max_horizon);
            if (!ev) break;
            dev = sim.density() - eq.x_star;
            if (weighted_norm(dev) >= eta) {
                t_hit = ev->t;
                break;
            }
        }
        if (t_hit < 0.0) {
            cens[std::size_t(r)] = 1;
            out.tau[std::size_t(r)] = max_horizon;
        } else {
            out.tau[std::size_t(r)] = t_hit;
        }
    });
    out.censored.assign(cens.begin(), cens.end());
    int hits = 0;
    for (int r = 0; r < replicas; ++r)
        if (!cens[std::size_t(r)] && out.tau[std::size_t(r)] > out.bracket_lower &&
            out.tau[std::size_t(r)] < out.bracket_upper)
            ++hits;
    out.hit_fraction = double(hits) / double(replicas);
    if (hits == 0 && int(std::count(cens.begin(), cens.end(), 1)) == replicas)
        throw std::runtime_error("moderate_deviation_times: all replicas censored");
    return out;
}

// ---------------------------------------------------------------------------
// Logistic chain conditioned on survival.

/// Marginals of the logistic chain conditioned to be alive at t + T.
struct ConditionedEnsemble {
    double K = 0.0;
    double t = 0.0;
    double T = 0.0;
    int replicas = 0;
    int survivors = 0;
    std::vector<double> marginal_at_t;    // X(t) of replicas with X(t+T) > 0
    std::vector<double> rescaled;         // sqrt(K) (X(t) - x*)
    double survival_fraction = 0.0;
};

inline ConditionedEnsemble conditioned_ensemble(double p, double q, double K, double t, double T,
                                                int replicas, RngStream& rng,
                                                std::optional<double> x0 = std::nullopt,
                                                int threads = 1) {
    const Model m = make_logistic_model(p, q);
    const double x_star = p - q;
    const double start = x0.value_or(std::floor(K * x_star) / K);
    if (!(start > 0.0)) throw std::invalid_argument("conditioned_ensemble: x0 must be positive");

    ConditionedEnsemble out;
    out.K = K;
    out.t = t;
    out.T = T;
    out.replicas = replicas;
    std::vector<double> at_t(std::size_t(replicas), -1.0);
    const std::uint64_t base = rng.raw();
    for_each_replica(replicas, base, threads, [&](int r, RngStream& s) {
        ChainSimulator sim(m, K, make_vec({start}), exponential_channels(s.raw()));
        sim.run_to(t);
        const double xt = sim.density()[0];
        if (xt <= 0.0) return;  // extinct before t
        if (T > 0.0) {
            sim.run_to(t + T);
            if (sim.density()[0] <= 0.0) return;  // extinct inside the window
        }
        at_t[std::size_t(r)] = xt;
    });
    for (double v : at_t) {
        if (v < 0.0) continue;
        out.marginal_at_t.push_back(v);
        out.rescaled.push_back(std::sqrt(K) * (v - x_star));
        ++out.survivors;
    }
    out.survival_fraction = double(out.survivors) / double(replicas);
    if (out.survivors == 0)
        throw std::runtime_error("conditioned_ensemble: no surviving replicas (survival estimate 0)");
    return out;
}

/// Comonotone-coupling upper bound on the truncated-distance Wasserstein
/// metric between a sample and N(0, sigma2): sorted samples are matched to
/// the (i-1/2)/n normal quantiles. Any coupling upper-bounds the infimum, so
/// this is a bound, not the exact metric.
inline double wasserstein_truncated_1d(const std::vector<double>& samples, double sigma2) {
    if (samples.empty()) throw std::invalid_argument("wasserstein_truncated_1d: empty sample");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("wasserstein_truncated_1d: sigma2 must be > 0");
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const double sd = std::sqrt(sigma2);
    const double n = double(sorted.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double z = dist::normal_quantile((double(i) + 0.5) / n);
        acc += std::min(std::abs(sorted[i] - sd * z), 1.0);
    }
    return acc / n;
}

// ---------------------------------------------------------------------------
// SIRS cost of the epidemic.

/// Pathwise integrals of the infected density over [0, T], with the
/// prediction mean i* T and variance sigma^2 T / K from the Gaussian
/// expansion.
struct CostSample {
    double K = 0.0;
    double T = 0.0;
    std::vector<double> cost;      // int_0^T I ds per replica (exact)
    std::vector<bool> absorbed;    // infected hit 0 before T
    double sample_mean = 0.0;
    double sample_variance = 0.0;
    double predicted_mean = 0.0;   // i* T
    double predicted_variance = 0.0;  // sigma^2 T / K (matrix route)
};

/// sigma^2 both ways: the matrix route (0 1) F'^-1 S* F'^-T (0 1)^T and the
/// closed formula as printed, plus the formula with (lambda - gamma)
/// substituted for (lambda - theta). The printed factor produces a negative
/// value for theta > lambda; the matrix route is the ground truth here.
struct SigmaOracle {
    double matrix_route = 0.0;
    double printed_formula = 0.0;  // NaN when lambda == theta
    bool printed_defined = true;
    bool printed_agrees = false;
    double substituted_formula = 0.0;
    bool substituted_agrees = false;
};

inline SigmaOracle sigma_oracle(double lambda, double gamma, double theta) {
    if (!(gamma > 0.0) || !(lambda > gamma) || !(theta > 0.0))
        throw std::invalid_argument("sigma_oracle: requires lambda>gamma>0, theta>0");
    const Model m = make_sirs_model(lambda, gamma, theta);
    const Vec x_star = make_vec({gamma / lambda, theta * (lambda - gamma) / (lambda * (gamma + theta))});
    const Mat jac = jacobian(m, x_star);
    const Mat S = diffusion_matrix(m, x_star);
    const Mat jinv = jac.inverse();
    const Vec row = jinv.transpose() * make_vec({0.0, 1.0});
    SigmaOracle out;
    out.matrix_route = row.dot(S * row);
    const auto closed = [&](double pole) {
        return 2.0 * gamma * theta / (lambda * pole * std::pow(gamma + theta, 3)) *
               ((lambda - gamma) * (lambda - gamma) + (gamma + theta) * (lambda + theta));
    };
    if (lambda == theta) {
        out.printed_defined = false;
        out.printed_formula = std::numeric_limits<double>::quiet_NaN();
    } else {
        out.printed_formula = closed(lambda - theta);
        out.printed_agrees =
            std::abs(out.printed_formula - out.matrix_route) <= 1e-8 * std::abs(out.matrix_route);
    }
    out.substituted_formula = closed(lambda - gamma);
    out.substituted_agrees =
        std::abs(out.substituted_formula - out.matrix_route) <= 1e-8 * std::abs(out.matrix_route);
    return out;
}

inline CostSample sirs_cost_samples(double lambda, double gamma, double theta, double K, double T,
                                    int replicas, RngStream& rng, int threads = 1) {
    const Model m = make_sirs_model(lambda, gamma, theta);
    const Vec x_star = make_vec({gamma / lambda, theta * (lambda - gamma) / (lambda * (gamma + theta))});
    CostSample out;
    out.K = K;
    out.T = T;
    out.predicted_mean = x_star[1] * T;
    out.predicted_variance = sigma_oracle(lambda, gamma, theta).matrix_route * T / K;
    out.cost.assign(std::size_t(replicas), 0.0);
    std::vector<std::uint8_t> abs_flags(std::size_t(replicas), 0);
    const std::uint64_t base = rng.raw();
    for_each_replica(replicas, base, threads, [&](int r, RngStream& s) {
        ChainSimulator sim(m, K, x_star, exponential_channels(s.raw()));
        double integral = 0.0, t_prev = 0.0;
        double infected = sim.density()[1];
        while (auto ev = sim.step(T)) {
            integral += infected * (ev->t - t_prev);
            t_prev = ev->t;
            infected = sim.density()[1];
        }
        integral += infected * (T - t_prev);
        if (infected <= 0.0) abs_flags[std::size_t(r)] = 1;
        out.cost[std::size_t(r)] = integral;
    });
    out.absorbed.assign(abs_flags.begin(), abs_flags.end());
    out.sample_mean = stats::mean(out.cost);
    out.sample_variance = stats::variance(out.cost);
    return out;
}

// ---------------------------------------------------------------------------
// Threshold-time scaling study.

struct ThresholdRow {
    double K = 0.0;
    double eps = 0.0;
    int replicas = 0;
    int crossings = 0;
    int truncated = 0;
    double observed_time = 0.0;  // sum over replicas of min(crossing, horizon)
    double p_hat = 0.0;          // crossings per unit observed time
};

struct ThresholdTable {
    double alpha = 0.0;
    std::vector<ThresholdRow> rows;
    bool nonincreasing = false;  // p_hat nonincreasing along increasing K eps(K)
};

/// Coupled runs across scales with eps(K) = alpha log(K)/K; reports the
/// empirical gap-crossing hazard per K and whether it is nonincreasing.
inline ThresholdTable threshold_time_ensemble(const Model& m, const EquilibriumReport& eq,
                                              const std::vector<double>& K_list, double alpha,
                                              int replicas, double max_horizon, RngStream& rng,
                                              const Vec& x0, double dt_grid = 0.005,
                                              int threads = 1) {
    if (!eq.stable) throw std::invalid_argument("threshold_time_ensemble: unstable equilibrium");
    for (std::size_t i = 1; i < K_list.size(); ++i)
        if (K_list[i] <= K_list[i - 1])
            throw std::invalid_argument("threshold_time_ensemble: K_list must be increasing");
    ThresholdTable table;
    table.alpha = alpha;
    for (double K : K_list) {
        ThresholdRow row;
        row.K = K;
        row.eps = alpha * std::log(K) / K;
        row.replicas = replicas;
        std::vector<double> crossing(std::size_t(replicas), -1.0);
        std::vector<double> exposure(std::size_t(replicas), 0.0);
        std::vector<std::uint8_t> trunc(std::size_t(replicas), 0);
        const std::uint64_t base = rng.raw();
        // wide compact: truncation would censor exactly the excursions the
        // hazard estimate is about
        CoupledOptions opts;
        opts.compact_radius_factor = 1.0;
        for_each_replica(replicas, base, threads, [&](int r, RngStream& s) {
            auto path = simulate_coupled(m, eq, K, x0, max_horizon, dt_grid, s, opts);
            trunc[std::size_t(r)] = path.truncated ? 1 : 0;
            auto hit = gap_crossing_time(path, row.eps);
            crossing[std::size_t(r)] = hit ? *hit : -1.0;
            exposure[std::size_t(r)] = path.horizon;  // truncated paths expose less
        });
        for (int r = 0; r < replicas; ++r) {
            row.truncated += trunc[std::size_t(r)];
            if (crossing[std::size_t(r)] >= 0.0) {
                ++row.crossings;
                row.observed_time += std::max(crossing[std::size_t(r)], dt_grid);
            } else {
                row.observed_time += exposure[std::size_t(r)];
            }
        }
        row.p_hat = row.observed_time > 0.0 ? double(row.crossings) / row.observed_time : 0.0;
        table.rows.push_back(row);
    }
    table.nonincreasing = true;
    for (std::size_t i = 1; i < table.rows.size(); ++i)
        table.nonincreasing = table.nonincreasing && table.rows[i].p_hat <= table.rows[i - 1].p_hat + 1e-12;
    return table;
}

}  // namespace ddmc

#endif
