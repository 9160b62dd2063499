#include <catch2/catch_amalgamated.hpp>

#include "ddmc/emit.hpp"
#include "ddmc/simulate.hpp"
#include "support/oracles.hpp"

using namespace ddmc;

namespace {
constexpr int kThreads = 2;

Model zero_rate_model() {
    Model c;
    c.d = 1;
    c.name = "frozen";
    c.jumps = {IVec::Constant(1, 1)};
    c.rates.resize(1);
    c.rates[0].terms = {{{0}, 0.0}};
    c.domain = Domain::box(make_vec({0.0}), make_vec({2.0}));
    return c;
}
}  // namespace

TEST_CASE("absorbing state produces no events") {
    const auto m = make_logistic_model(2.0, 1.0);
    const auto path = simulate_ctmc(m, 100.0, make_vec({0.0}), 5.0, exponential_channels(1));
    CHECK(path.events.empty());
    CHECK(path.flags.absorbed);
}

TEST_CASE("chain states stay on the K^-1 lattice and the cursor replays them") {
    const auto m = make_logistic_model(2.0, 1.0);
    const auto path = simulate_ctmc(m, 100.0, make_vec({0.5}), 2.0, exponential_channels(7));
    REQUIRE_FALSE(path.events.empty());
    PathCursor cur(m, path);
    std::int64_t n = path.n0[0];
    for (const auto& ev : path.events) {
        auto step = cur.step();
        REQUIRE(step.has_value());
        CHECK(step->t == ev.t);
        n += m.jumps[std::size_t(ev.jump)][0];
        CHECK(cur.state()[0] == n);
    }
    CHECK_FALSE(cur.step().has_value());
    // density_at is right-continuous at event times
    const auto& first = path.events.front();
    CHECK(density_at(m, path, first.t)[0] ==
          Catch::Approx((double(path.n0[0]) + double(m.jumps[std::size_t(first.jump)][0])) / 100.0));
}

TEST_CASE("event times are strictly increasing") {
    const auto m = make_sirs_model(2.0, 1.0, 1.0);
    const auto path =
        simulate_ctmc(m, 50.0, make_vec({0.5, 0.25}), 5.0, exponential_channels(3));
    for (std::size_t i = 1; i < path.events.size(); ++i)
        CHECK(path.events[i].t > path.events[i - 1].t);
}

TEST_CASE("sirs paths preserve the simplex") {
    const auto m = make_sirs_model(2.0, 1.0, 1.0);
    const auto path =
        simulate_ctmc(m, 50.0, make_vec({0.5, 0.25}), 5.0, exponential_channels(11));
    PathCursor cur(m, path);
    const auto check_state = [&](const IVec& n) {
        CHECK(n[0] >= 0);
        CHECK(n[1] >= 0);
        CHECK(n[0] + n[1] <= 50);
    };
    check_state(path.n0);
    while (cur.step()) check_state(cur.state());
}

TEST_CASE("mean event count matches an independent gillespie oracle") {
    const auto m = make_logistic_model(2.0, 1.0);
    const int n = 1000;
    std::vector<double> ours(n), theirs(n);
    RngStream rng(17);
    const std::uint64_t base = rng.raw();
    for_each_replica(n, base, kThreads, [&](int i, RngStream& s) {
        ours[std::size_t(i)] = double(
            simulate_ctmc(m, 100.0, make_vec({0.5}), 1.0, exponential_channels(s.raw())).events.size());
    });
    for (int i = 0; i < n; ++i)
        theirs[std::size_t(i)] =
            double(oracles::gillespie_event_count(m, 100.0, make_vec({0.5}), 1.0, derive_seed(99, i)));
    const double mu_a = stats::mean(ours), mu_b = stats::mean(theirs);
    const double se =
        std::sqrt(stats::variance(ours) / n + stats::variance(theirs) / n);
    CHECK(std::abs(mu_a - mu_b) <= 3.0 * se);
}

TEST_CASE("kmt channels and exponential clocks generate the same chain law") {
    const auto m = make_logistic_model(2.0, 1.0);
    const auto eq = find_equilibrium(m, make_vec({0.5}));
    const Vec x0 = make_vec({1.0});
    const auto box = WorkingCompact::around_path(eq.x_star, x0, m.domain, 1.0);
    const int n = 5000;
    std::vector<std::int64_t> counts_a(n), counts_b(n), state_a(n), state_b(n);
    RngStream rng(23);
    const std::uint64_t b1 = rng.raw(), b2 = rng.raw();
    for_each_replica(n, b1, kThreads, [&](int i, RngStream& s) {
        const auto p = simulate_ctmc(m, 50.0, x0, 1.0, exponential_channels(s.raw()));
        counts_a[std::size_t(i)] = std::int64_t(p.events.size());
        PathCursor cur(m, p);
        cur.advance_to(1.0);
        state_a[std::size_t(i)] = cur.state()[0];
    });
    for_each_replica(n, b2, kThreads, [&](int i, RngStream& s) {
        const auto p = simulate_ctmc(m, 50.0, x0, 1.0, kmt_channels(m, 50.0, box, s.raw()));
        counts_b[std::size_t(i)] = std::int64_t(p.events.size());
        PathCursor cur(m, p);
        cur.advance_to(1.0);
        state_b[std::size_t(i)] = cur.state()[0];
    });
    CHECK(stats::chi2_two_sample_pvalue(counts_a, counts_b) > 1e-3);
    CHECK(stats::chi2_two_sample_pvalue(state_a, state_b) > 1e-3);
}

TEST_CASE("simulation replays bit-identically under a fixed seed") {
    const auto m = make_sirs_model(2.0, 1.0, 1.0);
    const auto run = [&]() {
        return simulate_ctmc(m, 80.0, make_vec({0.5, 0.25}), 3.0, exponential_channels(555));
    };
    const auto a = run();
    const auto b = run();
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].t == b.events[i].t);
        CHECK(a.events[i].jump == b.events[i].jump);
    }
}

TEST_CASE("internal channel clocks equal the pathwise compensator") {
    const auto m = make_logistic_model(2.0, 1.0);
    ChainSimulator sim(m, 100.0, make_vec({0.5}), exponential_channels(29));
    JumpPath record;
    record.K = 100.0;
    record.n0 = sim.state();
    // march one unit interval, keeping the events
    while (auto ev = sim.step(1.0)) record.events.push_back(*ev);
    // trapezoid over the event list (exact: rates are piecewise constant)
    PathCursor cur(m, record);
    double t_prev = 0.0;
    std::vector<double> integral(2, 0.0);
    Vec x = cur.density();
    for (const auto& ev : record.events) {
        for (int e = 0; e < 2; ++e) integral[std::size_t(e)] += 100.0 * m.rate(e, x) * (ev.t - t_prev);
        cur.step();
        x = cur.density();
        t_prev = ev.t;
    }
    for (int e = 0; e < 2; ++e) integral[std::size_t(e)] += 100.0 * m.rate(e, x) * (1.0 - t_prev);
    for (int e = 0; e < 2; ++e)
        CHECK(sim.clock(e) == Catch::Approx(integral[std::size_t(e)]).margin(1e-9));
}

TEST_CASE("zero-rate model gives a pure rounding gap") {
    const auto m = zero_rate_model();
    EquilibriumReport eq;
    eq.x_star = make_vec({0.775});
    eq.jac = Mat::Constant(1, 1, -1.0);
    eq.stable = true;
    eq.rho_star = 1.0;
    eq.S_star = Mat::Zero(1, 1);
    eq.Sigma_star = Mat::Zero(1, 1);
    RngStream rng(31);
    const auto path = simulate_coupled(m, eq, 10.0, make_vec({0.775}), 2.0, 0.01, rng);
    CHECK(path.jump.events.empty());
    const double rounding = std::abs(std::floor(10.0 * 0.775) / 10.0 - 0.775);
    for (const auto& u : path.U) CHECK(u.norm() == 0.0);
    for (const auto& g : path.gap) CHECK(g.second == Catch::Approx(rounding).margin(1e-12));
    CHECK(path.gap_sup == Catch::Approx(rounding).margin(1e-12));
}

TEST_CASE("coupled simulation rejects invalid input") {
    const auto m = make_logistic_model(2.0, 1.0);
    auto eq = find_equilibrium(m, make_vec({0.5}));
    RngStream rng(1);
    CHECK_THROWS_AS(simulate_coupled(m, eq, 100.0, make_vec({0.5}), 2.0, 0.02, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(simulate_coupled(m, eq, 100.0, make_vec({0.5}), 2.0, 0.0007, rng),
                    std::invalid_argument);
    eq.stable = false;
    CHECK_THROWS_AS(simulate_coupled(m, eq, 100.0, make_vec({0.5}), 2.0, 0.005, rng),
                    std::invalid_argument);
}

TEST_CASE("coupled path bookkeeping is consistent") {
    const auto m = make_logistic_model(2.0, 1.0);
    const auto eq = find_equilibrium(m, make_vec({0.5}));
    RngStream rng(37);
    const auto path = simulate_coupled(m, eq, 100.0, make_vec({0.5}), 3.0, 0.005, rng);
    REQUIRE(path.times.size() == path.X.size());
    REQUIRE(path.times.size() == path.Z.size());
    REQUIRE(path.times.size() == path.U.size());
    // grid aligned with unit boundaries
    CHECK(path.times[200] == 1.0);
    CHECK(path.times[400] == 2.0);
    // the sup field matches the max of the series, which is time-ordered
    double sup = 0.0, t_prev = -1.0;
    for (const auto& g : path.gap) {
        sup = std::max(sup, g.second);
        CHECK(g.first >= t_prev);
        CHECK(g.second >= 0.0);
        t_prev = g.first;
    }
    CHECK(sup == path.gap_sup);
    // Z = phi + U/sqrt(K) on the grid: recompute phi independently
    const auto traj = flow(m, make_vec({0.5}), 3.0, 0.005);
    for (std::size_t k = 0; k < path.times.size(); k += 100) {
        const Vec phi = traj.states[k];
        CHECK((path.Z[k] - phi - path.U[k] / 10.0).norm() < 1e-12);
    }
}

TEST_CASE("gap crossing time semantics") {
    const auto m = make_logistic_model(2.0, 1.0);
    const auto eq = find_equilibrium(m, make_vec({0.5}));
    RngStream rng(43);
    // x0 off the lattice: the rounding gap at time 0 exceeds eps = 0
    const auto path = simulate_coupled(m, eq, 100.0, make_vec({0.503}), 2.0, 0.005, rng);
    const auto at_zero = gap_crossing_time(path, 0.0);
    REQUIRE(at_zero.has_value());
    CHECK(*at_zero == 0.0);
    CHECK_FALSE(gap_crossing_time(path, path.gap_sup + 1e-9).has_value());
    CHECK_THROWS_AS(gap_crossing_time(path, -0.1), std::invalid_argument);
}

TEST_CASE("gap medians contract as K grows") {
    const auto m = make_logistic_model(2.0, 1.0);
    const auto eq = find_equilibrium(m, make_vec({0.5}));
    const auto median_at = [&](double K, std::uint64_t seed) {
        std::vector<double> v(20);
        for_each_replica(20, seed, kThreads, [&](int i, RngStream& s) {
            v[std::size_t(i)] = simulate_coupled(m, eq, K, make_vec({0.5}), 3.0, 0.005, s).gap_sup;
        });
        return stats::median(v);
    };
    CHECK(median_at(10000.0, 71) < median_at(100.0, 72));
}

TEST_CASE("fluctuation process approaches the stationary covariance") {
    // x0 = x*: cov U(t) ~ Sigma* for t >> 1/rho. K large enough that the
    // short-window extraction noise (O(1/(K dt))) sits well inside the 10%
    // tolerance.
    const auto m = make_logistic_model(2.0, 1.0);
    const auto eq = find_equilibrium(m, make_vec({0.5}));
    const double K = 200.0;
    const int n = 10000;
    std::vector<double> u_end(n);
    RngStream rng(53);
    const std::uint64_t base = rng.raw();
    for_each_replica(n, base, kThreads, [&](int i, RngStream& s) {
        const auto path = simulate_coupled(m, eq, K, eq.x_star, 20.0, 0.01, s);
        u_end[std::size_t(i)] = path.U.back()[0];
    });
    const double var = stats::variance(u_end);
    CHECK(std::abs(var - 2.0) / 2.0 < 0.10);
    // the extraction inherits the chain's second-order bias, of scale
    // Sigma*/(rho sqrt(K)); it must stay well below one standard deviation
    CHECK(std::abs(stats::mean(u_end)) < 0.15);
}

TEST_CASE("diffusion tracks the fluid limit in the zero-noise regime") {
    const auto m = make_logistic_model(2.0, 1.0);
    RngStream rng(61);
    RngStream* drv = &rng;
    const auto path = simulate_diffusion(m, 1e12, make_vec({0.5}), 5.0, 0.001, drv);
    const auto traj = flow(m, make_vec({0.5}), 5.0, 0.001);
    double worst = 0.0;
    for (std::size_t k = 0; k < path.times.size(); ++k)
        worst = std::max(worst, (path.Y[k] - traj.states[k]).norm());
    CHECK(worst < 1e-4);
}

TEST_CASE("diffusion fluctuations match the stationary covariance") {
    const auto m = make_logistic_model(2.0, 1.0);
    const double K = 400.0;
    const int n = 10000;
    std::vector<double> dev(n);
    RngStream rng(67);
    const std::uint64_t base = rng.raw();
    for_each_replica(n, base, kThreads, [&](int i, RngStream& s) {
        RngStream* drv = &s;
        const auto path = simulate_diffusion(m, K, make_vec({1.0}), 10.0, 0.01, drv);
        dev[std::size_t(i)] = std::sqrt(K) * (path.Y.back()[0] - 1.0);
    });
    CHECK(std::abs(stats::variance(dev) - 2.0) / 2.0 < 0.10);
}

TEST_CASE("shared drivers satisfy the triangle bookkeeping") {
    const auto m = make_logistic_model(2.0, 1.0);
    const auto eq = find_equilibrium(m, make_vec({0.5}));
    RngStream rng(73);
    CoupledOptions opts;
    opts.keep_drivers = true;
    const auto cp = simulate_coupled(m, eq, 100.0, make_vec({0.5}), 3.0, 0.005, rng, opts);
    const auto dp = simulate_diffusion(m, 100.0, make_vec({0.5}), 3.0, 0.005, &cp.drivers);
    REQUIRE(dp.Y.size() == cp.times.size());
    double xy = 0.0, xz = 0.0, yz = 0.0;
    for (std::size_t k = 0; k < cp.times.size(); ++k) {
        xy = std::max(xy, (cp.X[k] - dp.Y[k]).norm());
        xz = std::max(xz, (cp.X[k] - cp.Z[k]).norm());
        yz = std::max(yz, (dp.Y[k] - cp.Z[k]).norm());
    }
    CHECK(xy <= xz + yz + 1e-12);
    // and the diffusion stays near the chain when driven by the same noise
    CHECK(xy < 0.5);
}

TEST_CASE("driver series mismatch is rejected") {
    const auto m = make_logistic_model(2.0, 1.0);
    DriverSeries ds;
    ds.dt = 0.01;
    CHECK_THROWS_AS(simulate_diffusion(m, 100.0, make_vec({0.5}), 1.0, 0.005, &ds),
                    std::invalid_argument);
}

TEST_CASE("undersized channel horizons trigger flagged extensions") {
    const auto m = make_logistic_model(2.0, 1.0);
    // deliberately tiny compact: sup rates underestimate the path's rates
    WorkingCompact tiny{make_vec({0.99}), make_vec({1.01})};
    const auto path = simulate_ctmc(m, 100.0, make_vec({2.0}), 4.0, kmt_channels(m, 100.0, tiny, 91));
    CHECK(path.flags.channel_redraws > 0);
    CHECK_FALSE(path.events.empty());
}

TEST_CASE("coupled paths leaving the working compact are truncated and flagged") {
    const auto m = make_logistic_model(2.0, 1.0);
    const auto eq = find_equilibrium(m, make_vec({0.5}));
    CoupledOptions opts;
    opts.compact_radius_factor = 0.08;  // narrow box around x*: exits are common
    RngStream rng(97);
    bool saw_truncation = false;
    for (int r = 0; r < 20 && !saw_truncation; ++r) {
        const auto path = simulate_coupled(m, eq, 100.0, eq.x_star, 10.0, 0.01, rng, opts);
        if (path.truncated) {
            saw_truncation = true;
            CHECK(path.jump.flags.compact_exit);
            CHECK(path.horizon < 10.0);
            CHECK(std::isfinite(path.jump.flags.halt_time));
        }
    }
    CHECK(saw_truncation);
}

TEST_CASE("coupled path csv has the documented columns") {
    const auto m = make_logistic_model(2.0, 1.0);
    const auto eq = find_equilibrium(m, make_vec({0.5}));
    RngStream rng(101);
    const auto path = simulate_coupled(m, eq, 100.0, make_vec({0.5}), 1.0, 0.01, rng);
    const std::string csv = coupled_path_csv(path);
    CHECK(csv.rfind("t,X_1,Z_1,gap\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == long(path.times.size()) + 1);
}
