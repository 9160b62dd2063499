#include <catch2/catch_amalgamated.hpp>

#include "ddmc/model.hpp"
#include "ddmc/model_io.hpp"
#include "ddmc/rng.hpp"
#include "support/oracles.hpp"

using namespace ddmc;

TEST_CASE("logistic catalog model matches the reference rates") {
    const auto m = make_catalog_model("logistic", {{"p", 2.0}, {"q", 1.0}});
    REQUIRE(m.d == 1);
    REQUIRE(m.num_jumps() == 2);
    CHECK(m.jumps[0][0] == 1);
    CHECK(m.jumps[1][0] == -1);
    CHECK(m.rate(0, make_vec({0.5})) == Catch::Approx(1.0).margin(1e-15));
    CHECK(m.rate(1, make_vec({0.5})) == Catch::Approx(0.75).margin(1e-15));
}

TEST_CASE("sirs catalog model matches the reference rates") {
    const auto m = make_catalog_model("sirs", {{"lambda", 2.0}, {"gamma", 1.0}, {"theta", 1.0}});
    REQUIRE(m.d == 2);
    REQUIRE(m.num_jumps() == 3);
    CHECK(m.jumps[0][0] == -1);
    CHECK(m.jumps[0][1] == 1);
    CHECK(m.jumps[1][1] == -1);
    CHECK(m.jumps[2][0] == 1);
    CHECK(m.rate(0, make_vec({0.5, 0.25})) == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("catalog parameter constraints are reported") {
    CHECK_THROWS_WITH(make_catalog_model("logistic", {{"p", 1.0}, {"q", 2.0}}),
                      Catch::Matchers::ContainsSubstring("p>q"));
    CHECK_THROWS_WITH(make_catalog_model("sirs", {{"lambda", 1.0}, {"gamma", 1.0}, {"theta", 1.0}}),
                      Catch::Matchers::ContainsSubstring("lambda>gamma"));
    CHECK_THROWS_WITH(make_catalog_model("wright-fisher", {}),
                      Catch::Matchers::ContainsSubstring("unknown catalog model"));
    CHECK_THROWS_WITH(make_catalog_model("logistic", {{"p", 2.0}}),
                      Catch::Matchers::ContainsSubstring("missing parameter"));
}

TEST_CASE("drift values") {
    const auto m = make_logistic_model(2.0, 1.0);
    CHECK(drift(m, make_vec({1.0}))[0] == Catch::Approx(0.0).margin(1e-15));
    CHECK(drift(m, make_vec({0.5}))[0] == Catch::Approx(0.25).margin(1e-15));
    const auto s = make_sirs_model(2.0, 1.0, 1.0);
    CHECK(drift(s, make_vec({0.5, 0.25})).norm() == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("drift equals an independent rate-times-jump loop on random points") {
    const auto s = make_sirs_model(2.0, 1.0, 1.0);
    RngStream rng(11);
    for (int i = 0; i < 200; ++i) {
        const double a = 0.9 * rng.uniform(), b = (1.0 - a) * 0.9 * rng.uniform();
        const Vec x = make_vec({a, b});
        Vec f = Vec::Zero(2);
        for (int e = 0; e < s.num_jumps(); ++e)
            f += s.rates[std::size_t(e)].eval(x) * s.jumps[std::size_t(e)].cast<double>();
        CHECK((drift(s, x) - f).norm() < 1e-14);
    }
}

TEST_CASE("jacobian values and the finite-difference oracle") {
    const auto m = make_logistic_model(2.0, 1.0);
    CHECK(jacobian(m, make_vec({1.0}))(0, 0) == Catch::Approx(-1.0).margin(1e-14));
    const auto s = make_sirs_model(2.0, 1.0, 1.0);
    Mat ref(2, 2);
    ref << -1.5, -2.0, 0.5, 0.0;
    CHECK((jacobian(s, make_vec({0.5, 0.25})) - ref).cwiseAbs().maxCoeff() < 1e-14);

    // custom polynomial model: analytic gradients against centered differences
    Model c;
    c.d = 2;
    c.name = "custom-quadratic";
    c.jumps.resize(2);
    c.jumps[0] = IVec(2);
    c.jumps[0] << 1, 0;
    c.jumps[1] = IVec(2);
    c.jumps[1] << -1, 1;
    c.rates.resize(2);
    c.rates[0].terms = {{{2, 0}, 0.7}, {{1, 1}, -0.2}, {{0, 0}, 0.5}};
    c.rates[0].clamp = false;
    c.rates[1].terms = {{{0, 2}, 0.4}, {{1, 0}, 0.3}};
    c.rates[1].clamp = false;
    c.domain = Domain::box(make_vec({-2.0, -2.0}), make_vec({2.0, 2.0}));
    RngStream rng(3);
    for (int i = 0; i < 50; ++i) {
        const Vec x = make_vec({2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0});
        const Mat j = jacobian(c, x);
        const double h = 1e-5;
        for (int col = 0; col < 2; ++col) {
            Vec xp = x, xm = x;
            xp[col] += h;
            xm[col] -= h;
            const Vec fd = (drift(c, xp) - drift(c, xm)) / (2.0 * h);
            for (int row = 0; row < 2; ++row) {
                const double scale = std::max(1.0, std::abs(fd[row]));
                CHECK(std::abs(j(row, col) - fd[row]) / scale < 1e-6);
            }
        }
    }
}

TEST_CASE("finite-difference gradient mode agrees with the analytic one") {
    auto m = make_logistic_model(2.0, 1.0);
    const Mat analytic = jacobian(m, make_vec({0.7}));
    m.fd_gradients = true;
    const Mat fd = jacobian(m, make_vec({0.7}));
    CHECK(std::abs(analytic(0, 0) - fd(0, 0)) < 1e-6);
}

TEST_CASE("catalog jacobians match hand-coded analytic matrices at random points") {
    const double p = 2.0, q = 1.0;
    const auto m = make_logistic_model(p, q);
    const double lam = 2.0, gam = 1.0, th = 1.0;
    const auto s = make_sirs_model(lam, gam, th);
    RngStream rng(5);
    for (int i = 0; i < 100; ++i) {
        const double x = 0.05 + 2.0 * rng.uniform();
        CHECK(jacobian(m, make_vec({x}))(0, 0) == Catch::Approx(p - q - 2.0 * x).epsilon(1e-10));
        const double a = 0.02 + 0.9 * rng.uniform();
        const double b = 0.02 + (0.96 - a) * rng.uniform();
        Mat ref(2, 2);
        ref << -lam * b - th, -lam * a - th, lam * b, lam * a - gam;
        CHECK((jacobian(s, make_vec({a, b})) - ref).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("diffusion matrix values and positive semidefiniteness") {
    const auto m = make_logistic_model(2.0, 1.0);
    CHECK(diffusion_matrix(m, make_vec({1.0}))(0, 0) == Catch::Approx(4.0).margin(1e-14));
    // consistency oracle: S(x*) = 2 p (p - q)
    CHECK(diffusion_matrix(m, make_vec({1.0}))(0, 0) ==
          Catch::Approx(2.0 * 2.0 * (2.0 - 1.0)).margin(1e-14));
    CHECK(diffusion_matrix(m, make_vec({0.0})).norm() == 0.0);

    const auto s = make_sirs_model(2.0, 1.0, 1.0);
    Mat ref(2, 2);
    ref << 0.5, -0.25, -0.25, 0.5;
    CHECK((diffusion_matrix(s, make_vec({0.5, 0.25})) - ref).cwiseAbs().maxCoeff() < 1e-14);

    RngStream rng(7);
    for (int i = 0; i < 100; ++i) {
        const double a = 0.98 * rng.uniform(), b = (1.0 - a) * 0.98 * rng.uniform();
        Eigen::SelfAdjointEigenSolver<Mat> es(diffusion_matrix(s, make_vec({a, b})));
        CHECK(es.eigenvalues().minCoeff() >= -1e-12);
        const double x = 3.0 * rng.uniform();
        CHECK(diffusion_matrix(m, make_vec({x}))(0, 0) >= -1e-12);
    }
}

TEST_CASE("clamping is recorded and applied") {
    PolynomialRate r;
    r.terms = {{{1}, 1.0}, {{0}, -0.5}};  // x - 0.5
    CHECK(r.eval(make_vec({0.2})) == 0.0);
    CHECK(r.eval(make_vec({0.9})) == Catch::Approx(0.4));
    r.clamp = false;
    CHECK(r.eval(make_vec({0.2})) == Catch::Approx(-0.3));

    const auto s = make_sirs_model(2.0, 1.0, 1.0);
    bool clamped = false;
    s.rate_values(make_vec({0.3, 0.3}), &clamped);
    CHECK_FALSE(clamped);
    s.rate_values(make_vec({0.9, 0.9}), &clamped);  // outside the simplex
    CHECK(clamped);
    CHECK(s.rate(0, make_vec({0.9, 0.9})) == 0.0);
}

TEST_CASE("gradient is flat where the clamp is active") {
    PolynomialRate r;
    r.terms = {{{1}, 1.0}, {{0}, -0.5}};
    CHECK(r.grad(make_vec({0.2}))[0] == 0.0);
    CHECK(r.grad(make_vec({0.9}))[0] == Catch::Approx(1.0));
}

TEST_CASE("model json round trip") {
    const auto catalog = make_sirs_model(2.0, 1.0, 1.0);
    const auto back = model_from_json(model_to_json(catalog));
    CHECK(back.name == "sirs");
    CHECK(back.rate(0, make_vec({0.5, 0.25})) == Catch::Approx(0.25));

    Model c;
    c.d = 1;
    c.name = "toy";
    c.jumps = {IVec::Constant(1, 2)};
    c.rates.resize(1);
    c.rates[0].terms = {{{1}, 0.5}};
    c.domain = Domain::box(make_vec({0.0}), make_vec({5.0}));
    const auto rc = model_from_json(model_to_json(c));
    RngStream rng(1);
    for (int i = 0; i < 20; ++i) {
        const Vec x = make_vec({5.0 * rng.uniform()});
        CHECK(rc.rate(0, x) == Catch::Approx(c.rate(0, x)));
    }
    CHECK(rc.jumps[0][0] == 2);
}

TEST_CASE("model json rejects malformed documents") {
    CHECK_THROWS(model_from_json(nlohmann::json::parse(R"({"params": {}})")));
    CHECK_THROWS(model_from_json(nlohmann::json::parse(
        R"({"custom": {"d": 1, "jumps": [[0]], "rates": [{"coeffs": [{"exps":[1],"c":1}]}]},
            "domain": {"lo":[0],"hi":[1]}})")));
    CHECK_THROWS(model_from_json(nlohmann::json::parse(
        R"({"custom": {"d": 1, "jumps": [[1]], "rates": [{"coeffs": [{"exps":[1],"c":1}]}]}})")));
}

TEST_CASE("jacobian outside the smooth domain is rejected") {
    const auto s = make_sirs_model(2.0, 1.0, 1.0);
    CHECK_THROWS_AS(jacobian(s, make_vec({0.8, 0.3})), std::domain_error);
}
