#ifndef DDMC_MODEL_HPP
#define DDMC_MODEL_HPP

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddmc/types.hpp"

namespace ddmc {

/// Sparse multivariate polynomial with an optional nonnegativity clamp.
/// Rate functions of the built-in models and of custom model files are all
/// polynomials times the indicator of the model domain.
struct PolynomialRate {
    struct Term {
        std::vector<int> exps;
        double coeff = 0.0;
    };
    std::vector<Term> terms;
    bool clamp = true;

    double eval_raw(const Vec& x) const {
        double s = 0.0;
        for (const auto& t : terms) {
            double m = t.coeff;
            for (std::size_t i = 0; i < t.exps.size(); ++i) {
                for (int k = 0; k < t.exps[i]; ++k) m *= x[long(i)];
            }
            s += m;
        }
        return s;
    }

    double eval(const Vec& x) const {
        const double v = eval_raw(x);
        return clamp ? std::max(0.0, v) : v;
    }

    /// Analytic gradient by term-wise differentiation. Where the clamp is
    /// active (raw value <= 0) the clamped rate is flat, so the gradient is 0.
    Vec grad(const Vec& x) const {
        Vec g = Vec::Zero(x.size());
        if (clamp && eval_raw(x) <= 0.0) return g;
        for (const auto& t : terms) {
            for (std::size_t i = 0; i < t.exps.size(); ++i) {
                if (t.exps[i] == 0) continue;
                double m = t.coeff * double(t.exps[i]);
                for (std::size_t j = 0; j < t.exps.size(); ++j) {
                    const int e = t.exps[j] - (j == i ? 1 : 0);
                    for (int k = 0; k < e; ++k) m *= x[long(j)];
                }
                g[long(i)] += m;
            }
        }
        return g;
    }
};

/// A density-dependent family: jump vectors E and rate functions beta_e on a
/// domain U. The scale parameter K is supplied per run, never stored here.
/// Models are immutable after construction and safe to share across threads.
struct Model {
    int d = 0;
    std::vector<IVec> jumps;
    std::vector<PolynomialRate> rates;
    Domain domain;
    std::string name;
    std::map<std::string, double> params;
    bool fd_gradients = false;  // centered finite differences instead of polynomial grads

    int num_jumps() const { return int(jumps.size()); }

    /// beta_e(x) with the domain indicator applied.
    double rate(int e, const Vec& x) const {
        if (!domain.contains(x)) return 0.0;
        return rates[std::size_t(e)].eval(x);
    }

    /// All rates at once; `clamped` reports whether any raw polynomial was
    /// negative or x fell outside the domain, letting callers detect exit.
    std::vector<double> rate_values(const Vec& x, bool* clamped = nullptr) const {
        std::vector<double> v(rates.size(), 0.0);
        bool c = !domain.contains(x);
        if (!c) {
            for (std::size_t e = 0; e < rates.size(); ++e) {
                const double raw = rates[e].eval_raw(x);
                if (rates[e].clamp && raw < 0.0) c = true;
                v[e] = rates[e].clamp ? std::max(0.0, raw) : raw;
            }
        }
        if (clamped) *clamped = c;
        return v;
    }

    Vec rate_gradient(int e, const Vec& x) const {
        if (!fd_gradients) return rates[std::size_t(e)].grad(x);
        Vec g(d);
        for (int i = 0; i < d; ++i) {
            const double h = std::max(1e-6, 1e-6 * std::abs(x[i]));
            Vec xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            g[i] = (rates[std::size_t(e)].eval(xp) - rates[std::size_t(e)].eval(xm)) / (2.0 * h);
        }
        return g;
    }
};

namespace detail {
inline double require_param(const std::map<std::string, double>& p, const std::string& key,
                            const std::string& model) {
    auto it = p.find(key);
    if (it == p.end())
        throw std::invalid_argument("model '" + model + "': missing parameter '" + key + "'");
    return it->second;
}
}  // namespace detail

/// Logistic birth-and-death process: d=1, E={+1,-1},
/// beta_1(x) = p x, beta_{-1}(x) = x (q + x), on U = (0, inf), with 0 < q < p.
inline Model make_logistic_model(double p, double q) {
    if (!(q > 0.0)) throw std::invalid_argument("logistic: requires q>0");
    if (!(p > q)) throw std::invalid_argument("logistic: requires p>q");
    Model m;
    m.d = 1;
    m.name = "logistic";
    m.params = {{"p", p}, {"q", q}};
    m.jumps.resize(2);
    m.jumps[0] = IVec::Constant(1, +1);
    m.jumps[1] = IVec::Constant(1, -1);
    m.rates.resize(2);
    m.rates[0].terms = {{{1}, p}};
    m.rates[1].terms = {{{1}, q}, {{2}, 1.0}};
    m.domain = Domain::box(make_vec({0.0}), make_vec({1e30}));
    return m;
}

/// SIRS epidemic model in (s, i) densities: d=2,
/// E = {(-1,1), (0,-1), (1,0)} (infection, recovery, loss of immunity),
/// beta_inf = lambda s i, beta_rec = gamma i, beta_loi = theta (1 - s - i),
/// on the open simplex, with lambda > gamma > 0 and theta > 0.
inline Model make_sirs_model(double lambda, double gamma, double theta) {
    if (!(gamma > 0.0)) throw std::invalid_argument("sirs: requires gamma>0");
    if (!(lambda > gamma)) throw std::invalid_argument("sirs: requires lambda>gamma");
    if (!(theta > 0.0)) throw std::invalid_argument("sirs: requires theta>0");
    Model m;
    m.d = 2;
    m.name = "sirs";
    m.params = {{"lambda", lambda}, {"gamma", gamma}, {"theta", theta}};
    m.jumps.resize(3);
    m.jumps[0] = IVec(2);
    m.jumps[0] << -1, 1;
    m.jumps[1] = IVec(2);
    m.jumps[1] << 0, -1;
    m.jumps[2] = IVec(2);
    m.jumps[2] << 1, 0;
    m.rates.resize(3);
    m.rates[0].terms = {{{1, 1}, lambda}};
    m.rates[1].terms = {{{0, 1}, gamma}};
    m.rates[2].terms = {{{0, 0}, theta}, {{1, 0}, -theta}, {{0, 1}, -theta}};
    m.domain = Domain::box(make_vec({0.0, 0.0}), make_vec({1.0, 1.0}), /*simplex=*/true);
    return m;
}

inline Model make_catalog_model(const std::string& name, const std::map<std::string, double>& params) {
    if (name == "logistic") {
        return make_logistic_model(detail::require_param(params, "p", name),
                                   detail::require_param(params, "q", name));
    }
    if (name == "sirs") {
        return make_sirs_model(detail::require_param(params, "lambda", name),
                               detail::require_param(params, "gamma", name),
                               detail::require_param(params, "theta", name));
    }
    throw std::invalid_argument("unknown catalog model '" + name + "'");
}

/// F(x) = sum_e beta_e(x) e.
inline Vec drift(const Model& m, const Vec& x) {
    Vec f = Vec::Zero(m.d);
    const auto v = m.rate_values(x);
    for (int e = 0; e < m.num_jumps(); ++e) f += v[std::size_t(e)] * m.jumps[std::size_t(e)].cast<double>();
    return f;
}

/// F'(x) = sum_e e grad(beta_e)(x)^T; requires x interior to the domain.
inline Mat jacobian(const Model& m, const Vec& x) {
    if (!m.domain.interior(x))
        throw std::domain_error("jacobian: point is not interior to the model domain");
    Mat j = Mat::Zero(m.d, m.d);
    for (int e = 0; e < m.num_jumps(); ++e)
        j += m.jumps[std::size_t(e)].cast<double>() * m.rate_gradient(e, x).transpose();
    return j;
}

/// Local diffusion S(x) = sum_e beta_e(x) e e^T (symmetric PSD).
inline Mat diffusion_matrix(const Model& m, const Vec& x) {
    Mat s = Mat::Zero(m.d, m.d);
    const auto v = m.rate_values(x);
    for (int e = 0; e < m.num_jumps(); ++e) {
        const Vec je = m.jumps[std::size_t(e)].cast<double>();
        s += v[std::size_t(e)] * je * je.transpose();
    }
    return s;
}

}  // namespace ddmc

#endif
