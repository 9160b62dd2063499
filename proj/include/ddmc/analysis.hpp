#ifndef DDMC_ANALYSIS_HPP
#define DDMC_ANALYSIS_HPP

#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ddmc/model.hpp"

namespace ddmc {

/// Equilibrium of the fluid limit together with the local Gaussian data:
/// Jacobian, spectrum, spectral abscissa rho*, local diffusion S* and the
/// stationary covariance Sigma* solving F'(x*) S + S F'(x*)^T = -S*.
struct EquilibriumReport {
    Vec x_star;
    Mat jac;
    std::vector<std::complex<double>> eigenvalues;
    double rho_star = 0.0;
    Mat S_star;
    Mat Sigma_star;
    bool stable = false;
    double residual = 0.0;
    int iterations = 0;

    /// Transitory period (6/rho*) log K after which the stationary process
    /// approximates the fluctuation process.
    double relaxation_time(double K) const { return 6.0 / rho_star * std::log(K); }
};

/// Unique symmetric solution of jac*S + S*jac^T = -S, via vectorization of
/// the d^2 x d^2 Kronecker system. Requires jac Hurwitz.
inline Mat stationary_covariance(const Mat& jac, const Mat& S) {
    const int d = int(jac.rows());
    Eigen::EigenSolver<Mat> es(jac);
    for (int i = 0; i < d; ++i) {
        if (es.eigenvalues()[i].real() >= 0.0)
            throw std::invalid_argument("stationary_covariance: jacobian is not Hurwitz");
    }
    Mat A = Mat::Zero(d * d, d * d);
    const Mat I = Mat::Identity(d, d);
    // vec(J S + S J^T) = (I (x) J + J (x) I) vec(S), column-major vec.
    for (int c = 0; c < d; ++c)
        for (int r = 0; r < d; ++r)
            for (int k = 0; k < d; ++k) {
                A(c * d + r, c * d + k) += jac(r, k);
                A(c * d + r, k * d + r) += jac(c, k);
            }
    Vec rhs(d * d);
    for (int c = 0; c < d; ++c)
        for (int r = 0; r < d; ++r) rhs[c * d + r] = -S(r, c);
    Eigen::FullPivLU<Mat> lu(A);
    if (!lu.isInvertible())
        throw std::runtime_error("stationary_covariance: singular Kronecker system");
    const Vec v = lu.solve(rhs);
    Mat out(d, d);
    for (int c = 0; c < d; ++c)
        for (int r = 0; r < d; ++r) out(r, c) = v[c * d + r];
    return 0.5 * (out + out.transpose());
}

/// Damped Newton iteration on F. Fills the full report on convergence.
inline EquilibriumReport find_equilibrium(const Model& m, const Vec& guess, double tol = 1e-12,
                                          int max_iter = 50) {
    if (!m.domain.interior(guess))
        throw std::invalid_argument("find_equilibrium: guess is not interior to the domain");
    if (!(tol > 0.0)) throw std::invalid_argument("find_equilibrium: tol must be positive");

    Vec x = guess;
    double fnorm = drift(m, x).norm();
    int it = 0;
    while (fnorm > tol && it < max_iter) {
        const Mat j = jacobian(m, x);
        Eigen::FullPivLU<Mat> lu(j);
        // When the Jacobian degenerates at an iterate, step along the flow
        // direction instead; near a stable equilibrium this still decreases
        // ||F|| and the damping loop below guards it.
        const bool singular = !lu.isInvertible();
        const Vec step = singular ? Vec(drift(m, x)) : Vec(lu.solve(-drift(m, x)));
        double lambda = 1.0;
        Vec xn = x + step;
        double fn = m.domain.interior(xn) ? drift(m, xn).norm()
                                          : std::numeric_limits<double>::infinity();
        int halvings = 0;
        while (fn >= fnorm && halvings < 30) {
            lambda *= 0.5;
            xn = x + lambda * step;
            fn = m.domain.interior(xn) ? drift(m, xn).norm()
                                       : std::numeric_limits<double>::infinity();
            ++halvings;
        }
        if (fn >= fnorm) {
            if (singular)
                throw std::runtime_error("find_equilibrium: singular Jacobian at iterate");
            throw std::runtime_error("find_equilibrium: damped step failed to decrease ||F||");
        }
        x = xn;
        fnorm = fn;
        ++it;
    }
    if (fnorm > tol)
        throw std::runtime_error("find_equilibrium: no convergence after max_iter iterations");
    if (!m.domain.interior(x))
        throw std::runtime_error("find_equilibrium: converged point lies on the domain boundary");

    EquilibriumReport rep;
    rep.x_star = x;
    rep.jac = jacobian(m, x);
    rep.residual = fnorm;
    rep.iterations = it;
    Eigen::EigenSolver<Mat> es(rep.jac);
    rep.stable = true;
    rep.rho_star = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m.d; ++i) {
        const std::complex<double> ev = es.eigenvalues()[i];
        rep.eigenvalues.push_back(ev);
        rep.stable = rep.stable && ev.real() < 0.0;
        rep.rho_star = std::min(rep.rho_star, -ev.real());
    }
    rep.S_star = diffusion_matrix(m, x);
    if (rep.stable) rep.Sigma_star = stationary_covariance(rep.jac, rep.S_star);
    return rep;
}

/// Fluid-limit trajectory on a uniform grid with stored derivatives, so that
/// off-grid values interpolate with matching (cubic Hermite) order.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> derivs;
    bool left_domain = false;

    double t_begin() const { return times.front(); }
    double t_end() const { return times.back(); }

    Vec at(double t) const {
        if (t < times.front() - 1e-12 || t > times.back() + 1e-12)
            throw std::out_of_range("Trajectory::at: time outside span");
        if (times.size() == 1) return states[0];
        const double dt = times[1] - times[0];
        std::size_t i = std::min(times.size() - 2, std::size_t(std::max(0.0, (t - times[0]) / dt)));
        // the final cell may be shorter than dt (partial last step)
        const double h = times[i + 1] - times[i];
        const double u = std::clamp((t - times[i]) / h, 0.0, 1.0);
        const double u2 = u * u, u3 = u2 * u;
        return (2 * u3 - 3 * u2 + 1) * states[i] + (u3 - 2 * u2 + u) * h * derivs[i] +
               (-2 * u3 + 3 * u2) * states[i + 1] + (u3 - u2) * h * derivs[i + 1];
    }
};

/// Classical RK4 integration of the Cauchy problem phi' = F(phi), phi(0)=x0.
/// Stops early with left_domain set if the trajectory exits the domain.
inline Trajectory flow(const Model& m, const Vec& x0, double horizon, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("flow: dt must be positive");
    if (!m.domain.contains(x0)) throw std::invalid_argument("flow: x0 outside domain");
    Trajectory traj;
    const int n = int(std::ceil(horizon / dt - 1e-9));
    traj.times.reserve(std::size_t(n) + 1);
    traj.states.reserve(std::size_t(n) + 1);
    traj.derivs.reserve(std::size_t(n) + 1);
    Vec x = x0;
    traj.times.push_back(0.0);
    traj.states.push_back(x);
    traj.derivs.push_back(drift(m, x));
    for (int k = 0; k < n; ++k) {
        const double h = std::min(dt, horizon - double(k) * dt);
        if (h <= 1e-15) break;
        const Vec k1 = drift(m, x);
        const Vec k2 = drift(m, x + 0.5 * h * k1);
        const Vec k3 = drift(m, x + 0.5 * h * k2);
        const Vec k4 = drift(m, x + h * k3);
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite()) throw std::runtime_error("flow: non-finite state");
        if (!m.domain.contains(x)) {
            traj.left_domain = true;
            break;
        }
        traj.times.push_back(std::min(double(k + 1) * dt, horizon));
        traj.states.push_back(x);
        traj.derivs.push_back(drift(m, x));
    }
    return traj;
}

/// Default grid step: resolve the fastest linear time scale once known.
inline double default_flow_dt(double rho_star = 0.0) {
    if (rho_star > 0.0) return std::min(0.01, 0.1 / rho_star);
    return 0.01;
}

/// Principal matrix solution Psi(t,s) of dPsi/dt = F'(phi(t)) Psi, Psi(s,s)=I.
struct PrincipalMatrix {
    double s = 0.0;
    double t = 0.0;
    Mat psi;
};

inline PrincipalMatrix principal_matrix(const Model& m, const Trajectory& traj, double s, double t,
                                        double dt = 0.0) {
    if (s < traj.t_begin() - 1e-12 || t > traj.t_end() + 1e-12)
        throw std::out_of_range("principal_matrix: time outside trajectory span");
    if (t < s) throw std::invalid_argument("principal_matrix: requires t >= s");
    if (dt <= 0.0) dt = traj.times.size() > 1 ? traj.times[1] - traj.times[0] : 0.01;
    Mat psi = Mat::Identity(m.d, m.d);
    const auto rhs = [&](double tau, const Mat& y) { return Mat(jacobian(m, traj.at(tau)) * y); };
    double tau = s;
    while (tau < t - 1e-12) {
        const double h = std::min(dt, t - tau);
        const Mat k1 = rhs(tau, psi);
        const Mat k2 = rhs(tau + 0.5 * h, psi + 0.5 * h * k1);
        const Mat k3 = rhs(tau + 0.5 * h, psi + 0.5 * h * k2);
        const Mat k4 = rhs(tau + h, psi + h * k3);
        psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        tau += h;
    }
    return PrincipalMatrix{s, t, psi};
}

}  // namespace ddmc

#endif
