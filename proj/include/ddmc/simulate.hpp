#ifndef DDMC_SIMULATE_HPP
#define DDMC_SIMULATE_HPP

#include <functional>
#include <memory>
#include <optional>
#include <variant>

#include "ddmc/analysis.hpp"
#include "ddmc/kmt.hpp"
#include "ddmc/model.hpp"

namespace ddmc {

/// Hyper-rectangle x* +/- r on which rate sups and channel horizons are
/// computed; simulated paths leaving it are truncated and flagged.
struct WorkingCompact {
    Vec lo, hi;

    bool contains(const Vec& x) const {
        for (int i = 0; i < x.size(); ++i)
            if (x[i] < lo[i] || x[i] > hi[i]) return false;
        return true;
    }

    static WorkingCompact around(const Vec& x_star, const Domain& dom, double radius_factor = 0.5) {
        const double r = radius_factor * dom.boundary_distance(x_star);
        if (!(r > 0.0))
            throw std::invalid_argument("WorkingCompact: center has no interior margin");
        return WorkingCompact{Vec(x_star.array() - r), Vec(x_star.array() + r)};
    }

    /// Compact for a coupled run: the hull of {x*, x0} expanded by r on each
    /// side and clipped to the domain closure. The compact's job is to bound
    /// the rates (channel horizons), so it must contain the whole plausible
    /// path, not just a ball around x*.
    static WorkingCompact around_path(const Vec& x_star, const Vec& x0, const Domain& dom,
                                      double radius_factor = 0.5) {
        const double r = radius_factor * dom.boundary_distance(x_star);
        if (!(r > 0.0))
            throw std::invalid_argument("WorkingCompact: center has no interior margin");
        WorkingCompact box;
        box.lo = x_star;
        box.hi = x_star;
        for (int i = 0; i < x_star.size(); ++i) {
            box.lo[i] = std::max(dom.lo[i], std::min(x_star[i], x0[i]) - r);
            box.hi[i] = std::min(dom.hi[i], std::max(x_star[i], x0[i]) + r);
        }
        return box;
    }
};

/// Grid-scan estimate of sup beta_e over the compact. The 1.5x channel
/// horizon margin plus flagged extensions absorb the scan error.
inline double sup_rate_on_compact(const Model& m, int e, const WorkingCompact& box,
                                  int pts_per_dim = 33) {
    double sup = 0.0;
    Vec x(m.d);
    std::vector<int> idx(std::size_t(m.d), 0);
    for (;;) {
        for (int i = 0; i < m.d; ++i)
            x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * double(idx[std::size_t(i)]) / double(pts_per_dim - 1);
        sup = std::max(sup, m.rates[std::size_t(e)].eval(x));
        int i = 0;
        while (i < m.d && ++idx[std::size_t(i)] == pts_per_dim) idx[std::size_t(i++)] = 0;
        if (i == m.d) break;
    }
    return sup;
}

/// One Poisson arrival channel of the per-unit-interval construction.
/// `next_arrival_after(u)` is queried with nondecreasing internal clocks.
class Channel {
  public:
    virtual ~Channel() = default;
    virtual double next_arrival_after(double u) = 0;
    /// Brownian partner value at internal time u (KMT channels only).
    virtual double brownian(double u) {
        (void)u;
        throw std::logic_error("channel has no Brownian partner");
    }
    virtual int extension_redraws() const { return 0; }
};

/// Plain exponential clock: arrivals are cumulative Exp(1) gaps. With this
/// channel the event loop is the standard next-reaction method.
class ExponentialChannel final : public Channel {
  public:
    explicit ExponentialChannel(std::uint64_t seed) : rng_(seed), next_(rng_.exponential()) {}

    double next_arrival_after(double u) override {
        while (next_ <= u) next_ += rng_.exponential();
        return next_;
    }

  private:
    RngStream rng_;
    double next_;
};

/// Arrival channel backed by the Poisson component of a KmtPair; the
/// Brownian partner drives the Gaussian fluctuation process. If the internal
/// clock outruns the pair horizon (rate exceeded the compact bound), the
/// channel continues with an independent exponential/Brownian extension and
/// counts the redraw.
class KmtChannel final : public Channel {
  public:
    KmtChannel(double horizon, int levels, std::uint64_t seed)
        : rng_(seed), pair_(horizon, levels, rng_), ext_rng_(rng_.spawn(0x657874ULL)) {}

    double next_arrival_after(double u) override {
        if (pending_ > u) return pending_;
        const double T = pair_.horizon();
        if (u < T) {
            std::int64_t c = std::max<std::int64_t>(scan_cell_, std::int64_t(u / pair_.cell_width()));
            for (; c < pair_.num_cells(); ++c) {
                const auto& a = pair_.arrivals_in_cell(c);
                auto it = std::upper_bound(a.begin(), a.end(), u);
                if (it != a.end()) {
                    scan_cell_ = c;
                    pending_ = *it;
                    return pending_;
                }
            }
            scan_cell_ = pair_.num_cells();
        }
        // Past the pair horizon: flagged independent extension.
        if (ext_next_ < 0.0) {
            ++redraws_;
            ext_next_ = T + ext_rng_.exponential();
        }
        while (ext_next_ <= u) ext_next_ += ext_rng_.exponential();
        pending_ = ext_next_;
        return pending_;
    }

    double brownian(double u) override {
        if (u <= pair_.horizon()) return pair_.brownian(u);
        if (ext_b_t_ < 0.0) {
            ext_b_t_ = pair_.horizon();
            ext_b_val_ = pair_.brownian(ext_b_t_);
            ++redraws_;
        }
        if (u <= ext_b_t_)
            throw std::logic_error("KmtChannel: non-monotone Brownian query beyond horizon");
        ext_b_val_ += std::sqrt(u - ext_b_t_) * ext_rng_.normal();
        ext_b_t_ = u;
        return ext_b_val_;
    }

    int extension_redraws() const override { return redraws_; }
    KmtPair& pair() { return pair_; }

  private:
    RngStream rng_;
    KmtPair pair_;
    RngStream ext_rng_;
    std::int64_t scan_cell_ = 0;
    double pending_ = -1.0;
    double ext_next_ = -1.0;
    double ext_b_t_ = -1.0;
    double ext_b_val_ = 0.0;
    int redraws_ = 0;
};

using ChannelFactory = std::function<std::unique_ptr<Channel>(int jump_index, int interval)>;

/// Factory for plain exponential clocks (exact CTMC, no coupling).
inline ChannelFactory exponential_channels(std::uint64_t base_seed) {
    return [base_seed](int e, int j) -> std::unique_ptr<Channel> {
        return std::make_unique<ExponentialChannel>(
            derive_seed(base_seed, 0xe0ULL, std::uint64_t(e), std::uint64_t(j)));
    };
}

/// Factory for KMT-coupled channels; horizons are ceil(1.5 K sup beta_e)+8
/// per unit interval, finest dyadic cells about 0.25 time units.
inline ChannelFactory kmt_channels(const Model& m, double K, const WorkingCompact& box,
                                   std::uint64_t base_seed) {
    std::vector<double> horizons;
    for (int e = 0; e < m.num_jumps(); ++e)
        horizons.push_back(std::ceil(1.5 * K * sup_rate_on_compact(m, e, box)) + 8.0);
    return [horizons, base_seed](int e, int j) -> std::unique_ptr<Channel> {
        const double T = horizons[std::size_t(e)];
        return std::make_unique<KmtChannel>(
            T, default_levels(T), derive_seed(base_seed, 0x6bULL, std::uint64_t(e), std::uint64_t(j)));
    };
}

struct Event {
    double t;
    int jump;
};

struct PathFlags {
    bool absorbed = false;      // all rates vanished
    bool domain_exit = false;   // jumped out of the model domain
    bool compact_exit = false;  // left the working compact (path truncated)
    double halt_time = std::numeric_limits<double>::quiet_NaN();
    int channel_redraws = 0;
};

/// Exact chain trajectory: initial state floor(K x0)/K, event list, and the
/// right-continuous piecewise-constant evaluator. States live on the K^-1 Z^d
/// lattice exactly (integer arithmetic internally).
struct JumpPath {
    double K = 1.0;
    IVec n0;
    double horizon = 0.0;
    std::vector<Event> events;
    PathFlags flags;
};

/// Sweeps a jump path forward in time, maintaining the integer state.
class PathCursor {
  public:
    PathCursor(const Model& m, const JumpPath& p) : model_(&m), path_(&p), n_(p.n0) {}

    /// Advance to time t (right-continuous: events at exactly t are applied).
    const IVec& advance_to(double t) {
        while (next_ < path_->events.size() && path_->events[next_].t <= t) {
            n_ += model_->jumps[std::size_t(path_->events[next_].jump)];
            ++next_;
        }
        return n_;
    }

    /// Apply the next single event; returns it, or nullopt if exhausted.
    std::optional<Event> step() {
        if (next_ >= path_->events.size()) return std::nullopt;
        const Event ev = path_->events[next_++];
        n_ += model_->jumps[std::size_t(ev.jump)];
        return ev;
    }

    const IVec& state() const { return n_; }
    Vec density() const { return n_.cast<double>() / path_->K; }
    std::size_t position() const { return next_; }

  private:
    const Model* model_;
    const JumpPath* path_;
    IVec n_;
    std::size_t next_ = 0;
};

/// Right-continuous value X(t) of a jump path (fresh sweep; for sequential
/// access use PathCursor).
inline Vec density_at(const Model& m, const JumpPath& p, double t) {
    PathCursor cur(m, p);
    cur.advance_to(t);
    return cur.density();
}

/// Event-driven exact simulation of the density-dependent chain via
/// per-unit-interval time-changed Poisson channels. Between jumps all rates
/// are constant, so each channel's internal clock advances linearly; the next
/// event is the channel whose (arrival - clock)/(K beta_e) is minimal.
/// Channels renew with fresh streams at every integer time.
class ChainSimulator {
  public:
    ChainSimulator(const Model& m, double K, const Vec& x0, ChannelFactory factory,
                   std::optional<WorkingCompact> compact = std::nullopt)
        : model_(&m), K_(K), factory_(std::move(factory)), compact_(std::move(compact)) {
        if (!(K > 0.0)) throw std::invalid_argument("ChainSimulator: K must be positive");
        if (!m.domain.contains(x0)) throw std::invalid_argument("ChainSimulator: x0 outside domain");
        n_.resize(m.d);
        for (int i = 0; i < m.d; ++i) n_[i] = std::int64_t(std::floor(K * x0[i]));
        density_.resize(m.d);
        rates_.resize(std::size_t(m.num_jumps()));
        channels_.resize(std::size_t(m.num_jumps()));
        clocks_.assign(std::size_t(m.num_jumps()), 0.0);
        make_channels(0);
    }

    double time() const { return t_; }
    const IVec& state() const { return n_; }
    Vec density() const { return n_.cast<double>() / K_; }
    int interval() const { return interval_; }
    const PathFlags& flags() const { return flags_; }
    bool halted() const { return halted_; }
    Channel& channel(int e) { return *channels_[std::size_t(e)]; }
    double clock(int e) const { return clocks_[std::size_t(e)]; }

    /// Advance until the next event or t_stop, whichever comes first.
    /// Returns the event, or nullopt once t_stop (or a halt) is reached.
    /// Channels of interval j stay accessible until stepping past time j+1.
    std::optional<Event> step(double t_stop) {
        while (!halted_ && t_ < t_stop - 1e-15) {
            if (t_ >= double(interval_ + 1) - 1e-12) {
                collect_redraws();
                ++interval_;
                make_channels(interval_);
            }
            const double stop = std::min(t_stop, double(interval_ + 1));
            refresh_density();
            bool any = false;
            double best_dt = std::numeric_limits<double>::infinity();
            int best_e = -1;
            double best_arrival = 0.0;
            for (int e = 0; e < model_->num_jumps(); ++e) {
                const double lam = K_ * model_->rate(e, density_);
                rates_[std::size_t(e)] = lam;
                if (lam <= 0.0) continue;
                any = true;
                const double a = channels_[std::size_t(e)]->next_arrival_after(clocks_[std::size_t(e)]);
                const double dte = (a - clocks_[std::size_t(e)]) / lam;
                if (dte < best_dt) {
                    best_dt = dte;
                    best_e = e;
                    best_arrival = a;
                }
            }
            if (!any) {
                flags_.absorbed = true;
                t_ = stop;
                continue;
            }
            if (t_ + best_dt > stop) {
                const double span = stop - t_;
                for (int e = 0; e < model_->num_jumps(); ++e)
                    clocks_[std::size_t(e)] += rates_[std::size_t(e)] * span;
                t_ = stop;
                continue;
            }
            for (int e = 0; e < model_->num_jumps(); ++e)
                clocks_[std::size_t(e)] += rates_[std::size_t(e)] * best_dt;
            clocks_[std::size_t(best_e)] = best_arrival;  // exact landing
            t_ += best_dt;
            n_ += model_->jumps[std::size_t(best_e)];
            const Event ev{t_, best_e};
            refresh_density();
            if (!model_->domain.contains(density_)) {
                flags_.domain_exit = true;
                flags_.halt_time = t_;
                halted_ = true;
            } else if (compact_ && !compact_->contains(density_)) {
                flags_.compact_exit = true;
                flags_.halt_time = t_;
                halted_ = true;
            }
            return ev;
        }
        return std::nullopt;
    }

    /// Run to t_stop, optionally recording events into a JumpPath.
    void run_to(double t_stop, JumpPath* record = nullptr) {
        while (auto ev = step(t_stop)) {
            if (record) record->events.push_back(*ev);
        }
    }

    int total_redraws() {
        collect_redraws();
        return flags_.channel_redraws;
    }

  private:
    void refresh_density() {
        for (int i = 0; i < model_->d; ++i) density_[i] = double(n_[i]) / K_;
    }

    void make_channels(int j) {
        for (int e = 0; e < model_->num_jumps(); ++e) channels_[std::size_t(e)] = factory_(e, j);
        std::fill(clocks_.begin(), clocks_.end(), 0.0);
    }

    void collect_redraws() {
        for (auto& ch : channels_)
            if (ch) flags_.channel_redraws += ch->extension_redraws();
    }

    const Model* model_;
    double K_;
    ChannelFactory factory_;
    std::optional<WorkingCompact> compact_;
    IVec n_;
    Vec density_;
    std::vector<double> rates_;
    std::vector<std::unique_ptr<Channel>> channels_;
    std::vector<double> clocks_;
    double t_ = 0.0;
    int interval_ = 0;
    bool halted_ = false;
    PathFlags flags_;
};

/// Exact CTMC sample path on [0, horizon].
inline JumpPath simulate_ctmc(const Model& m, double K, const Vec& x0, double horizon,
                              const ChannelFactory& factory,
                              std::optional<WorkingCompact> compact = std::nullopt) {
    if (!(horizon > 0.0)) throw std::invalid_argument("simulate_ctmc: horizon must be positive");
    ChainSimulator sim(m, K, x0, factory, std::move(compact));
    JumpPath path;
    path.K = K;
    path.n0 = sim.state();
    path.horizon = horizon;
    sim.run_to(horizon, &path);
    path.flags = sim.flags();
    path.flags.channel_redraws = sim.total_redraws();
    return path;
}

/// Brownian-driver increments shared between the coupled run and the
/// diffusion diagnostic: dW[step][jump].
struct DriverSeries {
    double dt = 0.0;
    std::vector<std::vector<double>> dW;
};

/// Coupled sample of the exact chain X and its Gaussian approximation
/// Z = phi + U/sqrt(K) on a uniform grid, with the running gap evaluated on
/// grid points plus both one-sided limits at every jump time.
struct CoupledPath {
    double K = 0.0;
    double dt = 0.0;
    double horizon = 0.0;  // effective (truncated if the chain left the compact)
    std::vector<double> times;
    std::vector<Vec> X;  // chain on the grid (right-continuous values)
    std::vector<Vec> Z;
    std::vector<Vec> U;
    std::vector<std::pair<double, double>> gap;  // (t, ||X-Z||), time-ordered
    double gap_sup = 0.0;
    JumpPath jump;
    DriverSeries drivers;
    bool truncated = false;
};

struct CoupledOptions {
    double compact_radius_factor = 0.5;
    double beta_min_factor = 1e-8;  // threshold = factor x (compact rate scale)
    bool keep_drivers = false;
};

/// Coupled pipeline: (1) exact chain via KMT channels; (2) fluid limit on the
/// same grid; (3) Brownian driver increments read off the chain's exact time
/// change (the channels' internal clocks), rescaled to variance dt, with an
/// independent Gaussian fallback where the rate is below beta_min; (4)
/// Euler-Maruyama for the fluctuation SDE
/// dU = F'(phi) U dt + sum_e sqrt(beta_e(phi)) dW_e e; (5) Z = phi + U/sqrt(K).
inline CoupledPath simulate_coupled(const Model& m, const EquilibriumReport& eq, double K,
                                    const Vec& x0, double horizon, double dt_grid, RngStream& rng,
                                    const CoupledOptions& opts = {}) {
    if (!eq.stable)
        throw std::invalid_argument("simulate_coupled: equilibrium is not stable; refusing");
    if (!(dt_grid > 0.0) || dt_grid > 0.01 + 1e-12)
        throw std::invalid_argument("simulate_coupled: requires 0 < dt_grid <= 0.01");
    const int steps_per_unit = int(std::llround(1.0 / dt_grid));
    if (std::abs(1.0 / dt_grid - double(steps_per_unit)) > 1e-6)
        throw std::invalid_argument("simulate_coupled: dt_grid must divide the unit interval");
    const auto box = WorkingCompact::around_path(eq.x_star, x0, m.domain, opts.compact_radius_factor);

    double rate_scale = 0.0;
    for (int e = 0; e < m.num_jumps(); ++e)
        rate_scale = std::max(rate_scale, sup_rate_on_compact(m, e, box));
    const double beta_min = opts.beta_min_factor * rate_scale;

    const std::uint64_t channel_base = rng.raw();
    RngStream aux = rng.spawn(0x617578ULL);

    const int n_steps = int(std::llround(horizon * double(steps_per_unit)));
    const double t_end = double(n_steps) / double(steps_per_unit);
    const int ne = m.num_jumps();

    Trajectory phi = flow(m, x0, t_end + 0.5 * dt_grid, dt_grid);
    if (phi.left_domain)
        throw std::runtime_error("simulate_coupled: fluid limit left the domain before horizon");

    ChainSimulator sim(m, K, x0, kmt_channels(m, K, box, channel_base), box);

    CoupledPath out;
    out.K = K;
    out.dt = dt_grid;
    out.jump.K = K;
    out.jump.n0 = sim.state();
    out.jump.horizon = t_end;
    if (opts.keep_drivers) out.drivers.dt = dt_grid;

    Vec U = Vec::Zero(m.d);
    const Vec x_lattice = sim.state().cast<double>() / K;
    out.times.push_back(0.0);
    out.X.push_back(x_lattice);
    out.U.push_back(U);
    out.Z.push_back(phi.states[0]);
    out.gap.emplace_back(0.0, (x_lattice - phi.states[0]).norm());

    std::vector<double> clocks(std::size_t(ne), 0.0);
    std::size_t event_lo = 0;  // first event index of the current step
    bool halted = false;
    int k_stop = n_steps;

    for (int k = 0; k < n_steps && !halted; ++k) {
        const double t0 = double(k) / double(steps_per_unit);
        const double t1 = double(k + 1) / double(steps_per_unit);
        if (k % steps_per_unit == 0) std::fill(clocks.begin(), clocks.end(), 0.0);

        const Vec x_state = sim.density();  // X(t0), right-continuous
        // March the chain across the step. Channels renew lazily when the
        // simulator first steps into a new unit interval, so at interval
        // starts the extraction clock restarts from zero.
        while (auto ev = sim.step(t1)) out.jump.events.push_back(*ev);
        if (sim.halted()) {
            halted = true;
            k_stop = k;
            break;
        }

        // Driver increments through the chain's exact time change: the
        // channel clock advance over the step is K int beta_e(X) ds, and the
        // Brownian partner increment over it is rescaled to variance dt.
        std::vector<double> dW(std::size_t(ne), 0.0);
        for (int e = 0; e < ne; ++e) {
            const double u0 = clocks[std::size_t(e)];
            const double u1 = sim.clock(e);
            clocks[std::size_t(e)] = u1;
            if (u1 - u0 > K * beta_min * dt_grid) {
                const double b0 = sim.channel(e).brownian(u0);
                const double b1 = sim.channel(e).brownian(u1);
                dW[std::size_t(e)] = (b1 - b0) * std::sqrt(dt_grid / (u1 - u0));
            } else {
                dW[std::size_t(e)] = aux.normal(0.0, std::sqrt(dt_grid));
            }
        }

        // Euler-Maruyama step of the fluctuation SDE along phi.
        const Vec& phi0 = phi.states[std::size_t(k)];
        Vec dU = jacobian(m, phi0) * U * dt_grid;
        for (int e = 0; e < ne; ++e) {
            const double beta_phi = m.rate(e, phi0);
            if (beta_phi > 0.0)
                dU += std::sqrt(beta_phi) * dW[std::size_t(e)] * m.jumps[std::size_t(e)].cast<double>();
        }
        U += dU;
        if (!U.allFinite()) throw std::runtime_error("simulate_coupled: non-finite fluctuation state");
        if (opts.keep_drivers) out.drivers.dW.push_back(dW);

        const Vec z1 = phi.states[std::size_t(k + 1)] + U / std::sqrt(K);
        const Vec& z0 = out.Z.back();

        // Gap at both one-sided limits of each jump inside (t0, t1].
        Vec x_prev = x_state;
        for (std::size_t idx = event_lo; idx < out.jump.events.size(); ++idx) {
            const Event& ev = out.jump.events[idx];
            const double w = (ev.t - t0) / dt_grid;
            const Vec z_at = z0 + w * (z1 - z0);
            out.gap.emplace_back(ev.t, (x_prev - z_at).norm());
            x_prev += m.jumps[std::size_t(ev.jump)].cast<double>() / K;
            out.gap.emplace_back(ev.t, (x_prev - z_at).norm());
        }
        event_lo = out.jump.events.size();

        out.times.push_back(t1);
        out.X.push_back(sim.density());
        out.U.push_back(U);
        out.Z.push_back(z1);
        out.gap.emplace_back(t1, (out.X.back() - z1).norm());
    }

    out.horizon = double(k_stop) / double(steps_per_unit);
    out.truncated = halted;
    out.jump.flags = sim.flags();
    out.jump.flags.channel_redraws = sim.total_redraws();
    for (const auto& g : out.gap) out.gap_sup = std::max(out.gap_sup, g.second);
    return out;
}

/// First evaluation point at which the gap exceeds eps, or nullopt.
inline std::optional<double> gap_crossing_time(const CoupledPath& path, double eps) {
    if (!(eps >= 0.0)) throw std::invalid_argument("gap_crossing_time: eps must be >= 0");
    for (const auto& g : path.gap)
        if (g.second > eps) return g.first;
    return std::nullopt;
}

/// Diffusion diagnostic Y of the intermediate coupling bound.
struct DiffusionPath {
    double K = 0.0;
    double dt = 0.0;
    std::vector<double> times;
    std::vector<Vec> Y;
    bool domain_exit = false;
};

/// Euler-Maruyama for dY = F(Y) dt + K^{-1/2} sum_e sqrt(beta_e(Y)) dW_e e,
/// Y(0) = floor(K x0)/K. Drivers either come from a coupled run (shared
/// comparison) or from a fresh stream.
inline DiffusionPath simulate_diffusion(const Model& m, double K, const Vec& x0, double horizon,
                                        double dt,
                                        const std::variant<const DriverSeries*, RngStream*>& drivers) {
    if (!(dt > 0.0)) throw std::invalid_argument("simulate_diffusion: dt must be positive");
    const int n = int(std::llround(horizon / dt));
    DiffusionPath out;
    out.K = K;
    out.dt = dt;
    Vec y(m.d);
    for (int i = 0; i < m.d; ++i) y[i] = std::floor(K * x0[i]) / K;
    out.times.push_back(0.0);
    out.Y.push_back(y);
    const double sqrt_dt = std::sqrt(dt);
    for (int k = 0; k < n; ++k) {
        Vec dy = drift(m, y) * dt;
        for (int e = 0; e < m.num_jumps(); ++e) {
            double dw;
            if (std::holds_alternative<const DriverSeries*>(drivers)) {
                const auto* ds = std::get<const DriverSeries*>(drivers);
                if (std::abs(ds->dt - dt) > 1e-12 || std::size_t(k) >= ds->dW.size())
                    throw std::invalid_argument("simulate_diffusion: driver series does not match grid");
                dw = ds->dW[std::size_t(k)][std::size_t(e)];
            } else {
                dw = std::get<RngStream*>(drivers)->normal(0.0, sqrt_dt);
            }
            const double beta = m.rate(e, y);
            if (beta > 0.0)
                dy += std::sqrt(beta / K) * dw * m.jumps[std::size_t(e)].cast<double>();
        }
        y += dy;
        if (!y.allFinite()) throw std::runtime_error("simulate_diffusion: non-finite state");
        if (!m.domain.contains(y)) {
            out.domain_exit = true;
            break;
        }
        out.times.push_back(double(k + 1) * dt);
        out.Y.push_back(y);
    }
    return out;
}

}  // namespace ddmc

#endif
