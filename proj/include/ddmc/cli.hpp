#ifndef DDMC_CLI_HPP
#define DDMC_CLI_HPP

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ddmc/acceptance.hpp"
#include "ddmc/analysis.hpp"
#include "ddmc/experiments.hpp"
#include "ddmc/io.hpp"
#include "ddmc/kmt.hpp"
#include "ddmc/model_io.hpp"
#include "ddmc/simulate.hpp"

namespace ddmc::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Fully validated run description. Flags override config-file values; the
/// seed has no wall-clock default, so identical configs replay identically.
struct RunConfig {
    std::string subcommand;  // analyze | couple | simulate | experiment | check
    std::string experiment;  // moddev | qsd | sirs-cost | threshold

    std::string model_name;
    std::string model_file;
    double p = 2.0, q = 1.0;
    double lambda = 2.0, gamma = 1.0, theta = 1.0;

    double scale = 100.0;
    std::vector<double> scales;
    std::vector<double> x0;
    std::vector<double> guess;
    double horizon = 10.0;
    double dt = 0.005;
    double eps = 0.05;
    double alpha = 1.0;
    double eta = 0.0;
    double h = 0.25;
    double burn_in = 30.0;
    double window = 0.0;
    double max_horizon = 100.0;
    double tol = 1e-12;
    int replicas = 1;
    int levels = -1;  // -1: default dyadic depth
    bool flow_out = false;

    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir = ".";
    std::string format = "csv";
    std::vector<std::string> emit = {"summary"};
    int threads = 1;
    std::string suite = "fast";

    bool operator==(const RunConfig&) const = default;
};

inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["subcommand"] = c.subcommand;
    if (!c.experiment.empty()) j["experiment"] = c.experiment;
    if (!c.model_name.empty()) j["model"] = c.model_name;
    if (!c.model_file.empty()) j["model_file"] = c.model_file;
    j["p"] = c.p;
    j["q"] = c.q;
    j["lambda"] = c.lambda;
    j["gamma"] = c.gamma;
    j["theta"] = c.theta;
    j["scale"] = c.scale;
    if (!c.scales.empty()) j["scales"] = c.scales;
    if (!c.x0.empty()) j["x0"] = c.x0;
    if (!c.guess.empty()) j["guess"] = c.guess;
    j["horizon"] = c.horizon;
    j["dt"] = c.dt;
    j["eps"] = c.eps;
    j["alpha"] = c.alpha;
    j["eta"] = c.eta;
    j["h"] = c.h;
    j["burn_in"] = c.burn_in;
    j["window"] = c.window;
    j["max_horizon"] = c.max_horizon;
    j["tol"] = c.tol;
    j["replicas"] = c.replicas;
    j["levels"] = c.levels;
    j["flow"] = c.flow_out;
    if (c.seed_set) j["seed"] = c.seed;
    j["out"] = c.out_dir;
    j["format"] = c.format;
    j["emit"] = c.emit;
    j["threads"] = c.threads;
    j["suite"] = c.suite;
    return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    c.subcommand = j.value("subcommand", std::string());
    c.experiment = j.value("experiment", std::string());
    c.model_name = j.value("model", std::string());
    c.model_file = j.value("model_file", std::string());
    c.p = j.value("p", c.p);
    c.q = j.value("q", c.q);
    c.lambda = j.value("lambda", c.lambda);
    c.gamma = j.value("gamma", c.gamma);
    c.theta = j.value("theta", c.theta);
    c.scale = j.value("scale", c.scale);
    if (j.contains("scales")) c.scales = j.at("scales").get<std::vector<double>>();
    if (j.contains("x0")) c.x0 = j.at("x0").get<std::vector<double>>();
    if (j.contains("guess")) c.guess = j.at("guess").get<std::vector<double>>();
    c.horizon = j.value("horizon", c.horizon);
    c.dt = j.value("dt", c.dt);
    c.eps = j.value("eps", c.eps);
    c.alpha = j.value("alpha", c.alpha);
    c.eta = j.value("eta", c.eta);
    c.h = j.value("h", c.h);
    c.burn_in = j.value("burn_in", c.burn_in);
    c.window = j.value("window", c.window);
    c.max_horizon = j.value("max_horizon", c.max_horizon);
    c.tol = j.value("tol", c.tol);
    c.replicas = j.value("replicas", c.replicas);
    c.levels = j.value("levels", c.levels);
    c.flow_out = j.value("flow", c.flow_out);
    if (j.contains("seed")) {
        c.seed = j.at("seed").get<std::uint64_t>();
        c.seed_set = true;
    }
    c.out_dir = j.value("out", c.out_dir);
    c.format = j.value("format", c.format);
    if (j.contains("emit")) c.emit = j.at("emit").get<std::vector<std::string>>();
    c.threads = j.value("threads", c.threads);
    c.suite = j.value("suite", c.suite);
    return c;
}

struct ParseResult {
    std::optional<RunConfig> config;
    std::vector<std::string> errors;
    int exit_code = 0;      // help/version handled here
    bool handled = false;   // true when help/version was printed
};

/// Parse argv (without the program name). A JSON --config file supplies
/// defaults; explicit flags win. All semantic violations are reported
/// together.
inline ParseResult parse_config(const std::vector<std::string>& args) {
    ParseResult result;
    RunConfig c;

    // First pass: pull out --config so its values become defaults.
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
        if (args[i] == "--config") {
            std::ifstream in(args[i + 1]);
            if (!in) {
                result.errors.push_back("cannot open config file: " + args[i + 1]);
                return result;
            }
            nlohmann::json j;
            try {
                in >> j;
            } catch (const std::exception& e) {
                result.errors.push_back(std::string("config file parse error: ") + e.what());
                return result;
            }
            c = config_from_json(j);
            break;
        }
    }

    CLI::App app{"density-dependent Markov chains with strong Gaussian coupling"};
    app.set_version_flag("--version", kVersion);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override)");

    std::string seed_str;
    bool has_seed = c.seed_set;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed_str, "base seed (64-bit, required)");
        sub->add_option("--out", c.out_dir, "output directory");
        sub->add_option("--threads", c.threads, "worker threads (advisory)");
        sub->add_option("--format", c.format, "raw data format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--config", config_path, "JSON config file (flags override)");
    };
    const auto add_model = [&](CLI::App* sub) {
        sub->add_option("--model", c.model_name, "catalog model name (logistic | sirs)");
        sub->add_option("--model-file", c.model_file, "model definition JSON file");
        sub->add_option("--p", c.p, "logistic birth coefficient");
        sub->add_option("--q", c.q, "logistic linear death coefficient");
        sub->add_option("--lambda", c.lambda, "SIRS infection rate");
        sub->add_option("--gamma", c.gamma, "SIRS recovery rate");
        sub->add_option("--theta", c.theta, "SIRS loss-of-immunity rate");
    };

    auto* analyze = app.add_subcommand("analyze", "equilibrium report and fluid limit");
    add_common(analyze);
    add_model(analyze);
    analyze->add_option("--guess", c.guess, "Newton starting point");
    analyze->add_option("--tol", c.tol, "Newton tolerance");
    analyze->add_flag("--flow", c.flow_out, "also emit the fluid-limit trajectory CSV");
    analyze->add_option("--x0", c.x0, "flow initial point");
    analyze->add_option("--horizon", c.horizon, "flow horizon");
    analyze->add_option("--dt", c.dt, "flow grid step");
    analyze->add_option("--scale", c.scale, "K used for the relaxation-time field");

    auto* couple = app.add_subcommand("couple", "KMT pair sampling and tail validation");
    add_common(couple);
    couple->add_option("--horizon", c.horizon, "pair horizon T");
    couple->add_option("--levels", c.levels, "dyadic levels (-1: default)");
    couple->add_option("--replicas", c.replicas, "number of pairs");

    auto* simulate = app.add_subcommand("simulate", "coupled chain/Gaussian trajectories");
    add_common(simulate);
    add_model(simulate);
    simulate->add_option("--scale", c.scale, "scale parameter K");
    simulate->add_option("--x0", c.x0, "initial density");
    simulate->add_option("--horizon", c.horizon, "time horizon");
    simulate->add_option("--dt", c.dt, "approximation grid step");
    simulate->add_option("--eps", c.eps, "gap threshold for crossing times");
    simulate->add_option("--replicas", c.replicas, "independent replicas");
    simulate->add_option("--emit", c.emit, "artifacts: path, gap, summary")
        ->check(CLI::IsMember({"path", "gap", "summary"}));

    auto* experiment = app.add_subcommand("experiment", "paper-application ensembles");
    add_common(experiment);
    add_model(experiment);
    experiment->add_option("variant", c.experiment, "moddev | qsd | sirs-cost | threshold")
        ->required()
        ->check(CLI::IsMember({"moddev", "qsd", "sirs-cost", "threshold"}));
    experiment->add_option("--scale", c.scale, "scale parameter K");
    experiment->add_option("--scales", c.scales, "increasing K list (threshold)");
    experiment->add_option("--x0", c.x0, "initial density");
    experiment->add_option("--eta", c.eta, "moderate-deviation threshold");
    experiment->add_option("--bracket-h", c.h, "bracket half-width exponent parameter");
    experiment->add_option("--burn-in", c.burn_in, "conditioning burn-in time t");
    experiment->add_option("--window", c.window, "conditioning window T");
    experiment->add_option("--horizon", c.horizon, "cost-integral horizon T");
    experiment->add_option("--alpha", c.alpha, "eps(K) = alpha log(K)/K");
    experiment->add_option("--dt", c.dt, "coupled grid step (threshold)");
    experiment->add_option("--replicas", c.replicas, "replicas per configuration");
    experiment->add_option("--max-horizon", c.max_horizon, "censoring horizon");

    auto* check = app.add_subcommand("check", "built-in acceptance suites");
    add_common(check);
    check->add_option("--suite", c.suite, "fast | full")->check(CLI::IsMember({"fast", "full"}));

    app.require_subcommand(0, 1);

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help() << std::endl;
        result.handled = true;
        return result;
    } catch (const CLI::CallForVersion&) {
        std::cout << kVersion << std::endl;
        result.handled = true;
        return result;
    } catch (const CLI::ParseError& e) {
        result.errors.push_back(e.what());
        result.exit_code = 1;
        return result;
    }

    for (auto* sub : {analyze, couple, simulate, experiment, check})
        if (sub->parsed()) c.subcommand = sub->get_name();

    if (!seed_str.empty()) {
        try {
            c.seed = std::stoull(seed_str);
            has_seed = true;
        } catch (const std::exception&) {
            result.errors.push_back("type mismatch: --seed expects a 64-bit unsigned integer");
        }
    }
    c.seed_set = has_seed;

    // Semantic validation: report every violation, not just the first.
    auto& errs = result.errors;
    if (c.subcommand.empty()) errs.push_back("missing subcommand (analyze | couple | simulate | experiment | check)");
    if (!has_seed && c.subcommand != "") errs.push_back("seed required: pass --seed (determinism policy; no wall-clock default)");
    if (c.replicas < 1) errs.push_back("replicas must be >= 1");
    if (c.dt <= 0.0) errs.push_back("dt must be positive");
    if (c.horizon <= 0.0) errs.push_back("horizon must be positive");
    if (c.max_horizon <= 0.0) errs.push_back("max_horizon must be positive");
    if (c.threads < 0) errs.push_back("threads must be >= 0");
    if (c.subcommand == "simulate" || (c.subcommand == "experiment" && c.experiment != "sirs-cost")) {
        if (c.scale <= 0.0) errs.push_back("scale K must be positive");
    }
    if (c.subcommand == "experiment" && c.experiment == "moddev" && c.eta <= 0.0)
        errs.push_back("moddev requires --eta > 0");
    if (c.subcommand == "experiment" && c.experiment == "threshold" && c.scales.empty())
        errs.push_back("threshold requires --scales");
    if (c.subcommand == "couple" && c.horizon < 1.0)
        errs.push_back("couple requires --horizon >= 1");

    if (!errs.empty()) {
        result.exit_code = 1;
        return result;
    }
    result.config = c;
    return result;
}

// ---------------------------------------------------------------------------
// Dispatch.

namespace detail {

inline Model build_model(const RunConfig& c) {
    if (!c.model_file.empty()) return load_model_file(c.model_file);
    if (c.model_name == "logistic") return make_logistic_model(c.p, c.q);
    if (c.model_name == "sirs") return make_sirs_model(c.lambda, c.gamma, c.theta);
    if (c.model_name.empty()) throw std::invalid_argument("no model given: pass --model or --model-file");
    return make_catalog_model(c.model_name, {});
}

inline Vec to_vec(const std::vector<double>& v) {
    Vec x(long(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) x[long(i)] = v[i];
    return x;
}

inline nlohmann::json mat_json(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int col = 0; col < m.cols(); ++col) row.push_back(m(r, col));
        rows.push_back(row);
    }
    return rows;
}

inline nlohmann::json vec_json(const Vec& v) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline Vec default_guess(const Model& m) {
    if (m.name == "logistic") return make_vec({0.5 * (m.params.at("p") - m.params.at("q")) + 0.1});
    if (m.name == "sirs") return make_vec({0.4, 0.2});
    throw std::invalid_argument("custom model: pass --guess");
}

struct ArtifactSink {
    std::filesystem::path dir;
    std::string prefix;
    nlohmann::json meta;
    std::vector<std::string> files;

    std::filesystem::path path(const std::string& suffix) const { return dir / (prefix + suffix); }

    void add(const std::string& suffix, const std::string& content) {
        io::atomic_write(path(suffix), content);
        files.push_back((prefix + suffix));
    }

    void add_json(const std::string& suffix, const nlohmann::json& j) {
        io::atomic_write(path(suffix), j.dump(2) + "\n");
        files.push_back((prefix + suffix));
    }

    void finish(const RunConfig& c, const nlohmann::json& flags) {
        meta["config"] = config_to_json(c);
        meta["seed"] = c.seed;
        meta["version"] = kVersion;
        meta["flags"] = flags;
        meta["artifacts"] = files;
        io::atomic_write(path("meta.json"), meta.dump(2) + "\n");
    }
};

inline int run_analyze(const RunConfig& c) {
    const Model m = build_model(c);
    const Vec guess = c.guess.empty() ? default_guess(m) : to_vec(c.guess);
    const auto rep = find_equilibrium(m, guess, c.tol);
    nlohmann::json j;
    j["model"] = model_to_json(m);
    j["x_star"] = vec_json(rep.x_star);
    j["jacobian"] = mat_json(rep.jac);
    nlohmann::json evs = nlohmann::json::array();
    for (const auto& ev : rep.eigenvalues) evs.push_back({{"re", ev.real()}, {"im", ev.imag()}});
    j["eigenvalues"] = evs;
    j["rho_star"] = rep.rho_star;
    j["stable"] = rep.stable;
    j["S_star"] = mat_json(rep.S_star);
    if (rep.stable) j["Sigma_star"] = mat_json(rep.Sigma_star);
    j["newton_residual"] = rep.residual;
    j["newton_iterations"] = rep.iterations;
    j["relaxation_time"] = rep.stable ? rep.relaxation_time(c.scale) : 0.0;
    j["relaxation_time_scale"] = c.scale;

    ArtifactSink sink{c.out_dir, "analyze_", {}, {}};
    sink.add_json("report.json", j);
    if (c.flow_out) {
        const Vec x0 = c.x0.empty() ? rep.x_star : to_vec(c.x0);
        const auto traj = flow(m, x0, c.horizon, c.dt);
        std::vector<std::string> cols{"t"};
        for (int i = 1; i <= m.d; ++i) cols.push_back("x_" + std::to_string(i));
        io::Csv csv(cols);
        for (std::size_t k = 0; k < traj.times.size(); ++k) {
            std::vector<double> row{traj.times[k]};
            for (int i = 0; i < m.d; ++i) row.push_back(traj.states[k][i]);
            csv.row(row);
        }
        sink.add("flow.csv", csv.str());
    }
    sink.finish(c, nlohmann::json::object());
    return 0;
}

inline int run_couple(const RunConfig& c) {
    RngStream rng(c.seed);
    const int levels = c.levels >= 0 ? c.levels : default_levels(c.horizon);
    io::Csv errors_csv({"replica", "T", "error"});
    std::vector<double> errs(std::size_t(c.replicas), 0.0);
    for_each_replica(c.replicas, rng.raw(), c.threads, [&](int r, RngStream& s) {
        KmtPair pair(c.horizon, levels, s);
        errs[std::size_t(r)] = kmt_error(pair);
    });
    for (int r = 0; r < c.replicas; ++r) errors_csv.row({double(r), c.horizon, errs[std::size_t(r)]});

    // Lemma-bound validation on the default cell grids.
    std::vector<TailCellSpec> cells;
    using Kind = TailCellSpec::Kind;
    for (auto [S, A] : {std::pair{25.0, 15.0}, {25.0, 20.0}, {50.0, 20.0},
                        {50.0, 28.0}, {100.0, 30.0}, {100.0, 40.0}})
        cells.push_back({Kind::poisson_sup, S, 0.0, A, 1.0});
    for (double A : {3.0, 4.0, 5.0, 6.0}) cells.push_back({Kind::brownian_integral, 1.0, 0.0, A, 2.0});
    cells.push_back({Kind::brownian_oscillation, 1.0, 10.0, 6.0, 1.0});
    auto report = validate_tail_bounds(cells, std::max(c.replicas, 1000), rng, c.threads);
    report.growth = kmt_error_growth({16.0, 64.0, 256.0, 1024.0, 4096.0},
                                     std::min(c.replicas, 1000), rng, 256.0, c.threads);

    nlohmann::json j;
    j["cells"] = nlohmann::json::array();
    for (const auto& cell : report.cells) {
        j["cells"].push_back({{"kind", int(cell.spec.kind)},
                              {"S", cell.spec.S},
                              {"T", cell.spec.T},
                              {"A", cell.spec.A},
                              {"rho", cell.spec.rho},
                              {"bound", cell.bound},
                              {"replicas", cell.replicas},
                              {"exceedances", cell.exceedances},
                              {"freq", cell.freq},
                              {"wilson99_upper", cell.wilson99_upper},
                              {"vacuous", cell.vacuous},
                              {"skipped", cell.skipped},
                              {"pass", cell.pass}});
    }
    if (report.growth) {
        const auto& g = *report.growth;
        j["growth"] = {{"horizons", g.horizons}, {"medians", g.medians}, {"c0", g.c0},
                       {"c1", g.c1},             {"r2", g.r2},           {"tail_horizon", g.tail_horizon},
                       {"tail_r2", g.tail_r2}};
    }
    ArtifactSink sink{c.out_dir, "couple_", {}, {}};
    sink.add("errors.csv", errors_csv.str());
    sink.add_json("tail_report.json", j);
    sink.finish(c, nlohmann::json::object());
    return 0;
}

inline int run_simulate(const RunConfig& c) {
    const Model m = build_model(c);
    const auto eq = find_equilibrium(m, default_guess(m));
    const Vec x0 = c.x0.empty() ? eq.x_star : to_vec(c.x0);
    RngStream rng(c.seed);
    const std::uint64_t base = rng.raw();

    const bool emit_path = std::count(c.emit.begin(), c.emit.end(), "path") > 0;
    const bool emit_gap = std::count(c.emit.begin(), c.emit.end(), "gap") > 0;

    nlohmann::json summary = nlohmann::json::array();
    ArtifactSink sink{c.out_dir, "simulate_", {}, {}};
    int total_redraws = 0, truncations = 0;
    std::vector<nlohmann::json> rows(std::size_t(c.replicas));
    std::vector<std::string> path_csv(std::size_t(c.replicas)), gap_csv(std::size_t(c.replicas));
    for_each_replica(c.replicas, base, c.threads, [&](int r, RngStream& s) {
        const auto path = simulate_coupled(m, eq, c.scale, x0, c.horizon, c.dt, s);
        const auto crossing = gap_crossing_time(path, c.eps);
        nlohmann::json row;
        row["replica"] = r;
        row["gap_sup"] = path.gap_sup;
        row["crossing_time"] = crossing ? nlohmann::json(*crossing) : nlohmann::json();
        row["truncated"] = path.truncated;
        row["absorbed"] = path.jump.flags.absorbed;
        row["channel_redraws"] = path.jump.flags.channel_redraws;
        row["events"] = path.jump.events.size();
        rows[std::size_t(r)] = row;
        if (emit_path) path_csv[std::size_t(r)] = coupled_path_csv(path);
        if (emit_gap) {
            io::Csv g({"t", "gap"});
            for (const auto& pr : path.gap) g.row({pr.first, pr.second});
            gap_csv[std::size_t(r)] = g.str();
        }
    });
    for (int r = 0; r < c.replicas; ++r) {
        summary.push_back(rows[std::size_t(r)]);
        total_redraws += rows[std::size_t(r)]["channel_redraws"].get<int>();
        truncations += rows[std::size_t(r)]["truncated"].get<bool>() ? 1 : 0;
        if (emit_path) sink.add("path_r" + std::to_string(r) + ".csv", path_csv[std::size_t(r)]);
        if (emit_gap) sink.add("gap_r" + std::to_string(r) + ".csv", gap_csv[std::size_t(r)]);
    }
    nlohmann::json j;
    j["replicas"] = summary;
    j["eps"] = c.eps;
    sink.add_json("summary.json", j);
    sink.finish(c, {{"channel_redraws", total_redraws}, {"truncations", truncations}});
    return 0;
}

inline int run_experiment(const RunConfig& c) {
    RngStream rng(c.seed);
    ArtifactSink sink{c.out_dir, "experiment_" + c.experiment + "_", {}, {}};
    nlohmann::json flags = nlohmann::json::object();

    if (c.experiment == "moddev") {
        const Model m = build_model(c);
        const auto eq = find_equilibrium(m, default_guess(m));
        const auto sample = moderate_deviation_times(m, eq, c.scale, c.eta, c.h, c.replicas,
                                                     c.max_horizon, rng, c.threads);
        io::Csv csv({"replica", "tau", "censored"});
        for (std::size_t r = 0; r < sample.tau.size(); ++r)
            csv.row({double(r), sample.tau[r], double(sample.censored[r])});
        sink.add("times.csv", csv.str());
        nlohmann::json j;
        j["K"] = sample.K;
        j["eta"] = sample.eta;
        j["K_eta2"] = sample.K * sample.eta * sample.eta;
        j["h"] = sample.h;
        j["bracket_lower"] = sample.bracket_lower;
        j["bracket_upper"] = sample.bracket_upper;
        j["hit_fraction"] = sample.hit_fraction;
        j["censored"] = int(std::count(sample.censored.begin(), sample.censored.end(), true));
        j["eta_band_advisory"] = sample.eta_band_advisory;
        sink.add_json("summary.json", j);
        flags["eta_band_advisory"] = sample.eta_band_advisory;
    } else if (c.experiment == "qsd") {
        const auto ens = conditioned_ensemble(
            c.p, c.q, c.scale, c.burn_in, c.window, c.replicas, rng,
            c.x0.empty() ? std::nullopt : std::optional<double>(c.x0[0]), c.threads);
        io::Csv csv({"replica", "x_t", "rescaled"});
        for (std::size_t r = 0; r < ens.marginal_at_t.size(); ++r)
            csv.row({double(r), ens.marginal_at_t[r], ens.rescaled[r]});
        sink.add("marginals.csv", csv.str());
        nlohmann::json j;
        j["K"] = ens.K;
        j["burn_in"] = ens.t;
        j["window"] = ens.T;
        j["replicas"] = ens.replicas;
        j["survivors"] = ens.survivors;
        j["survival_fraction"] = ens.survival_fraction;
        j["wasserstein_vs_normal"] = wasserstein_truncated_1d(ens.rescaled, c.p);
        j["reference_variance"] = c.p;
        sink.add_json("summary.json", j);
    } else if (c.experiment == "sirs-cost") {
        const auto cost = sirs_cost_samples(c.lambda, c.gamma, c.theta, c.scale, c.horizon,
                                            c.replicas, rng, c.threads);
        io::Csv csv({"replica", "cost", "absorbed"});
        for (std::size_t r = 0; r < cost.cost.size(); ++r)
            csv.row({double(r), cost.cost[r], double(cost.absorbed[r])});
        sink.add("costs.csv", csv.str());
        const auto oracle = sigma_oracle(c.lambda, c.gamma, c.theta);
        nlohmann::json j;
        j["K"] = cost.K;
        j["T"] = cost.T;
        j["sample_mean"] = cost.sample_mean;
        j["sample_variance"] = cost.sample_variance;
        j["predicted_mean"] = cost.predicted_mean;
        j["predicted_variance"] = cost.predicted_variance;
        j["absorbed"] = int(std::count(cost.absorbed.begin(), cost.absorbed.end(), true));
        j["sigma_oracle"] = {{"matrix_route", oracle.matrix_route},
                             {"printed_formula", oracle.printed_defined
                                                     ? nlohmann::json(oracle.printed_formula)
                                                     : nlohmann::json()},
                             {"printed_agrees", oracle.printed_agrees},
                             {"substituted_formula", oracle.substituted_formula},
                             {"substituted_agrees", oracle.substituted_agrees}};
        sink.add_json("summary.json", j);
    } else if (c.experiment == "threshold") {
        const Model m = build_model(c);
        const auto eq = find_equilibrium(m, default_guess(m));
        const Vec x0 = c.x0.empty() ? eq.x_star : to_vec(c.x0);
        const auto table = threshold_time_ensemble(m, eq, c.scales, c.alpha, c.replicas,
                                                   c.max_horizon, rng, x0, c.dt, c.threads);
        io::Csv csv({"K", "eps", "replicas", "crossings", "truncated", "observed_time", "p_hat"});
        for (const auto& row : table.rows)
            csv.row({row.K, row.eps, double(row.replicas), double(row.crossings),
                     double(row.truncated), row.observed_time, row.p_hat});
        sink.add("table.csv", csv.str());
        nlohmann::json j;
        j["alpha"] = table.alpha;
        j["nonincreasing"] = table.nonincreasing;
        sink.add_json("summary.json", j);
    } else {
        throw std::invalid_argument("unknown experiment variant: " + c.experiment);
    }
    sink.finish(c, flags);
    return 0;
}

inline int run_check(const RunConfig& c) {
    const auto results = acceptance::run_suite(c.suite == "full", c.seed, c.threads);
    nlohmann::json j = nlohmann::json::array();
    bool all_pass = true;
    for (const auto& r : results) {
        std::printf("[%s] %s: %s\n", r.pass ? "PASS" : "FAIL", r.id.c_str(), r.detail.c_str());
        j.push_back({{"id", r.id}, {"pass", r.pass}, {"detail", r.detail}, {"seconds", r.seconds}});
        all_pass = all_pass && r.pass;
    }
    ArtifactSink sink{c.out_dir, "check_", {}, {}};
    sink.add_json("acceptance.json", j);
    sink.finish(c, {{"all_pass", all_pass}});
    return all_pass ? 0 : 3;
}

}  // namespace detail

/// Dispatch a validated config. Returns the process exit code.
inline int run(const RunConfig& c) {
    try {
        if (c.subcommand == "analyze") return detail::run_analyze(c);
        if (c.subcommand == "couple") return detail::run_couple(c);
        if (c.subcommand == "simulate") return detail::run_simulate(c);
        if (c.subcommand == "experiment") return detail::run_experiment(c);
        if (c.subcommand == "check") return detail::run_check(c);
        throw std::invalid_argument("unknown subcommand: " + c.subcommand);
    } catch (const std::invalid_argument& e) {
        nlohmann::json err{{"error", e.what()}, {"type", "validation"}};
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        return 1;
    } catch (const std::exception& e) {
        nlohmann::json err{{"error", e.what()}, {"type", "runtime"}};
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        return 2;
    }
}

inline int main_entry(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    auto parsed = parse_config(args);
    if (parsed.handled) return 0;
    if (!parsed.config) {
        nlohmann::json err{{"error", parsed.errors}, {"type", "validation"}};
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        return 1;
    }
    return run(*parsed.config);
}

}  // namespace ddmc::cli

#endif
