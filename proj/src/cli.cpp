#include "penalight/cli.hpp"

#include <unistd.h>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "penalight/bench.hpp"
#include "penalight/pmp.hpp"
#include "penalight/regularity.hpp"
#include "penalight/solver.hpp"

namespace penalight {

using ojson = nlohmann::ordered_json;

namespace {

constexpr double kResidualTol = 1e-6;

const std::set<std::string> &known_emits() {
    static const std::set<std::string> names = {"trajectory_csv", "adjoint_csv", "report_txt",
                                                "report_json"};
    return names;
}

ojson num(double v) {
    return std::isfinite(v) ? ojson(v) : ojson(nullptr);
}

ojson vec_json(const Vec &v) {
    ojson a = ojson::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(num(v(i)));
    }
    return a;
}

void render(const ojson &j, const std::string &prefix, std::ostream &os) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        const ojson &v = it.value();
        if (v.is_object()) {
            render(v, key, os);
            continue;
        }
        os << key << " = ";
        if (v.is_array()) {
            os << "[";
            for (std::size_t i = 0; i < v.size(); ++i) {
                os << (i ? ", " : "");
                if (v[i].is_number()) {
                    os << format_number(v[i].get<double>());
                } else if (v[i].is_null()) {
                    os << "n/a";
                } else {
                    os << v[i].dump();
                }
            }
            os << "]";
        } else if (v.is_number()) {
            os << format_number(v.get<double>());
        } else if (v.is_string()) {
            os << v.get<std::string>();
        } else if (v.is_null()) {
            os << "n/a";
        } else {
            os << v.dump();
        }
        os << "\n";
    }
}

std::string text_report(const ojson &rep, const std::string &headline) {
    std::ostringstream os;
    if (!headline.empty()) {
        os << headline << "\n";
    }
    render(rep, "", os);
    return os.str();
}

bool emits(const RunConfig &cfg, const std::string &what) {
    return !cfg.output_dir.empty() && cfg.emit.count(what) > 0;
}

std::string out_path(const RunConfig &cfg, const std::string &file) {
    return (std::filesystem::path(cfg.output_dir) / file).string();
}

// Prints the report and writes report.txt / report.json when asked to.
void publish(const RunConfig &cfg, const ojson &rep, const std::string &headline,
             std::ostream &out) {
    const std::string text = text_report(rep, headline);
    if (cfg.json) {
        out << rep.dump(2) << "\n";
    } else {
        out << text;
    }
    if (emits(cfg, "report_txt")) {
        std::ofstream(out_path(cfg, "report.txt")) << text;
    }
    if (emits(cfg, "report_json")) {
        std::ofstream(out_path(cfg, "report.json")) << rep.dump(2) << "\n";
    }
}

InitPattern parse_init_pattern(const std::string &s) {
    if (s == "paper") {
        return PaperBangBang{};
    }
    const std::string prefix = "constant:";
    if (s.rfind(prefix, 0) == 0) {
        const std::string rest = s.substr(prefix.size());
        double u = 0.0;
        const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), u);
        if (ec == std::errc() && ptr == rest.data() + rest.size() && !rest.empty()) {
            return ConstantInit{u};
        }
    }
    throw ConfigError("init_pattern must be \"paper\" or \"constant:<u>\", got \"" + s + "\"");
}

SolveOptions solve_options(const RunConfig &cfg) {
    SolveOptions o;
    o.n_intervals = cfg.n_intervals;
    o.rho = cfg.rho;
    o.T_init = cfg.T_init;
    o.init_pattern = parse_init_pattern(cfg.init_pattern);
    o.seed = cfg.seed;
    return o;
}

ojson multipliers_json(const Vec &nu, const Vec &mu) {
    return ojson{{"nu", vec_json(nu)}, {"mu", vec_json(mu)}};
}

} // namespace

// ----------------------------------------------------------------------------
// Configuration
// ----------------------------------------------------------------------------

void RunConfig::validate() const {
    try {
        registry_entry(problem);
    } catch (const NotFoundError &e) {
        throw ConfigError(e.what());
    }
    if (n_intervals < 1) {
        throw ConfigError("n_intervals must be at least 1, got " + std::to_string(n_intervals));
    }
    if (!(rho >= 0.0) || !std::isfinite(rho)) {
        throw ConfigError("rho must be a finite nonnegative number");
    }
    if (!std::isfinite(T_init)) {
        throw ConfigError("t_init must be finite");
    }
    parse_init_pattern(init_pattern);
    if (lambda_sweep) {
        if (lambda_sweep->empty()) {
            throw ConfigError("lambda_sweep must not be empty");
        }
        for (std::size_t i = 0; i < lambda_sweep->size(); ++i) {
            const double l = (*lambda_sweep)[i];
            if (!(l > 0.0) || !std::isfinite(l)) {
                throw ConfigError("lambda_sweep entries must be positive");
            }
            if (i > 0 && !(l > (*lambda_sweep)[i - 1])) {
                throw ConfigError("lambda_sweep must be sorted increasingly");
            }
        }
    }
    for (const auto &e : emit) {
        if (known_emits().count(e) == 0) {
            throw ConfigError("unknown emit entry \"" + e + "\"");
        }
    }
    if (!output_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(output_dir, ec);
        if (!std::filesystem::is_directory(output_dir) || ::access(output_dir.c_str(), W_OK) != 0) {
            throw ConfigError("output directory \"" + output_dir + "\" is not writable");
        }
    }
}

void apply_config_json(RunConfig &cfg, const nlohmann::json &j) {
    if (!j.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string &k = it.key();
            const auto &v = it.value();
            if (k == "problem") {
                cfg.problem = v.get<std::string>();
            } else if (k == "n_intervals") {
                cfg.n_intervals = v.get<int>();
            } else if (k == "rho") {
                cfg.rho = v.get<double>();
            } else if (k == "lambda_sweep") {
                if (v.is_null()) {
                    cfg.lambda_sweep.reset();
                } else {
                    cfg.lambda_sweep = v.get<std::vector<double>>();
                }
            } else if (k == "t_init") {
                cfg.T_init = v.get<double>();
            } else if (k == "init_pattern") {
                cfg.init_pattern = v.get<std::string>();
            } else if (k == "output_dir") {
                cfg.output_dir = v.get<std::string>();
            } else if (k == "emit") {
                const auto names = v.get<std::vector<std::string>>();
                cfg.emit = std::set<std::string>(names.begin(), names.end());
            } else if (k == "seed") {
                cfg.seed = v.get<std::uint64_t>();
            } else {
                throw ConfigError("unknown config key \"" + k + "\"");
            }
        }
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
}

RunConfig load_config_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file \"" + path + "\"");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError("config file \"" + path + "\" is not valid JSON: " + e.what());
    }
    RunConfig cfg;
    apply_config_json(cfg, j);
    return cfg;
}

// ----------------------------------------------------------------------------
// Output files
// ----------------------------------------------------------------------------

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_trajectory_csv(const std::string &path, const Trajectory &traj, const ControlGrid &grid) {
    std::ofstream os(path);
    if (!os) {
        throw ConfigError("cannot write " + path);
    }
    const auto n = traj.states.cols();
    const auto m = grid.values.cols();
    os << "t";
    for (Eigen::Index i = 0; i < n; ++i) {
        os << ",x" << i + 1;
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        os << ",u" << i + 1;
    }
    os << "\n";
    for (Eigen::Index k = 0; k < traj.times.size(); ++k) {
        os << format_number(traj.times(k));
        for (Eigen::Index i = 0; i < n; ++i) {
            os << "," << format_number(traj.states(k, i));
        }
        const Vec u = grid.at_node(static_cast<int>(k));
        for (Eigen::Index i = 0; i < m; ++i) {
            os << "," << format_number(u(i));
        }
        os << "\n";
    }
}

void write_adjoint_csv(const std::string &path, const AdjointTrajectory &adjoint) {
    std::ofstream os(path);
    if (!os) {
        throw ConfigError("cannot write " + path);
    }
    os << "t";
    for (Eigen::Index i = 0; i < adjoint.psi.cols(); ++i) {
        os << ",psi" << i + 1;
    }
    os << "\n";
    for (Eigen::Index k = 0; k < adjoint.times.size(); ++k) {
        os << format_number(adjoint.times(k));
        for (Eigen::Index i = 0; i < adjoint.psi.cols(); ++i) {
            os << "," << format_number(adjoint.psi(k, i));
        }
        os << "\n";
    }
}

// ----------------------------------------------------------------------------
// Commands
// ----------------------------------------------------------------------------

int cmd_solve(const RunConfig &cfg, std::ostream &out, std::ostream &) {
    cfg.validate();
    const RegistryEntry &entry = registry_entry(cfg.problem);
    const ProblemSpec &spec = entry.spec;
    if (spec.time_mode != TimeMode::Free || spec.num_constraints() == 0) {
        throw ConfigError("solve needs a free terminal time problem with terminal constraints; \"" +
                          cfg.problem + "\" is not one");
    }
    const SolveOptions opts = solve_options(cfg);
    const SolveResult r = solve_time_optimal(spec, opts);

    ojson rep;
    rep["command"] = "solve";
    rep["problem"] = cfg.problem;
    rep["n_intervals"] = cfg.n_intervals;
    rep["rho"] = num(cfg.rho);
    rep["T_opt"] = num(r.T_opt);
    rep["objective"] = num(r.objective);
    rep["cost"] = num(r.cost);
    rep["terminal_violation"] = num(r.terminal_violation);
    rep["x_T"] = vec_json(r.trajectory.final_state());
    if (spec.control_dim == 1) {
        ojson sw = ojson::array();
        for (double s : detect_switch(r.control)) {
            sw.push_back(num(s));
        }
        rep["switch_times"] = sw;
    }
    if (entry.reference) {
        rep["T_reference"] = num(entry.reference->T);
        rep["T_error"] = num(std::abs(r.T_opt - entry.reference->T));
    }
    rep["iterations"] = r.iterations;
    rep["evaluations"] = r.evaluations;
    rep["restarts"] = r.restarts;
    rep["converged"] = r.converged;

    if (emits(cfg, "trajectory_csv")) {
        write_trajectory_csv(out_path(cfg, "trajectory.csv"), r.trajectory, r.control);
    }
    if (emits(cfg, "adjoint_csv") && entry.reference) {
        // Backward from the reference terminal costate along the computed trajectory.
        write_adjoint_csv(out_path(cfg, "adjoint.csv"),
                          integrate_adjoint(spec, r.trajectory, r.control, entry.reference->psi_T));
    }
    publish(cfg, rep, "", out);
    return r.converged ? kExitOk : kExitNotConverged;
}

int cmd_check_usc(const RunConfig &cfg, std::ostream &out, std::ostream &) {
    cfg.validate();
    const RegistryEntry &entry = registry_entry(cfg.problem);
    std::vector<Endpoint> centers;
    for (const auto &[x, T] : entry.reference_endpoints) {
        centers.push_back({x, T});
    }
    if (centers.empty()) {
        throw ConfigError("problem \"" + cfg.problem + "\" has no reference endpoints to probe");
    }
    ProbeSampler sampler;
    sampler.seed = static_cast<unsigned>(cfg.seed);
    const UscReport usc = usc_verdict(entry.spec, sample_probes(centers, entry.spec.t0, sampler));

    ojson rep;
    rep["command"] = "check-usc";
    rep["problem"] = cfg.problem;
    rep["distance"] = num(usc.distance);
    rep["verdict"] = to_string(usc.verdict);
    rep["classical_cq"] = to_string(usc.classical);
    if (usc.licq) {
        rep["licq"] = usc.licq->holds;
    }
    if (usc.mfcq) {
        rep["mfcq"] = usc.mfcq->holds;
    }
    if (usc.mixed) {
        rep["mixed_cq"] = usc.mixed->holds;
    }
    rep["infeasible_probes"] = usc.infeasible_probes;
    rep["feasible_probes"] = usc.feasible_probes;
    rep["notes"] = usc.notes;

    char headline[64];
    std::snprintf(headline, sizeof headline, "a = %.6f %s", usc.distance,
                  usc.verdict == UscVerdict::Holds ? "HOLDS" : "FAILS");
    publish(cfg, rep, headline, out);
    return usc.verdict == UscVerdict::Holds ? kExitOk : kExitUscFails;
}

int cmd_check_transversality(const RunConfig &cfg, std::ostream &out, std::ostream &) {
    cfg.validate();
    const RegistryEntry &entry = registry_entry(cfg.problem);
    if (!entry.reference) {
        throw ConfigError("problem \"" + cfg.problem + "\" has no reference solution");
    }
    const ProblemSpec &spec = entry.spec;
    const ReferenceSolution &ref = *entry.reference;

    ojson rep;
    rep["command"] = "check-transversality";
    rep["problem"] = cfg.problem;
    bool ok = true;

    const MultiplierRecovery rec = recover_multipliers(spec, ref.psi_T, ref.x_T, ref.T);
    rep["multipliers"] = multipliers_json(rec.nu, rec.mu);
    rep["endpoint_residual"] = num(rec.residual);
    rep["rank_deficient"] = rec.rank_deficient;
    ok = ok && rec.residual <= kResidualTol;

    bool complementary = true;
    for (std::size_t j = 0; j < spec.ineq_constraints.size(); ++j) {
        const bool active = spec.ineq_constraints[j].value(ref.x_T, ref.T) >= -kDefaultTolActive;
        complementary = complementary && (active || rec.mu(static_cast<Eigen::Index>(j)) <= kMuTol);
    }
    rep["complementarity_ok"] = complementary;
    ok = ok && complementary;

    if (spec.time_mode == TimeMode::Free) {
        const double r = check_moving_manifold(spec, ref.x_T, ref.u_T, ref.psi_T, ref.T, rec.nu, rec.mu);
        rep["hamiltonian"] = num(hamiltonian(spec, ref.x_T, ref.u_T, ref.psi_T, ref.T));
        rep["terminal_time_residual"] = num(r);
        ok = ok && r <= kResidualTol;
    }

    const ControlGrid grid = ControlGrid::sample(spec.t0, ref.T, cfg.n_intervals, ref.control);
    const Trajectory traj = integrate_rk4(spec, grid);
    const AdjointTrajectory adjoint = integrate_adjoint(spec, traj, grid, ref.psi_T);
    if (spec.left_endpoint && !spec.left_endpoint->free_t0) {
        const LeftEndpointCheck left = check_left_endpoint(spec, adjoint.at(0), spec.x0, spec.t0);
        rep["left_multipliers"] = ojson{{"gamma", vec_json(left.gamma)}, {"delta", vec_json(left.delta)}};
        rep["left_residual"] = num(left.residual);
        ok = ok && left.residual <= kResidualTol;
    }
    rep["pass"] = ok;

    if (emits(cfg, "trajectory_csv")) {
        write_trajectory_csv(out_path(cfg, "trajectory.csv"), traj, grid);
    }
    if (emits(cfg, "adjoint_csv")) {
        write_adjoint_csv(out_path(cfg, "adjoint.csv"), adjoint);
    }
    publish(cfg, rep, "", out);
    return ok ? kExitOk : kExitNotConverged;
}

int cmd_bench(const RunConfig &cfg, std::ostream &out, std::ostream &) {
    cfg.validate();
    if (cfg.problem != "oscillator") {
        throw ConfigError("bench runs the oscillator only");
    }
    BenchOptions opts;
    opts.solve = solve_options(cfg);
    const BenchReport b = run_bench(opts);
    const AnalyticOscillatorSolution exact = analytic_oscillator();

    ojson rep;
    rep["command"] = "bench";
    rep["T_opt"] = num(b.solution.T_opt);
    rep["T_star"] = num(exact.T_star);
    rep["T_error"] = num(b.T_error);
    ojson sw = ojson::array();
    for (double s : b.switches) {
        sw.push_back(num(s));
    }
    rep["switch_times"] = sw;
    rep["tau"] = num(exact.tau);
    rep["switch_time_error"] = num(b.switch_time_error);
    rep["terminal_violation"] = num(b.terminal_violation);
    rep["endpoint_error"] = num(b.endpoint_error);
    rep["transversality"] = {
        {"multipliers", multipliers_json(b.transversality.nu, b.transversality.mu)},
        {"endpoint_residual", num(b.transversality.endpoint_residual)},
        {"hamiltonian_residual", num(b.transversality.hamiltonian_residual.value_or(NAN))}};
    rep["usc"] = {{"distance", num(b.usc.distance)}, {"verdict", to_string(b.usc.verdict)}};
    rep["converged"] = b.solution.converged;
    rep["pass"] = b.pass;

    if (emits(cfg, "trajectory_csv")) {
        write_trajectory_csv(out_path(cfg, "trajectory.csv"), b.solution.trajectory,
                             b.solution.control);
    }
    if (emits(cfg, "adjoint_csv")) {
        Vec psi_T(3);
        psi_T << exact.psi1_T, exact.psi2_T, exact.psi3;
        write_adjoint_csv(out_path(cfg, "adjoint.csv"),
                          integrate_adjoint(builtin_problem("oscillator"), b.solution.trajectory,
                                            b.solution.control, psi_T));
    }
    publish(cfg, rep, "", out);
    return b.pass ? kExitOk : kExitNotConverged;
}

int cmd_sweep(const RunConfig &cfg, std::ostream &out, std::ostream &) {
    cfg.validate();
    const ProblemSpec spec = builtin_problem(cfg.problem);
    if (spec.time_mode != TimeMode::Free || spec.num_constraints() == 0) {
        throw ConfigError("sweep-lambda needs a free terminal time problem with terminal constraints");
    }
    const std::vector<double> lambdas =
        cfg.lambda_sweep.value_or(std::vector<double>{0.1, 1.0, 10.0, 100.0, 1000.0});
    const SweepResult sweep = exactness_sweep(spec, solve_options(cfg), lambdas);

    ojson rep;
    rep["command"] = "sweep-lambda";
    rep["problem"] = cfg.problem;
    ojson rows = ojson::array();
    bool monotone = true;
    for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
        const SweepRow &r = sweep.rows[i];
        rows.push_back({{"lambda", num(r.lambda)},
                        {"objective", num(r.objective)},
                        {"T_opt", num(r.T_opt)},
                        {"terminal_violation", num(r.terminal_violation)},
                        {"converged", r.converged}});
        if (i > 0 && r.terminal_violation > sweep.rows[i - 1].terminal_violation + kFeasTol) {
            monotone = false;
        }
    }
    rep["rows"] = rows;
    rep["exactness_threshold"] =
        sweep.exactness_threshold ? num(*sweep.exactness_threshold) : ojson(nullptr);
    rep["note"] = monotone ? "violation non-increasing in lambda" : "violation not monotone in lambda";

    std::ostringstream table;
    table << "lambda,objective,T_opt,terminal_violation,converged\n";
    for (const auto &r : sweep.rows) {
        table << format_number(r.lambda) << "," << format_number(r.objective) << ","
              << format_number(r.T_opt) << "," << format_number(r.terminal_violation) << ","
              << (r.converged ? "true" : "false") << "\n";
    }
    table << "exactness threshold: "
          << (sweep.exactness_threshold ? format_number(*sweep.exactness_threshold) : "none")
          << "\n"
          << rep["note"].get<std::string>() << "\n";

    const std::string text = table.str();
    if (cfg.json) {
        out << rep.dump(2) << "\n";
    } else {
        out << text;
    }
    if (emits(cfg, "report_txt")) {
        std::ofstream(out_path(cfg, "report.txt")) << text;
    }
    if (emits(cfg, "report_json")) {
        std::ofstream(out_path(cfg, "report.json")) << rep.dump(2) << "\n";
    }
    return sweep.exactness_threshold ? kExitOk : kExitNotConverged;
}

// ----------------------------------------------------------------------------
// Entry point
// ----------------------------------------------------------------------------

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Exact-penalty transcription and optimality checks for Mayer problems",
                 "penalight"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> problem;
    std::optional<int> n_intervals;
    std::optional<double> rho;
    std::optional<double> t_init;
    std::optional<std::string> out_dir;
    bool json = false;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"solve", "solve a registry problem by penalized transcription"},
        {"check-usc", "check the separation condition near reference endpoints"},
        {"check-transversality", "check endpoint conditions on a reference solution"},
        {"bench", "solve the oscillator and compare with the closed form"},
        {"sweep-lambda", "solve over a range of penalty weights"}};
    for (const auto &[name, help] : commands) {
        CLI::App *sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--problem", problem, "registry problem name");
        sub->add_option("--n-intervals", n_intervals, "control intervals");
        sub->add_option("--rho", rho, "penalty weight");
        sub->add_option("--t-init", t_init, "initial terminal time");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_flag("--json", json, "print the JSON report");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError &e) {
        err << e.what() << "\n";
        return kExitConfig;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_config_file(config_path);
        if (problem) cfg.problem = *problem;
        if (n_intervals) cfg.n_intervals = *n_intervals;
        if (rho) cfg.rho = *rho;
        if (t_init) cfg.T_init = *t_init;
        if (out_dir) cfg.output_dir = *out_dir;
        cfg.json = cfg.json || json;
        if (const char *s = std::getenv("PENALIGHT_SEED")) {
            const std::string seed(s);
            std::uint64_t v = 0;
            const auto [ptr, ec] = std::from_chars(seed.data(), seed.data() + seed.size(), v);
            if (ec != std::errc() || ptr != seed.data() + seed.size() || seed.empty()) {
                throw ConfigError("PENALIGHT_SEED must be an unsigned integer, got \"" + seed + "\"");
            }
            cfg.seed = v;
        }

        const std::string name = app.get_subcommands().front()->get_name();
        if (name == "solve") return cmd_solve(cfg, out, err);
        if (name == "check-usc") return cmd_check_usc(cfg, out, err);
        if (name == "check-transversality") return cmd_check_transversality(cfg, out, err);
        if (name == "bench") return cmd_bench(cfg, out, err);
        return cmd_sweep(cfg, out, err);
    } catch (const ConfigError &e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NotFoundError &e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument &e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
}

} // namespace penalight
