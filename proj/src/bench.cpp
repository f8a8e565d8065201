#include "penalight/bench.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace penalight {

double AnalyticOscillatorSolution::control(double t) const {
    return t < tau ? -1.0 : 1.0;
}

Vec AnalyticOscillatorSolution::state(double t) const {
    Vec x(3);
    if (t < tau) {
        x << 3.0 * std::cos(t) - 1.0, -3.0 * std::sin(t), t;
    } else {
        const double r = std::sqrt(5.0);
        x << 1.0 - r * std::sin(t - tau), -r * std::cos(t - tau), t;
    }
    return x;
}

Vec AnalyticOscillatorSolution::adjoint(double t) const {
    const double a = 1.0 / std::sqrt(5.0);
    Vec psi(3);
    psi << a * std::sin(t - T_star), a * std::cos(t - T_star), psi3;
    return psi;
}

AnalyticOscillatorSolution analytic_oscillator() {
    AnalyticOscillatorSolution s;
    const double r = std::sqrt(5.0);
    s.tau = std::acos(2.0 / 3.0);
    s.T_star = s.tau + std::numbers::pi / 2.0;
    s.switch_point = Vec(2);
    s.switch_point << 1.0, -r;
    s.final_point = Vec(2);
    s.final_point << 1.0 - r, 0.0;
    s.psi1_T = 0.0;
    s.psi2_T = 1.0 / r;
    s.psi3 = -1.0;
    return s;
}

std::vector<double> detect_switch(const ControlGrid &control, double threshold) {
    if (control.values.cols() != 1) {
        throw std::invalid_argument("detect_switch needs a scalar control");
    }
    std::vector<double> out;
    const int N = control.n_intervals();
    int last_regime = 0;
    int last_index = -1;
    for (int k = 0; k < N; ++k) {
        const double u = control.values(k, 0);
        const int regime = u >= threshold ? 1 : (u <= -threshold ? -1 : 0);
        if (regime == 0) {
            continue;
        }
        if (last_regime != 0 && regime != last_regime) {
            out.push_back(0.5 * (control.node_time(last_index + 1) + control.node_time(k)));
        }
        last_regime = regime;
        last_index = k;
    }
    return out;
}

BenchReport run_bench(const BenchOptions &opts) {
    const ProblemSpec spec = builtin_problem("oscillator");
    const AnalyticOscillatorSolution exact = analytic_oscillator();
    const BenchThresholds &th = opts.thresholds;

    BenchReport rep;
    rep.solution = solve_time_optimal(spec, opts.solve);
    const SolveResult &sol = rep.solution;
    const int N = sol.control.n_intervals();
    const double h = sol.control.step();
    const Vec x_T = sol.trajectory.final_state();

    rep.T_error = std::abs(sol.T_opt - exact.T_star);
    rep.switches = detect_switch(sol.control);
    rep.switch_time_error = rep.switches.size() == 1 ? std::abs(rep.switches.front() - exact.tau)
                                                     : std::numeric_limits<double>::infinity();
    rep.terminal_violation = sol.terminal_violation;
    rep.endpoint_error = (x_T.head(2) - exact.final_point).norm();

    Vec psi_T(3);
    psi_T << exact.psi1_T, exact.psi2_T, exact.psi3;
    const AdjointTrajectory adjoint = integrate_adjoint(spec, sol.trajectory, sol.control, psi_T);
    rep.transversality =
        check_transversality_fixed(spec, adjoint, sol.trajectory, sol.control, opts.solve.tol_active);
    const Vec u_T = sol.control.values.row(N - 1).transpose();
    rep.transversality.hamiltonian_residual =
        check_free_time(spec, x_T, u_T, psi_T, sol.T_opt).residual;

    const std::vector<Endpoint> probes = sample_probes({Endpoint{x_T, sol.T_opt}}, spec.t0);
    try {
        rep.usc = usc_verdict(spec, probes);
    } catch (const std::exception &e) {
        rep.usc.notes.push_back(std::string("USC check failed: ") + e.what());
    }

    rep.pass = rep.T_error <= th.T_error && rep.terminal_violation <= th.terminal_violation &&
               rep.switch_time_error <= th.switch_steps * h &&
               rep.endpoint_error <= th.endpoint_error &&
               rep.transversality.endpoint_residual <= th.transversality &&
               rep.usc.verdict == UscVerdict::Holds;
    return rep;
}

} // namespace penalight
