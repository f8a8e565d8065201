/**
 * @file bench.hpp
 * @brief Closed-form time-optimal solution of the harmonic oscillator and a
 *        benchmark run that compares the transcription solver against it.
 */
#pragma once

#include <vector>

#include "penalight/pmp.hpp"
#include "penalight/regularity.hpp"
#include "penalight/solver.hpp"

namespace penalight {

/// Oscillator x1' = x2, x2' = -x1 + u, |u| <= 1, from (2, 0) to x2 = 0 in minimum time.
struct AnalyticOscillatorSolution {
    double T_star = 0.0;
    double tau = 0.0;
    Vec switch_point;
    Vec final_point;
    double psi1_T = 0.0;
    double psi2_T = 0.0;
    double psi3 = -1.0;

    /// u = -1 on [0, tau), +1 afterwards.
    [[nodiscard]] double control(double t) const;
    /// (x1, x2, x3 = t) along the optimal arcs.
    [[nodiscard]] Vec state(double t) const;
    [[nodiscard]] Vec adjoint(double t) const;
};

AnalyticOscillatorSolution analytic_oscillator();

inline constexpr double kSwitchBand = 0.5;

/**
 * Switch times of a scalar control. A switch is a change between the saturated
 * regimes u >= band and u <= -band; it is placed at the midpoint of the
 * intervals spent inside the band, or at the shared node for a direct jump.
 */
std::vector<double> detect_switch(const ControlGrid &control, double threshold = kSwitchBand);

struct BenchThresholds {
    double T_error = 1e-3;
    double terminal_violation = 1e-3;
    double switch_steps = 2.0; ///< switch error allowed, in units of h
    double endpoint_error = 1e-2;
    double transversality = 1e-6;
};

struct BenchOptions {
    SolveOptions solve;
    BenchThresholds thresholds;
};

struct BenchReport {
    SolveResult solution;
    double T_error = 0.0;
    std::vector<double> switches;
    double switch_time_error = 0.0; ///< infinite unless exactly one switch
    double terminal_violation = 0.0;
    double endpoint_error = 0.0;
    /// hamiltonian_residual is reported only; the discrete switch offset keeps it at O(h).
    TransversalityReport transversality;
    UscReport usc;
    bool pass = false;
};

BenchReport run_bench(const BenchOptions &opts = {});

} // namespace penalight
