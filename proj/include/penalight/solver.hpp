/**
 * @file solver.hpp
 * @brief Direct transcription of free-time Mayer problems: tanh-parameterized
 *        piecewise-constant controls, RK4 states, and a Nelder-Mead search over
 *        (T, theta) on the penalized objective Phi0 + rho * phi_term.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include "penalight/penalty.hpp"

namespace penalight {

inline constexpr double kSentinel = 1e30;
inline constexpr double kFeasTol = 1e-3;

// ----------------------------------------------------------------------------
// Nelder-Mead
// ----------------------------------------------------------------------------

struct NelderMeadOptions {
    int max_iters = 10000;
    double f_tol = 1e-8;
    double x_tol = 1e-8;
    /// Vertex i is x0 + initial_scale * (1 + |x0_i|) * sign_i * e_i.
    double initial_scale = 0.05;
    /// Per-coordinate step signs; empty means all +1.
    std::vector<double> step_signs;
};

struct NelderMeadResult {
    Vec x_best;
    double f_best = 0.0;
    int iterations = 0;
    long evaluations = 0;
    bool converged = false;
};

using Objective = std::function<double(const Vec &)>;

/// Reflection 1, expansion 2, contractions 0.5, shrink 0.5.
NelderMeadResult nelder_mead(const Objective &objective, const Vec &x0,
                             const NelderMeadOptions &opts = {});

// ----------------------------------------------------------------------------
// Time-optimal transcription
// ----------------------------------------------------------------------------

/// u = -1 on the first third of the intervals, +1 afterwards.
struct PaperBangBang {};
struct ConstantInit {
    double u = 0.0;
};
struct CustomInit {
    Mat theta; ///< N x m
};
using InitPattern = std::variant<PaperBangBang, ConstantInit, CustomInit>;

struct SolveOptions {
    int n_intervals = 200;
    double rho = 100.0;
    double tanh_slope = 10.0;
    double T_init = 3.5;
    InitPattern init_pattern = PaperBangBang{};
    int max_iters = 200000; ///< per Nelder-Mead run
    double f_tol = 1e-8;
    double x_tol = 1e-8;
    int max_restarts = 10;
    std::uint64_t seed = 1;
    double tol_active = kDefaultTolActive;

    /// Windowed polishing after the full-space runs; 0 disables it.
    int polish_sweeps = 12;
    int polish_window = 6;
    int polish_iters = 300;
    double polish_scale = 0.3;
    double polish_clamp = 0.25;
    double polish_T_half_width = 0.01;

    void validate(const ProblemSpec &spec) const;
};

struct SolveResult {
    double T_opt = 0.0;
    Mat theta; ///< N x m
    ControlGrid control;
    Trajectory trajectory;
    double objective = 0.0;
    double cost = 0.0; ///< Phi0 at the solution
    double terminal_violation = 0.0;
    long iterations = 0;
    long evaluations = 0;
    int restarts = 0;
    bool converged = false;
    std::vector<double> objective_history; ///< incumbent after each run
};

/// u = lo + (hi - lo) * (tanh(slope * theta) + 1) / 2 per component.
ControlGrid parameterize_control(const Mat &theta, const ProblemSpec &spec, double t0, double T,
                                 double slope);

/// theta producing u under the same map (clamped strictly inside the box).
Mat invert_control(const Mat &u, const ProblemSpec &spec, double slope);

/// Initial theta for the given pattern.
Mat initial_theta(const ProblemSpec &spec, const SolveOptions &opts);

/**
 * Penalized transcription objective at decision vector (T, theta_1..theta_N):
 * Phi0(x_T, T) + rho * max(phi_term, 0), or kSentinel when T <= t0 + 1e-6 or
 * the integration diverges.
 */
double transcription_objective(const ProblemSpec &spec, const SolveOptions &opts,
                               const Vec &decision);

SolveResult solve_time_optimal(const ProblemSpec &spec, const SolveOptions &opts = {});

struct SweepRow {
    double lambda = 0.0;
    double objective = 0.0;
    double cost = 0.0;
    double T_opt = 0.0;
    double terminal_violation = 0.0;
    bool converged = false;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::optional<double> exactness_threshold; ///< smallest lambda with violation <= feas_tol
};

/// One solve per lambda (used as rho); rows come back in input order.
SweepResult exactness_sweep(const ProblemSpec &spec, const SolveOptions &opts,
                            const std::vector<double> &lambdas, double feas_tol = kFeasTol,
                            bool parallel = true);

} // namespace penalight
