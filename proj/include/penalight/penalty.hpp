/**
 * @file penalty.hpp
 * @brief Exact penalty phi = phi_diff + phi_term, its terminal subdifferential,
 *        and the penalized objective F_lambda = J + lambda * phi.
 */
#pragma once

#include <stdexcept>
#include <vector>

#include "penalight/discretize.hpp"

namespace penalight {

inline constexpr double kDefaultTolActive = 1e-8;
inline constexpr double kDivisionGuard = 1e-12;

/// Raised when a nonsmooth constraint is active at a point without kink data.
class UnsupportedPointError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// phi_diff is too small for the normalized residual w = r / phi_diff.
class NearFeasibleError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct TerminalPenalty {
    double value = 0.0;
    std::vector<int> active_eq;
    std::vector<int> active_ineq;
};

struct Hull {
    std::vector<Vec> generators;
};

struct PenaltyValue {
    double J = 0.0;
    double phi_diff = 0.0;
    double phi_term = 0.0;
    std::vector<int> active_eq;
    std::vector<int> active_ineq;
    double F_lambda = 0.0;
    Vec x_T;
};

/// Free derivative samples z = x' at the N+1 grid nodes with the control grid.
struct FreeTrajectoryPair {
    Mat z;
    ControlGrid grid;
};

struct PhiDiffGradient {
    Mat w;        ///< residual / phi_diff at nodes
    Mat gradient; ///< w(t) - int_t^T f_x^T w, as a grid function
    double phi_diff = 0.0;
};

/**
 * max(max_E |Phi_k|, max_I Phi_j) at (x_T, T); 0 when there are no constraints.
 * Indices within tol_active of the max are reported as active.
 */
TerminalPenalty phi_term(const ProblemSpec &spec, const Vec &x_T, double T,
                         double tol_active = kDefaultTolActive);

/**
 * Generators of the terminal subdifferential. For phi_term > tol_active the
 * signed gradients of the active constraints; otherwise +-grad of every
 * equality plus the gradients of the active inequalities. Nonsmooth constraints
 * contribute their one-sided gradients at a kink.
 */
Hull phi_term_subdifferential(const ProblemSpec &spec, const Vec &x_T, double T,
                              double tol_active = kDefaultTolActive);

/// States x(t) = x0 + int z by cumulative trapezoid.
Mat reconstruct_states(const ProblemSpec &spec, const FreeTrajectoryPair &pair);

/// L2 norm of z - f(x, u, t) with x reconstructed from z.
double phi_diff_value(const ProblemSpec &spec, const FreeTrajectoryPair &pair);

/**
 * Gradient of phi_diff with respect to z in the trapezoid-weighted L2 inner
 * product. At interior nodes the tail term is the trapezoidal integral of
 * f_x^T w from t_k to T; the two end nodes carry the half-weight corrections
 * that make the result the exact gradient of the discretized functional.
 */
PhiDiffGradient phi_diff_gradient(const ProblemSpec &spec, const FreeTrajectoryPair &pair);

/// F_lambda with dynamics satisfied by RK4 (phi_diff = 0).
PenaltyValue penalized_objective(const ProblemSpec &spec, const ControlGrid &grid, double lambda,
                                 double tol_active = kDefaultTolActive);

} // namespace penalight
