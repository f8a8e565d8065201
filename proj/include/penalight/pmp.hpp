/**
 * @file pmp.hpp
 * @brief Maximum-principle checks on candidate solutions: Hamiltonian,
 *        endpoint multiplier recovery and transversality residuals for fixed
 *        time, free time, moving terminal manifolds and a free left endpoint.
 *
 * Sign conventions: H = <psi, f> is maximized over the control box, and
 *   psi(T)  = -dPhi0/dx - sum nu_k dPhi_k/dx - sum mu_j dPhi_j/dx,  mu >= 0,
 *   psi(t0) = sum gamma_l dchi_l/dx + sum delta_l dchi_l/dx,          delta >= 0.
 */
#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "penalight/discretize.hpp"

namespace penalight {

inline constexpr double kMuTol = 1e-8;

class UnsupportedProblemError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Lawson-Hanson active-set solution of min |A x - b| subject to x >= 0.
Vec nnls(const Mat &A, const Vec &b, int max_iter = 0);

/**
 * min |A_free a + A_nonneg c - target| with c >= 0. The free block is
 * eliminated through its projector, the sign-constrained block goes through
 * NNLS, then a is the minimum-norm least-squares solution given c.
 */
struct SignedLsResult {
    Vec free;
    Vec nonneg;
    double residual = 0.0;
    bool rank_deficient = false;
};
SignedLsResult signed_least_squares(const Mat &A_free, const Mat &A_nonneg, const Vec &target);

double hamiltonian(const ProblemSpec &spec, const Vec &x, const Vec &u, const Vec &psi, double t);

struct MultiplierRecovery {
    Vec nu; ///< one per equality, any sign
    Vec mu; ///< one per inequality, >= 0
    double residual = 0.0;
    bool rank_deficient = false;
};

MultiplierRecovery recover_multipliers(const ProblemSpec &spec, const Vec &psi_T, const Vec &x_T,
                                       double T);

struct TransversalityReport {
    Vec nu;
    Vec mu;
    double endpoint_residual = 0.0;
    std::optional<double> hamiltonian_residual;
    std::optional<double> left_residual;
    /// false where mu_j > mu_tol although constraint j is inactive
    std::vector<bool> complementarity_ok;
    bool rank_deficient = false;
};

TransversalityReport check_transversality_fixed(const ProblemSpec &spec,
                                                const AdjointTrajectory &adjoint,
                                                const Trajectory &traj, const ControlGrid &grid,
                                                double tol_active = 1e-8,
                                                double mu_tol = kMuTol);

struct HamiltonianCheck {
    double residual = 0.0;
    bool degenerate_adjoint = false; ///< psi_T = 0 makes the check vacuous
};

/// |H(x_T, u_T, psi_T, T)| for free terminal time with time-independent constraints.
HamiltonianCheck check_free_time(const ProblemSpec &spec, const Vec &x_T, const Vec &u_T,
                                 const Vec &psi_T, double T);

/// |H - dPhi0/dt - sum nu_k dPhi_k/dt - sum mu_j dPhi_j/dt| at the terminal time.
double check_moving_manifold(const ProblemSpec &spec, const Vec &x_T, const Vec &u_T,
                             const Vec &psi_T, double T, const Vec &nu, const Vec &mu);

struct LeftEndpointCheck {
    Vec gamma;
    Vec delta;
    double residual = 0.0;
};

/// Left transversality at a fixed initial time; free t0 is unsupported.
LeftEndpointCheck check_left_endpoint(const ProblemSpec &spec, const Vec &psi_t0,
                                      const Vec &x0_actual, double t0);

struct BangBangControl {
    ControlGrid grid;
    std::vector<bool> singular;  ///< switching function vanishes on the interval
    std::vector<bool> switching; ///< switching function changes sign inside the interval
};

/**
 * Box vertex maximizing <psi, f_u u> on each interval, using the switching
 * function f_u^T psi at the interval midpoint. Requires dynamics affine in u.
 */
BangBangControl bang_bang_control(const ProblemSpec &spec, const AdjointTrajectory &adjoint,
                                  const Trajectory &traj, const ControlGrid &grid,
                                  double singular_tol = 1e-12);

} // namespace penalight
