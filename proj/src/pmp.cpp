#include "penalight/pmp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace penalight {

Vec nnls(const Mat &A, const Vec &b, int max_iter) {
    const auto n = A.cols();
    Vec x = Vec::Zero(n);
    if (n == 0) {
        return x;
    }
    if (max_iter <= 0) {
        max_iter = static_cast<int>(3 * n + 10);
    }
    const double tol = 10.0 * std::numeric_limits<double>::epsilon() *
                       std::max(1.0, A.cwiseAbs().maxCoeff()) * std::max(1.0, b.norm()) *
                       static_cast<double>(std::max(A.rows(), n));

    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    auto solve_passive = [&](Vec &s) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (passive[static_cast<std::size_t>(j)]) {
                idx.push_back(j);
            }
        }
        Mat AP(A.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            AP.col(static_cast<Eigen::Index>(i)) = A.col(idx[i]);
        }
        const Vec sP = AP.completeOrthogonalDecomposition().solve(b);
        s = Vec::Zero(n);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            s(idx[i]) = sP(static_cast<Eigen::Index>(i));
        }
    };

    Vec w = A.transpose() * (b - A * x);
    for (int outer = 0; outer < max_iter; ++outer) {
        Eigen::Index j_max = -1;
        double w_max = tol;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && w(j) > w_max) {
                w_max = w(j);
                j_max = j;
            }
        }
        if (j_max < 0) {
            break;
        }
        passive[static_cast<std::size_t>(j_max)] = true;

        Vec s;
        for (int inner = 0; inner < max_iter; ++inner) {
            solve_passive(s);
            double alpha = 1.0;
            bool feasible = true;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) {
                    feasible = false;
                    alpha = std::min(alpha, x(j) / (x(j) - s(j)));
                }
            }
            if (feasible) {
                break;
            }
            x += alpha * (s - x);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
                    passive[static_cast<std::size_t>(j)] = false;
                    x(j) = 0.0;
                }
            }
        }
        x = s;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[static_cast<std::size_t>(j)]) {
                x(j) = 0.0;
            }
        }
        w = A.transpose() * (b - A * x);
    }
    return x.cwiseMax(0.0);
}

SignedLsResult signed_least_squares(const Mat &A_free, const Mat &A_nonneg, const Vec &target) {
    const auto n = target.size();
    SignedLsResult out;

    Mat stacked(n, A_free.cols() + A_nonneg.cols());
    stacked.leftCols(A_free.cols()) = A_free;
    stacked.rightCols(A_nonneg.cols()) = A_nonneg;
    if (stacked.cols() > 0) {
        Eigen::ColPivHouseholderQR<Mat> qr(stacked);
        qr.setThreshold(1e-10);
        out.rank_deficient = qr.rank() < stacked.cols();
    }

    Mat P = Mat::Identity(n, n);
    Eigen::CompleteOrthogonalDecomposition<Mat> cod;
    if (A_free.cols() > 0) {
        cod.compute(A_free);
        P -= A_free * cod.pseudoInverse();
    }
    out.nonneg = nnls(P * A_nonneg, P * target);
    const Vec rest = target - A_nonneg * out.nonneg;
    out.free = A_free.cols() > 0 ? Vec(cod.solve(rest)) : Vec(0);
    out.residual = (rest - A_free * out.free).norm();
    return out;
}

double hamiltonian(const ProblemSpec &spec, const Vec &x, const Vec &u, const Vec &psi, double t) {
    return psi.dot(spec.dynamics(x, u, t));
}

namespace {

Mat gradient_matrix(const std::vector<TerminalConstraint> &cs, const Vec &x, double t, int n) {
    Mat A(n, static_cast<Eigen::Index>(cs.size()));
    for (std::size_t k = 0; k < cs.size(); ++k) {
        A.col(static_cast<Eigen::Index>(k)) = cs[k].grad_x(x, t);
    }
    return A;
}

} // namespace

MultiplierRecovery recover_multipliers(const ProblemSpec &spec, const Vec &psi_T, const Vec &x_T,
                                       double T) {
    const int n = spec.state_dim;
    const Mat AE = gradient_matrix(spec.eq_constraints, x_T, T, n);
    const Mat AI = gradient_matrix(spec.ineq_constraints, x_T, T, n);
    // psi_T + grad Phi0 + AE nu + AI mu = 0
    const Vec target = -(psi_T + spec.terminal_cost.grad_x(x_T, T));
    const SignedLsResult ls = signed_least_squares(AE, AI, target);
    return {ls.free, ls.nonneg, ls.residual, ls.rank_deficient};
}

TransversalityReport check_transversality_fixed(const ProblemSpec &spec,
                                                const AdjointTrajectory &adjoint,
                                                const Trajectory &traj, const ControlGrid &grid,
                                                double tol_active, double mu_tol) {
    const int N = grid.n_intervals();
    if (adjoint.psi.rows() != N + 1 || traj.states.rows() != N + 1) {
        throw std::invalid_argument("adjoint, trajectory and grid are not aligned");
    }
    const Vec x_T = traj.final_state();
    const MultiplierRecovery rec = recover_multipliers(spec, adjoint.at(N), x_T, grid.T);

    TransversalityReport rep;
    rep.nu = rec.nu;
    rep.mu = rec.mu;
    rep.endpoint_residual = rec.residual;
    rep.rank_deficient = rec.rank_deficient;
    for (std::size_t j = 0; j < spec.ineq_constraints.size(); ++j) {
        const bool active = spec.ineq_constraints[j].value(x_T, grid.T) >= -tol_active;
        rep.complementarity_ok.push_back(active || rec.mu(static_cast<Eigen::Index>(j)) <= mu_tol);
    }
    if (spec.left_endpoint && !spec.left_endpoint->free_t0) {
        rep.left_residual = check_left_endpoint(spec, adjoint.at(0), traj.state(0), grid.t0).residual;
    }
    return rep;
}

HamiltonianCheck check_free_time(const ProblemSpec &spec, const Vec &x_T, const Vec &u_T,
                                 const Vec &psi_T, double T) {
    if (spec.time_mode != TimeMode::Free) {
        throw MisuseError("check_free_time needs a free terminal time problem");
    }
    HamiltonianCheck out;
    out.residual = std::abs(hamiltonian(spec, x_T, u_T, psi_T, T));
    out.degenerate_adjoint = psi_T.isZero(0.0);
    return out;
}

double check_moving_manifold(const ProblemSpec &spec, const Vec &x_T, const Vec &u_T,
                             const Vec &psi_T, double T, const Vec &nu, const Vec &mu) {
    if (nu.size() != static_cast<Eigen::Index>(spec.eq_constraints.size()) ||
        mu.size() != static_cast<Eigen::Index>(spec.ineq_constraints.size())) {
        throw std::invalid_argument("multiplier sizes do not match the constraint lists");
    }
    double time_terms = spec.terminal_cost.time_partial(x_T, T);
    for (std::size_t k = 0; k < spec.eq_constraints.size(); ++k) {
        time_terms += nu(static_cast<Eigen::Index>(k)) * spec.eq_constraints[k].time_partial(x_T, T);
    }
    for (std::size_t j = 0; j < spec.ineq_constraints.size(); ++j) {
        time_terms +=
            mu(static_cast<Eigen::Index>(j)) * spec.ineq_constraints[j].time_partial(x_T, T);
    }
    return std::abs(hamiltonian(spec, x_T, u_T, psi_T, T) - time_terms);
}

LeftEndpointCheck check_left_endpoint(const ProblemSpec &spec, const Vec &psi_t0,
                                      const Vec &x0_actual, double t0) {
    if (!spec.left_endpoint ||
        (spec.left_endpoint->eq.empty() && spec.left_endpoint->ineq.empty())) {
        throw MisuseError("problem has no left-endpoint constraints");
    }
    if (spec.left_endpoint->free_t0) {
        throw MisuseError("left transversality with a free initial time is not supported");
    }
    const int n = spec.state_dim;
    const Mat AE = gradient_matrix(spec.left_endpoint->eq, x0_actual, t0, n);
    const Mat AI = gradient_matrix(spec.left_endpoint->ineq, x0_actual, t0, n);
    const SignedLsResult ls = signed_least_squares(AE, AI, psi_t0);
    return {ls.free, ls.nonneg, ls.residual};
}

namespace {

void require_control_affine(const ProblemSpec &spec, const Vec &x, double t) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Mat reference;
    for (int probe = 0; probe < 3; ++probe) {
        Vec u(spec.control_dim);
        for (int i = 0; i < spec.control_dim; ++i) {
            u(i) = spec.control_lower(i) +
                   (spec.control_upper(i) - spec.control_lower(i)) * unit(rng);
        }
        const Mat fu = spec.dynamics_jac_u(x, u, t);
        if (probe == 0) {
            reference = fu;
        } else if ((fu - reference).cwiseAbs().maxCoeff() > 1e-10) {
            throw UnsupportedProblemError("dynamics are not affine in the control");
        }
    }
}

} // namespace

BangBangControl bang_bang_control(const ProblemSpec &spec, const AdjointTrajectory &adjoint,
                                  const Trajectory &traj, const ControlGrid &grid,
                                  double singular_tol) {
    const int N = grid.n_intervals();
    const int m = spec.control_dim;
    if (adjoint.psi.rows() != N + 1 || traj.states.rows() != N + 1) {
        throw std::invalid_argument("adjoint, trajectory and grid are not aligned");
    }
    require_control_affine(spec, spec.x0, grid.t0);

    BangBangControl out;
    out.grid = grid;
    out.singular.assign(static_cast<std::size_t>(N), false);
    out.switching.assign(static_cast<std::size_t>(N), false);
    const Vec u_ref = 0.5 * (spec.control_lower + spec.control_upper);
    auto sigma_at = [&](const Vec &x, const Vec &psi, double t) -> Vec {
        return spec.dynamics_jac_u(x, u_ref, t).transpose() * psi;
    };

    for (int k = 0; k < N; ++k) {
        const double t_lo = grid.node_time(k);
        const double t_hi = grid.node_time(k + 1);
        const Vec s_lo = sigma_at(traj.state(k), adjoint.at(k), t_lo);
        const Vec s_hi = sigma_at(traj.state(k + 1), adjoint.at(k + 1), t_hi);
        const Vec s_mid = sigma_at(0.5 * (traj.state(k) + traj.state(k + 1)),
                                   0.5 * (adjoint.at(k) + adjoint.at(k + 1)),
                                   0.5 * (t_lo + t_hi));
        bool singular = false;
        bool switching = false;
        for (int i = 0; i < m; ++i) {
            if (std::abs(s_lo(i)) <= singular_tol && std::abs(s_hi(i)) <= singular_tol) {
                singular = true;
                out.grid.values(k, i) = u_ref(i);
                continue;
            }
            if ((s_lo(i) > 0.0) != (s_hi(i) > 0.0)) {
                switching = true;
            }
            out.grid.values(k, i) = s_mid(i) > 0.0 ? spec.control_upper(i) : spec.control_lower(i);
        }
        out.singular[static_cast<std::size_t>(k)] = singular;
        out.switching[static_cast<std::size_t>(k)] = switching;
    }
    return out;
}

} // namespace penalight
