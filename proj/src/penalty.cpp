#include "penalight/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace penalight {

TerminalPenalty phi_term(const ProblemSpec &spec, const Vec &x_T, double T, double tol_active) {
    TerminalPenalty out;
    if (spec.num_constraints() == 0) {
        return out;
    }
    const std::size_t ne = spec.eq_constraints.size();
    const std::size_t ni = spec.ineq_constraints.size();
    std::vector<double> eq_vals(ne);
    std::vector<double> ineq_vals(ni);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ne; ++k) {
        eq_vals[k] = std::abs(spec.eq_constraints[k].value(x_T, T));
        best = std::max(best, eq_vals[k]);
    }
    for (std::size_t j = 0; j < ni; ++j) {
        ineq_vals[j] = spec.ineq_constraints[j].value(x_T, T);
        best = std::max(best, ineq_vals[j]);
    }
    out.value = best;
    for (std::size_t k = 0; k < ne; ++k) {
        if (eq_vals[k] >= best - tol_active) {
            out.active_eq.push_back(static_cast<int>(k));
        }
    }
    for (std::size_t j = 0; j < ni; ++j) {
        if (ineq_vals[j] >= best - tol_active) {
            out.active_ineq.push_back(static_cast<int>(j));
        }
    }
    return out;
}

namespace {

// Gradients of one constraint at x: the one-sided set at a kink, else grad_x.
std::vector<Vec> constraint_gradients(const TerminalConstraint &c, const Vec &x, double T) {
    if (!c.smooth) {
        if (!c.kink_grads) {
            throw UnsupportedPointError("constraint '" + c.name +
                                        "' is nonsmooth and has no one-sided gradient data");
        }
        auto kinks = c.kink_grads(x, T);
        if (!kinks.empty()) {
            return kinks;
        }
    }
    return {c.grad_x(x, T)};
}

} // namespace

Hull phi_term_subdifferential(const ProblemSpec &spec, const Vec &x_T, double T,
                              double tol_active) {
    Hull hull;
    const TerminalPenalty pt = phi_term(spec, x_T, T, tol_active);
    if (pt.value > tol_active) {
        for (int k : pt.active_eq) {
            const auto &c = spec.eq_constraints[k];
            const double sign = c.value(x_T, T) >= 0.0 ? 1.0 : -1.0;
            for (const Vec &g : constraint_gradients(c, x_T, T)) {
                hull.generators.push_back(sign * g);
            }
        }
        for (int j : pt.active_ineq) {
            for (const Vec &g : constraint_gradients(spec.ineq_constraints[j], x_T, T)) {
                hull.generators.push_back(g);
            }
        }
        return hull;
    }
    // Feasible point: every equality contributes both signs, inequalities
    // that are active at zero contribute their gradient.
    for (const auto &c : spec.eq_constraints) {
        for (const Vec &g : constraint_gradients(c, x_T, T)) {
            hull.generators.push_back(g);
            hull.generators.push_back(-g);
        }
    }
    for (const auto &c : spec.ineq_constraints) {
        if (c.value(x_T, T) >= -tol_active) {
            for (const Vec &g : constraint_gradients(c, x_T, T)) {
                hull.generators.push_back(g);
            }
        }
    }
    return hull;
}

Mat reconstruct_states(const ProblemSpec &spec, const FreeTrajectoryPair &pair) {
    const int nodes = static_cast<int>(pair.z.rows());
    if (nodes != pair.grid.n_intervals() + 1 || pair.z.cols() != spec.state_dim) {
        throw std::invalid_argument("free trajectory pair dimensions are inconsistent");
    }
    const double h = pair.grid.step();
    Mat x(nodes, spec.state_dim);
    x.row(0) = spec.x0.transpose();
    for (int k = 1; k < nodes; ++k) {
        x.row(k) = x.row(k - 1) + 0.5 * h * (pair.z.row(k - 1) + pair.z.row(k));
    }
    return x;
}

namespace {

Mat residual(const ProblemSpec &spec, const FreeTrajectoryPair &pair, const Mat &x) {
    const int nodes = static_cast<int>(x.rows());
    Mat r(nodes, spec.state_dim);
    for (int k = 0; k < nodes; ++k) {
        const Vec f = spec.dynamics(x.row(k).transpose(), pair.grid.at_node(k),
                                    pair.grid.node_time(k));
        r.row(k) = pair.z.row(k) - f.transpose();
    }
    return r;
}

} // namespace

double phi_diff_value(const ProblemSpec &spec, const FreeTrajectoryPair &pair) {
    const Mat x = reconstruct_states(spec, pair);
    return l2_norm_on_grid(residual(spec, pair, x), pair.grid.step());
}

PhiDiffGradient phi_diff_gradient(const ProblemSpec &spec, const FreeTrajectoryPair &pair) {
    const Mat x = reconstruct_states(spec, pair);
    const Mat r = residual(spec, pair, x);
    const double h = pair.grid.step();
    const double phi = l2_norm_on_grid(r, h);
    if (!(phi > kDivisionGuard)) {
        throw NearFeasibleError("phi_diff is within the division guard; the gradient formula "
                                "needs a strictly infeasible pair");
    }

    PhiDiffGradient out;
    out.phi_diff = phi;
    out.w = r / phi;

    const int nodes = static_cast<int>(x.rows());
    const int N = nodes - 1;
    Mat v(nodes, spec.state_dim); // f_x^T w at each node
    for (int k = 0; k < nodes; ++k) {
        const Mat fx =
            spec.dynamics_jac_x(x.row(k).transpose(), pair.grid.at_node(k), pair.grid.node_time(k));
        v.row(k) = (fx.transpose() * out.w.row(k).transpose()).transpose();
    }

    // tail.row(k) = trapezoid integral of v from t_k to T.
    Mat tail = Mat::Zero(nodes, spec.state_dim);
    for (int k = N - 1; k >= 0; --k) {
        tail.row(k) = tail.row(k + 1) + 0.5 * h * (v.row(k) + v.row(k + 1));
    }
    out.gradient = out.w - tail;
    out.gradient.row(0) += 0.5 * h * v.row(0);
    out.gradient.row(N) -= 0.5 * h * v.row(N);
    return out;
}

PenaltyValue penalized_objective(const ProblemSpec &spec, const ControlGrid &grid, double lambda,
                                 double tol_active) {
    if (lambda < 0.0) {
        throw std::invalid_argument("penalty weight must be nonnegative");
    }
    const Trajectory traj = integrate_rk4(spec, grid);
    PenaltyValue pv;
    pv.x_T = traj.final_state();
    pv.J = spec.terminal_cost.value(pv.x_T, grid.T);
    const TerminalPenalty pt = phi_term(spec, pv.x_T, grid.T, tol_active);
    pv.phi_term = pt.value;
    pv.active_eq = pt.active_eq;
    pv.active_ineq = pt.active_ineq;
    pv.F_lambda = pv.J + lambda * (pv.phi_diff + std::max(pv.phi_term, 0.0));
    return pv;
}

} // namespace penalight
