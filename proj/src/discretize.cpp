#include "penalight/discretize.hpp"

#include <cmath>

namespace penalight {

ControlGrid ControlGrid::constant(double t0, double T, int n, const Vec &u) {
    ControlGrid g;
    g.t0 = t0;
    g.T = T;
    g.values = u.transpose().replicate(n, 1);
    return g;
}

ControlGrid ControlGrid::sample(double t0, double T, int n, const std::function<Vec(double)> &u) {
    ControlGrid g;
    g.t0 = t0;
    g.T = T;
    const double h = (T - t0) / n;
    for (int k = 0; k < n; ++k) {
        const Vec uk = u(t0 + (k + 0.5) * h);
        if (k == 0) {
            g.values.resize(n, uk.size());
        }
        g.values.row(k) = uk.transpose();
    }
    return g;
}

namespace {

void require_grid(const ProblemSpec &spec, const ControlGrid &grid) {
    if (grid.n_intervals() < 1) {
        throw std::invalid_argument("control grid needs at least one interval");
    }
    if (grid.values.cols() != spec.control_dim) {
        throw std::invalid_argument("control grid has " + std::to_string(grid.values.cols()) +
                                    " columns, problem has control_dim " +
                                    std::to_string(spec.control_dim));
    }
    if (!(grid.T > grid.t0)) {
        throw std::invalid_argument("control grid needs T > t0");
    }
}

} // namespace

Trajectory integrate_rk4(const ProblemSpec &spec, const ControlGrid &grid) {
    return integrate_rk4(spec, grid, spec.x0);
}

Trajectory integrate_rk4(const ProblemSpec &spec, const ControlGrid &grid, const Vec &x_start) {
    require_grid(spec, grid);
    const int N = grid.n_intervals();
    const double h = grid.step();

    Trajectory traj;
    traj.times.resize(N + 1);
    traj.states.resize(N + 1, spec.state_dim);
    traj.times(0) = grid.t0;
    traj.states.row(0) = x_start.transpose();

    Vec x = x_start;
    Vec u(spec.control_dim);
    Vec stage(spec.state_dim);
    Vec k1, k2, k3, k4;
    for (int k = 0; k < N; ++k) {
        const double t = grid.t0 + k * h;
        u = grid.values.row(k).transpose();
        k1 = spec.dynamics(x, u, t);
        stage.noalias() = x + 0.5 * h * k1;
        k2 = spec.dynamics(stage, u, t + 0.5 * h);
        stage.noalias() = x + 0.5 * h * k2;
        k3 = spec.dynamics(stage, u, t + 0.5 * h);
        stage.noalias() = x + h * k3;
        k4 = spec.dynamics(stage, u, t + h);
        x.noalias() += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite()) {
            throw DivergenceError("state diverged at node " + std::to_string(k + 1), k + 1);
        }
        traj.times(k + 1) = k + 1 == N ? grid.T : grid.t0 + (k + 1) * h;
        traj.states.row(k + 1) = x.transpose();
    }
    return traj;
}

AdjointTrajectory integrate_adjoint(const ProblemSpec &spec, const Trajectory &traj,
                                    const ControlGrid &grid, const Vec &psi_T) {
    require_grid(spec, grid);
    const int N = grid.n_intervals();
    if (traj.states.rows() != N + 1) {
        throw std::invalid_argument("trajectory does not match the control grid");
    }
    if (!psi_T.allFinite()) {
        throw std::invalid_argument("terminal adjoint value is not finite");
    }
    const double h = grid.step();

    AdjointTrajectory adj;
    adj.times = traj.times;
    adj.psi.resize(N + 1, spec.state_dim);
    adj.psi.row(N) = psi_T.transpose();

    auto rhs = [&](const Vec &x, const Vec &u, double t, const Vec &psi) -> Vec {
        return -spec.dynamics_jac_x(x, u, t).transpose() * psi;
    };

    Vec psi = psi_T;
    for (int k = N - 1; k >= 0; --k) {
        const double t_hi = grid.t0 + (k + 1) * h;
        const Vec u = grid.values.row(k).transpose();
        const Vec x_hi = traj.state(k + 1);
        const Vec x_lo = traj.state(k);
        const Vec x_mid = 0.5 * (x_hi + x_lo);
        // Step in reversed time s = T - t, so d psi / ds = -rhs.
        const Vec k1 = -rhs(x_hi, u, t_hi, psi);
        const Vec k2 = -rhs(x_mid, u, t_hi - 0.5 * h, psi + 0.5 * h * k1);
        const Vec k3 = -rhs(x_mid, u, t_hi - 0.5 * h, psi + 0.5 * h * k2);
        const Vec k4 = -rhs(x_lo, u, t_hi - h, psi + h * k3);
        psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!psi.allFinite()) {
            throw DivergenceError("adjoint diverged at node " + std::to_string(k), k);
        }
        adj.psi.row(k) = psi.transpose();
    }
    return adj;
}

Vec trapezoid_weights(int n_nodes) {
    Vec w = Vec::Ones(n_nodes);
    if (n_nodes >= 2) {
        w(0) = 0.5;
        w(n_nodes - 1) = 0.5;
    }
    return w;
}

double l2_norm_on_grid(const Mat &values, double h) {
    if (!(h > 0.0)) {
        throw std::invalid_argument("l2_norm_on_grid needs h > 0");
    }
    if (values.rows() < 2) {
        return 0.0;
    }
    const Vec sq = values.rowwise().squaredNorm();
    return std::sqrt(h * trapezoid_weights(static_cast<int>(values.rows())).dot(sq));
}

} // namespace penalight
