/**
 * @file discretize.hpp
 * @brief Piecewise-constant controls on a uniform grid, fixed-step RK4 state
 *        and adjoint integration, and trapezoidal L2 quadrature.
 */
#pragma once

#include <stdexcept>

#include "penalight/model.hpp"

namespace penalight {

/// Raised when an integration produces a non-finite value.
class DivergenceError : public std::runtime_error {
  public:
    DivergenceError(const std::string &what, int node)
        : std::runtime_error(what), node_(node) {}
    [[nodiscard]] int node() const { return node_; }

  private:
    int node_;
};

/// u_k constant on [t0 + k h, t0 + (k+1) h), k = 0..N-1.
struct ControlGrid {
    double t0 = 0.0;
    double T = 0.0;
    Mat values; ///< N x m

    [[nodiscard]] int n_intervals() const { return static_cast<int>(values.rows()); }
    [[nodiscard]] double step() const { return (T - t0) / n_intervals(); }
    [[nodiscard]] double node_time(int k) const { return t0 + k * step(); }
    /// Control in force at node k; the last node reuses the last interval.
    [[nodiscard]] Vec at_node(int k) const {
        return values.row(std::min(k, n_intervals() - 1)).transpose();
    }

    static ControlGrid constant(double t0, double T, int n, const Vec &u);
    /// Samples u(t) at interval midpoints.
    static ControlGrid sample(double t0, double T, int n, const std::function<Vec(double)> &u);
};

struct Trajectory {
    Vec times;  ///< N+1
    Mat states; ///< (N+1) x n

    [[nodiscard]] Vec state(int k) const { return states.row(k).transpose(); }
    [[nodiscard]] Vec final_state() const { return state(static_cast<int>(states.rows()) - 1); }
};

struct AdjointTrajectory {
    Vec times; ///< N+1
    Mat psi;   ///< (N+1) x n

    [[nodiscard]] Vec at(int k) const { return psi.row(k).transpose(); }
};

/// One classical RK4 step per grid interval with the control frozen.
Trajectory integrate_rk4(const ProblemSpec &spec, const ControlGrid &grid);

/// Same, starting from an arbitrary initial state.
Trajectory integrate_rk4(const ProblemSpec &spec, const ControlGrid &grid, const Vec &x_start);

/**
 * @brief Backward RK4 for psi' = -f_x(x(t), u(t), t)^T psi from psi(T) = psi_T.
 *
 * The state at half steps is the average of the neighbouring trajectory nodes.
 * psi at the final node equals psi_T exactly.
 */
AdjointTrajectory integrate_adjoint(const ProblemSpec &spec, const Trajectory &traj,
                                    const ControlGrid &grid, const Vec &psi_T);

/// sqrt of the trapezoidal integral of sum_i values(k, i)^2 with node spacing h.
double l2_norm_on_grid(const Mat &values, double h);

/// Trapezoid node weights (1/2, 1, ..., 1, 1/2) for N+1 nodes.
Vec trapezoid_weights(int n_nodes);

} // namespace penalight
