/**
 * @file model.hpp
 * @brief Mayer-form optimal control problem data and the built-in problem registry.
 *
 * A problem is described by native callbacks: dynamics f(x,u,t) with its
 * Jacobians, a terminal cost Phi0(x_T,T), lists of terminal equality and
 * inequality constraints, a control box, and the endpoint regime.
 */
#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace penalight {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Thrown when a registry lookup fails.
class NotFoundError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Thrown when an operation is called outside its supported regime.
class MisuseError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

using DynamicsFn = std::function<Vec(const Vec &x, const Vec &u, double t)>;
using JacobianFn = std::function<Mat(const Vec &x, const Vec &u, double t)>;
using EndpointScalarFn = std::function<double(const Vec &x, double t)>;
using EndpointGradFn = std::function<Vec(const Vec &x, double t)>;
/// One-sided gradients at a kink; empty when the point is not a kink.
using KinkGradFn = std::function<std::vector<Vec>(const Vec &x, double t)>;

/**
 * @brief A scalar endpoint function Phi(x, t) with its partial derivatives.
 *
 * Used for terminal constraints, the terminal cost, and left-endpoint
 * constraints. A missing partial_t means the function is time independent.
 * Nonsmooth functions (smooth = false) must supply kink_grads; grad_x is
 * only consulted away from kinks.
 */
struct EndpointFunction {
    std::string name;
    EndpointScalarFn value;
    EndpointGradFn grad_x;
    EndpointScalarFn partial_t;
    bool smooth = true;
    KinkGradFn kink_grads;

    [[nodiscard]] double time_partial(const Vec &x, double t) const {
        return partial_t ? partial_t(x, t) : 0.0;
    }
};

using TerminalConstraint = EndpointFunction;

enum class TimeMode { Fixed, Free };

struct LeftEndpoint {
    std::vector<TerminalConstraint> eq;
    std::vector<TerminalConstraint> ineq;
    bool free_t0 = false;
};

struct ProblemSpec {
    std::string name;
    int state_dim = 0;
    int control_dim = 0;

    DynamicsFn dynamics;
    JacobianFn dynamics_jac_x;
    JacobianFn dynamics_jac_u;

    EndpointFunction terminal_cost;
    std::vector<TerminalConstraint> eq_constraints;
    std::vector<TerminalConstraint> ineq_constraints;

    Vec control_lower;
    Vec control_upper;

    double t0 = 0.0;
    Vec x0;
    TimeMode time_mode = TimeMode::Free;
    double fixed_T = 0.0; ///< only meaningful for TimeMode::Fixed

    std::optional<LeftEndpoint> left_endpoint;

    [[nodiscard]] std::size_t num_constraints() const {
        return eq_constraints.size() + ineq_constraints.size();
    }
};

struct CheckEntry {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<CheckEntry> checks;

    [[nodiscard]] bool all_passed() const;
    [[nodiscard]] std::vector<CheckEntry> failures() const;
};

struct ValidationOptions {
    int probes = 10;
    double rel_tol = 1e-5;
    unsigned seed = 12345;
};

/// Runs every structural and finite-difference check; never throws on a bad spec.
ValidationReport validate_problem(const ProblemSpec &spec, const ValidationOptions &opts = {});

/**
 * @brief A closed-form optimal solution attached to a registry entry.
 *
 * control(t) is the exact optimal control; psi_T the exact adjoint at the
 * right endpoint. Used by the transversality commands and tests.
 */
struct ReferenceSolution {
    double T = 0.0;
    Vec x_T;
    Vec u_T;
    Vec psi_T;
    std::function<Vec(double t)> control;
    std::vector<double> switch_times; ///< control discontinuities in (t0, T)
};

struct RegistryEntry {
    ProblemSpec spec;
    /// Feasible endpoints (x_T, T) around which USC probes are sampled.
    std::vector<std::pair<Vec, double>> reference_endpoints;
    std::optional<ReferenceSolution> reference;
    std::string description;
};

/// Names known to the registry, in registration order.
std::vector<std::string> registry_names();

/// Full registry entry; throws NotFoundError listing the known names.
const RegistryEntry &registry_entry(const std::string &name);

/// Problem spec by name ("oscillator", "nonsmooth_abs", ...).
ProblemSpec builtin_problem(const std::string &name);

} // namespace penalight
