#include "penalight/model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace penalight {

bool ValidationReport::all_passed() const {
    for (const auto &c : checks) {
        if (!c.passed) {
            return false;
        }
    }
    return true;
}

std::vector<CheckEntry> ValidationReport::failures() const {
    std::vector<CheckEntry> out;
    for (const auto &c : checks) {
        if (!c.passed) {
            out.push_back(c);
        }
    }
    return out;
}

namespace {

double max_abs(const Mat &m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

bool all_finite(const Mat &m) { return m.allFinite(); }

// Central differences of a vector field with respect to one argument.
template <typename Eval>
Mat central_jacobian(Eval &&eval, const Vec &at, int rows) {
    Mat jac(rows, at.size());
    for (int j = 0; j < at.size(); ++j) {
        const double step = 1e-6 * (1.0 + std::abs(at(j)));
        Vec plus = at;
        Vec minus = at;
        plus(j) += step;
        minus(j) -= step;
        jac.col(j) = (eval(plus) - eval(minus)) / (2.0 * step);
    }
    return jac;
}

Vec central_gradient(const EndpointScalarFn &fn, const Vec &x, double t) {
    Vec g(x.size());
    for (int j = 0; j < x.size(); ++j) {
        const double step = 1e-6 * (1.0 + std::abs(x(j)));
        Vec plus = x;
        Vec minus = x;
        plus(j) += step;
        minus(j) -= step;
        g(j) = (fn(plus, t) - fn(minus, t)) / (2.0 * step);
    }
    return g;
}

std::string fmt_mismatch(double err, double scale) {
    std::ostringstream os;
    os << "max deviation " << err << " vs scale " << scale;
    return os.str();
}

struct Probe {
    Vec x;
    Vec u;
    double t;
};

// Probes near x0 with controls inside the box.
std::vector<Probe> make_probes(const ProblemSpec &spec, const ValidationOptions &opts) {
    std::mt19937 rng(opts.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Probe> probes;
    for (int p = 0; p < opts.probes; ++p) {
        Probe pr;
        pr.x = spec.x0;
        for (int i = 0; i < pr.x.size(); ++i) {
            pr.x(i) += gauss(rng);
        }
        pr.u.resize(spec.control_dim);
        for (int i = 0; i < spec.control_dim; ++i) {
            const double lo = spec.control_lower(i);
            const double hi = spec.control_upper(i);
            pr.u(i) = lo + (hi - lo) * unit(rng);
        }
        pr.t = spec.t0 + unit(rng);
        probes.push_back(std::move(pr));
    }
    return probes;
}

void check_endpoint_function(ValidationReport &report, const EndpointFunction &fn,
                             const std::string &label, const std::vector<Probe> &probes,
                             int n, double rel_tol) {
    if (!fn.value || (fn.smooth && !fn.grad_x)) {
        report.checks.push_back({label + " callbacks", false, "missing value or grad_x"});
        return;
    }
    if (!fn.smooth) {
        report.checks.push_back({label + " kink data", static_cast<bool>(fn.kink_grads),
                                 fn.kink_grads ? "" : "nonsmooth without kink_grads"});
        return;
    }
    bool shape_ok = true;
    bool grad_ok = true;
    std::string detail;
    for (const auto &pr : probes) {
        const Vec g = fn.grad_x(pr.x, pr.t);
        if (g.size() != n) {
            shape_ok = false;
            detail = "grad_x has size " + std::to_string(g.size());
            break;
        }
        const Vec fd = central_gradient(fn.value, pr.x, pr.t);
        const double err = max_abs(g - fd);
        const double scale = 1.0 + max_abs(fd);
        if (!(err <= rel_tol * scale)) {
            grad_ok = false;
            detail = fmt_mismatch(err, scale);
        }
    }
    report.checks.push_back({label + " gradient shape", shape_ok, shape_ok ? "" : detail});
    if (shape_ok) {
        report.checks.push_back({label + " gradient vs finite differences", grad_ok, detail});
    }
}

} // namespace

ValidationReport validate_problem(const ProblemSpec &spec, const ValidationOptions &opts) {
    ValidationReport report;
    auto add = [&](std::string name, bool ok, std::string detail = {}) {
        report.checks.push_back({std::move(name), ok, std::move(detail)});
    };

    const int n = spec.state_dim;
    const int m = spec.control_dim;
    add("state_dim positive", n > 0);
    add("control_dim positive", m > 0);
    if (n <= 0 || m <= 0) {
        return report;
    }
    add("x0 dimension", spec.x0.size() == n, "x0 has size " + std::to_string(spec.x0.size()));
    const bool box_dims = spec.control_lower.size() == m && spec.control_upper.size() == m;
    add("control box dimension", box_dims);
    if (box_dims) {
        add("control_lower <= control_upper",
            (spec.control_lower.array() <= spec.control_upper.array()).all());
    }
    add("constraint count <= n + 1", static_cast<int>(spec.num_constraints()) <= n + 1,
        std::to_string(spec.num_constraints()) + " constraints");
    add("time mode", spec.time_mode == TimeMode::Free || spec.fixed_T > spec.t0,
        "fixed T must exceed t0");

    const bool have_callbacks = spec.dynamics && spec.dynamics_jac_x && spec.dynamics_jac_u;
    add("dynamics callbacks present", have_callbacks);
    if (!have_callbacks || spec.x0.size() != n || !box_dims) {
        return report;
    }

    const auto probes = make_probes(spec, opts);

    bool f_shape = true;
    bool fx_shape = true;
    bool fu_shape = true;
    bool fx_match = true;
    bool fu_match = true;
    std::string fx_detail;
    std::string fu_detail;
    for (const auto &pr : probes) {
        const Vec f = spec.dynamics(pr.x, pr.u, pr.t);
        if (f.size() != n || !all_finite(f)) {
            f_shape = false;
            continue;
        }
        const Mat fx = spec.dynamics_jac_x(pr.x, pr.u, pr.t);
        const Mat fu = spec.dynamics_jac_u(pr.x, pr.u, pr.t);
        if (fx.rows() != n || fx.cols() != n) {
            fx_shape = false;
            fx_detail = "f_x is " + std::to_string(fx.rows()) + "x" + std::to_string(fx.cols());
        } else {
            const Mat fd = central_jacobian(
                [&](const Vec &x) { return spec.dynamics(x, pr.u, pr.t); }, pr.x, n);
            const double err = max_abs(fx - fd);
            const double scale = 1.0 + max_abs(fd);
            if (!(err <= opts.rel_tol * scale)) {
                fx_match = false;
                fx_detail = fmt_mismatch(err, scale);
            }
        }
        if (fu.rows() != n || fu.cols() != m) {
            fu_shape = false;
            fu_detail = "f_u is " + std::to_string(fu.rows()) + "x" + std::to_string(fu.cols());
        } else {
            const Mat fd = central_jacobian(
                [&](const Vec &u) { return spec.dynamics(pr.x, u, pr.t); }, pr.u, n);
            const double err = max_abs(fu - fd);
            const double scale = 1.0 + max_abs(fd);
            if (!(err <= opts.rel_tol * scale)) {
                fu_match = false;
                fu_detail = fmt_mismatch(err, scale);
            }
        }
    }
    add("dynamics output dimension", f_shape);
    add("f_x dimension", fx_shape, fx_shape ? "" : fx_detail);
    add("f_u dimension", fu_shape, fu_shape ? "" : fu_detail);
    if (fx_shape) {
        add("f_x vs finite differences", fx_match, fx_detail);
    }
    if (fu_shape) {
        add("f_u vs finite differences", fu_match, fu_detail);
    }

    check_endpoint_function(report, spec.terminal_cost, "terminal cost", probes, n, opts.rel_tol);
    for (std::size_t k = 0; k < spec.eq_constraints.size(); ++k) {
        check_endpoint_function(report, spec.eq_constraints[k], "eq[" + std::to_string(k) + "]",
                                probes, n, opts.rel_tol);
    }
    for (std::size_t k = 0; k < spec.ineq_constraints.size(); ++k) {
        check_endpoint_function(report, spec.ineq_constraints[k],
                                "ineq[" + std::to_string(k) + "]", probes, n, opts.rel_tol);
    }
    if (spec.left_endpoint) {
        for (std::size_t k = 0; k < spec.left_endpoint->eq.size(); ++k) {
            check_endpoint_function(report, spec.left_endpoint->eq[k],
                                    "left eq[" + std::to_string(k) + "]", probes, n, opts.rel_tol);
        }
        for (std::size_t k = 0; k < spec.left_endpoint->ineq.size(); ++k) {
            check_endpoint_function(report, spec.left_endpoint->ineq[k],
                                    "left ineq[" + std::to_string(k) + "]", probes, n,
                                    opts.rel_tol);
        }
    }
    return report;
}

// ============================================================================
// Registry
// ============================================================================

namespace {

Vec vec(std::initializer_list<double> v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) {
        out(i++) = x;
    }
    return out;
}

Vec unit(int n, int i) { return Vec::Unit(n, i); }

/// Component i of the state as an endpoint function.
EndpointFunction state_component(std::string name, int n, int i) {
    EndpointFunction fn;
    fn.name = std::move(name);
    fn.value = [i](const Vec &x, double) { return x(i); };
    fn.grad_x = [n, i](const Vec &, double) { return unit(n, i); };
    return fn;
}

/// Phi0 = T, the explicit terminal time.
EndpointFunction terminal_time_cost(int n) {
    EndpointFunction fn;
    fn.name = "T";
    fn.value = [](const Vec &, double t) { return t; };
    fn.grad_x = [n](const Vec &, double) { return Vec::Zero(n); };
    fn.partial_t = [](const Vec &, double) { return 1.0; };
    return fn;
}

// x1' = x2, x2' = -x1 + u, x3' = 1 from (2, 0, 0); minimize x3(T) s.t. x2(T) = 0.
RegistryEntry make_oscillator() {
    RegistryEntry e;
    auto &s = e.spec;
    s.name = "oscillator";
    s.state_dim = 3;
    s.control_dim = 1;
    s.dynamics = [](const Vec &x, const Vec &u, double) {
        return vec({x(1), -x(0) + u(0), 1.0});
    };
    s.dynamics_jac_x = [](const Vec &, const Vec &, double) {
        Mat j = Mat::Zero(3, 3);
        j(0, 1) = 1.0;
        j(1, 0) = -1.0;
        return j;
    };
    s.dynamics_jac_u = [](const Vec &, const Vec &, double) {
        Mat j = Mat::Zero(3, 1);
        j(1, 0) = 1.0;
        return j;
    };
    s.terminal_cost = state_component("x3", 3, 2);
    s.eq_constraints.push_back(state_component("x2", 3, 1));
    s.control_lower = vec({-1.0});
    s.control_upper = vec({1.0});
    s.t0 = 0.0;
    s.x0 = vec({2.0, 0.0, 0.0});
    s.time_mode = TimeMode::Free;

    const double tau = std::acos(2.0 / 3.0);
    const double t_star = tau + std::numbers::pi / 2.0;
    const double sqrt5 = std::sqrt(5.0);
    const Vec x_final = vec({1.0 - sqrt5, 0.0, t_star});
    e.reference_endpoints.emplace_back(x_final, t_star);

    ReferenceSolution ref;
    ref.T = t_star;
    ref.x_T = x_final;
    ref.u_T = vec({1.0});
    ref.psi_T = vec({0.0, 1.0 / sqrt5, -1.0});
    ref.control = [tau](double t) { return vec({t < tau ? -1.0 : 1.0}); };
    ref.switch_times = {tau};
    e.reference = ref;
    e.description = "time-optimal harmonic oscillator, x2(T) = 0, |u| <= 1";
    return e;
}

// x' = u from 0 with |x(T)| - 2 = 0 (kink at x = 0); minimize T.
RegistryEntry make_nonsmooth_abs() {
    RegistryEntry e;
    auto &s = e.spec;
    s.name = "nonsmooth_abs";
    s.state_dim = 1;
    s.control_dim = 1;
    s.dynamics = [](const Vec &, const Vec &u, double) { return vec({u(0)}); };
    s.dynamics_jac_x = [](const Vec &, const Vec &, double) { return Mat::Zero(1, 1).eval(); };
    s.dynamics_jac_u = [](const Vec &, const Vec &, double) { return Mat::Ones(1, 1).eval(); };
    s.terminal_cost = terminal_time_cost(1);

    TerminalConstraint c;
    c.name = "|x| - 2";
    c.value = [](const Vec &x, double) { return std::abs(x(0)) - 2.0; };
    c.grad_x = [](const Vec &x, double) { return vec({x(0) >= 0.0 ? 1.0 : -1.0}); };
    c.smooth = false;
    c.kink_grads = [](const Vec &x, double) {
        if (x(0) == 0.0) {
            return std::vector<Vec>{vec({-1.0}), vec({1.0})};
        }
        return std::vector<Vec>{};
    };
    s.eq_constraints.push_back(c);
    s.control_lower = vec({-1.0});
    s.control_upper = vec({1.0});
    s.x0 = vec({0.0});
    s.time_mode = TimeMode::Free;

    e.reference_endpoints.emplace_back(vec({2.0}), 2.0);
    e.reference_endpoints.emplace_back(vec({-2.0}), 2.0);

    ReferenceSolution ref;
    ref.T = 2.0;
    ref.x_T = vec({2.0});
    ref.u_T = vec({1.0});
    ref.psi_T = vec({1.0});
    ref.control = [](double) { return vec({1.0}); };
    e.reference = ref;
    e.description = "integrator with nonsmooth terminal constraint |x(T)| = 2";
    return e;
}

// Inconsistent pair x1 - 1 = 0, -x1 - 1 = 0: at x1 = 0 both are active with
// the same sign and their signed gradients cancel.
RegistryEntry make_opposite_equalities() {
    RegistryEntry e;
    auto &s = e.spec;
    s.name = "opposite_equalities";
    s.state_dim = 2;
    s.control_dim = 1;
    s.dynamics = [](const Vec &, const Vec &u, double) { return vec({u(0), 0.0}); };
    s.dynamics_jac_x = [](const Vec &, const Vec &, double) { return Mat::Zero(2, 2).eval(); };
    s.dynamics_jac_u = [](const Vec &, const Vec &, double) {
        Mat j = Mat::Zero(2, 1);
        j(0, 0) = 1.0;
        return j;
    };
    s.terminal_cost = state_component("x2", 2, 1);

    TerminalConstraint a;
    a.name = "x1 - 1";
    a.value = [](const Vec &x, double) { return x(0) - 1.0; };
    a.grad_x = [](const Vec &, double) { return vec({1.0, 0.0}); };
    TerminalConstraint b;
    b.name = "-x1 - 1";
    b.value = [](const Vec &x, double) { return -x(0) - 1.0; };
    b.grad_x = [](const Vec &, double) { return vec({-1.0, 0.0}); };
    s.eq_constraints = {a, b};
    s.control_lower = vec({-1.0});
    s.control_upper = vec({1.0});
    s.x0 = vec({0.0, 0.0});
    s.time_mode = TimeMode::Fixed;
    s.fixed_T = 1.0;

    e.reference_endpoints.emplace_back(vec({0.0, 0.0}), 1.0);
    e.description = "degenerate: equality gradients (1,0) and (-1,0), USC fails";
    return e;
}

// x' = u from 0, minimize T with x(T) = T - 1: T* = 1/2, u = -1, psi = -1/2.
RegistryEntry make_moving_target() {
    RegistryEntry e;
    auto &s = e.spec;
    s.name = "moving_target";
    s.state_dim = 1;
    s.control_dim = 1;
    s.dynamics = [](const Vec &, const Vec &u, double) { return vec({u(0)}); };
    s.dynamics_jac_x = [](const Vec &, const Vec &, double) { return Mat::Zero(1, 1).eval(); };
    s.dynamics_jac_u = [](const Vec &, const Vec &, double) { return Mat::Ones(1, 1).eval(); };
    s.terminal_cost = terminal_time_cost(1);

    TerminalConstraint c;
    c.name = "x - (T - 1)";
    c.value = [](const Vec &x, double t) { return x(0) - (t - 1.0); };
    c.grad_x = [](const Vec &, double) { return vec({1.0}); };
    c.partial_t = [](const Vec &, double) { return -1.0; };
    s.eq_constraints.push_back(c);
    s.control_lower = vec({-1.0});
    s.control_upper = vec({1.0});
    s.x0 = vec({0.0});
    s.time_mode = TimeMode::Free;

    e.reference_endpoints.emplace_back(vec({-0.5}), 0.5);
    ReferenceSolution ref;
    ref.T = 0.5;
    ref.x_T = vec({-0.5});
    ref.u_T = vec({-1.0});
    ref.psi_T = vec({-0.5});
    ref.control = [](double) { return vec({-1.0}); };
    e.reference = ref;
    e.description = "moving terminal manifold x(T) = T - 1";
    return e;
}

// x1' = u, x2' = x1 on [0, 1]; minimize x2(1) with x1(0) = 1, -x2(0) <= 0.
// u = -1, psi(t) = (t - 1, -1), so psi(0) = -1 * e1 + 1 * (0, -1).
RegistryEntry make_free_left_endpoint() {
    RegistryEntry e;
    auto &s = e.spec;
    s.name = "free_left_endpoint";
    s.state_dim = 2;
    s.control_dim = 1;
    s.dynamics = [](const Vec &x, const Vec &u, double) { return vec({u(0), x(0)}); };
    s.dynamics_jac_x = [](const Vec &, const Vec &, double) {
        Mat j = Mat::Zero(2, 2);
        j(1, 0) = 1.0;
        return j;
    };
    s.dynamics_jac_u = [](const Vec &, const Vec &, double) {
        Mat j = Mat::Zero(2, 1);
        j(0, 0) = 1.0;
        return j;
    };
    s.terminal_cost = state_component("x2", 2, 1);
    s.control_lower = vec({-1.0});
    s.control_upper = vec({1.0});
    s.x0 = vec({1.0, 0.0});
    s.time_mode = TimeMode::Fixed;
    s.fixed_T = 1.0;

    LeftEndpoint left;
    TerminalConstraint pin;
    pin.name = "x1 - 1";
    pin.value = [](const Vec &x, double) { return x(0) - 1.0; };
    pin.grad_x = [](const Vec &, double) { return vec({1.0, 0.0}); };
    TerminalConstraint floor;
    floor.name = "-x2";
    floor.value = [](const Vec &x, double) { return -x(1); };
    floor.grad_x = [](const Vec &, double) { return vec({0.0, -1.0}); };
    left.eq.push_back(pin);
    left.ineq.push_back(floor);
    s.left_endpoint = left;

    ReferenceSolution ref;
    ref.T = 1.0;
    ref.x_T = vec({0.0, 0.5});
    ref.u_T = vec({-1.0});
    ref.psi_T = vec({0.0, -1.0});
    ref.control = [](double) { return vec({-1.0}); };
    e.reference = ref;
    e.description = "free left endpoint: x1(0) = 1, x2(0) >= 0, fixed T = 1";
    return e;
}

const std::vector<RegistryEntry> &registry() {
    static const std::vector<RegistryEntry> entries = {
        make_oscillator(), make_nonsmooth_abs(), make_opposite_equalities(),
        make_moving_target(), make_free_left_endpoint()};
    return entries;
}

} // namespace

std::vector<std::string> registry_names() {
    std::vector<std::string> names;
    for (const auto &e : registry()) {
        names.push_back(e.spec.name);
    }
    return names;
}

const RegistryEntry &registry_entry(const std::string &name) {
    for (const auto &e : registry()) {
        if (e.spec.name == name) {
            return e;
        }
    }
    std::string known;
    for (const auto &n : registry_names()) {
        known += (known.empty() ? "" : ", ") + n;
    }
    throw NotFoundError("unknown problem '" + name + "'; known problems: " + known);
}

ProblemSpec builtin_problem(const std::string &name) { return registry_entry(name).spec; }

} // namespace penalight
