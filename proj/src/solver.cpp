#include "penalight/solver.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>

namespace penalight {

// ============================================================================
// Nelder-Mead
// ============================================================================

NelderMeadResult nelder_mead(const Objective &objective, const Vec &x0,
                             const NelderMeadOptions &opts) {
    const auto d = x0.size();
    if (d < 1) {
        throw std::invalid_argument("nelder_mead needs at least one variable");
    }
    NelderMeadResult res;
    auto eval = [&](const Vec &x) {
        ++res.evaluations;
        const double f = objective(x);
        return std::isfinite(f) ? f : kSentinel;
    };

    std::vector<Vec> verts(static_cast<std::size_t>(d + 1), x0);
    std::vector<double> fv(static_cast<std::size_t>(d + 1));
    fv[0] = eval(x0);
    for (Eigen::Index i = 0; i < d; ++i) {
        const double sign = opts.step_signs.empty() ? 1.0 : opts.step_signs[static_cast<std::size_t>(i)];
        verts[static_cast<std::size_t>(i + 1)](i) += sign * opts.initial_scale * (1.0 + std::abs(x0(i)));
        fv[static_cast<std::size_t>(i + 1)] = eval(verts[static_cast<std::size_t>(i + 1)]);
    }

    std::vector<std::size_t> order(static_cast<std::size_t>(d + 1));
    Vec sum = Vec::Zero(d); // sum of all vertices
    for (const auto &v : verts) {
        sum += v;
    }

    auto sort_vertices = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    };
    auto converged = [&] {
        const double spread = fv[order.back()] - fv[order.front()];
        if (!(spread < opts.f_tol)) {
            return false;
        }
        const Vec &best = verts[order.front()];
        double diam = 0.0;
        for (const auto &v : verts) {
            diam = std::max(diam, (v - best).cwiseAbs().maxCoeff());
        }
        return diam < opts.x_tol;
    };

    sort_vertices();
    for (res.iterations = 0; res.iterations < opts.max_iters; ++res.iterations) {
        if (converged()) {
            res.converged = true;
            break;
        }
        const std::size_t worst = order.back();
        const std::size_t second = order[order.size() - 2];
        const std::size_t best = order.front();
        const Vec centroid = (sum - verts[worst]) / static_cast<double>(d);

        auto replace_worst = [&](const Vec &x, double f) {
            sum += x - verts[worst];
            verts[worst] = x;
            fv[worst] = f;
        };

        const Vec xr = centroid + (centroid - verts[worst]);
        const double fr = eval(xr);
        if (fr < fv[best]) {
            const Vec xe = centroid + 2.0 * (centroid - verts[worst]);
            const double fe = eval(xe);
            if (fe < fr) {
                replace_worst(xe, fe);
            } else {
                replace_worst(xr, fr);
            }
        } else if (fr < fv[second]) {
            replace_worst(xr, fr);
        } else {
            bool accepted = false;
            if (fr < fv[worst]) {
                const Vec xc = centroid + 0.5 * (xr - centroid);
                const double fc = eval(xc);
                if (fc <= fr) {
                    replace_worst(xc, fc);
                    accepted = true;
                }
            } else {
                const Vec xcc = centroid + 0.5 * (verts[worst] - centroid);
                const double fcc = eval(xcc);
                if (fcc < fv[worst]) {
                    replace_worst(xcc, fcc);
                    accepted = true;
                }
            }
            if (!accepted) {
                const Vec xb = verts[best];
                sum = xb;
                for (std::size_t i = 0; i < verts.size(); ++i) {
                    if (i == best) {
                        continue;
                    }
                    verts[i] = xb + 0.5 * (verts[i] - xb);
                    fv[i] = eval(verts[i]);
                    sum += verts[i];
                }
            }
        }
        sort_vertices();
    }
    res.x_best = verts[order.front()];
    res.f_best = fv[order.front()];
    return res;
}

// ============================================================================
// Transcription
// ============================================================================

void SolveOptions::validate(const ProblemSpec &spec) const {
    if (n_intervals < 1) {
        throw std::invalid_argument("n_intervals must be at least 1");
    }
    if (!(rho >= 0.0)) {
        throw std::invalid_argument("rho must be nonnegative");
    }
    if (!(T_init > spec.t0)) {
        throw std::invalid_argument("T_init must exceed t0");
    }
    if (!(tanh_slope > 0.0)) {
        throw std::invalid_argument("tanh_slope must be positive");
    }
    if (max_restarts < 0 || max_iters < 1) {
        throw std::invalid_argument("iteration limits must be positive");
    }
    if (polish_sweeps < 0 || polish_window < 1 || polish_iters < 1 || !(polish_scale > 0.0) ||
        !(polish_clamp > 0.0) || !(polish_T_half_width > 0.0)) {
        throw std::invalid_argument("invalid polishing settings");
    }
    if (const auto *custom = std::get_if<CustomInit>(&init_pattern)) {
        if (custom->theta.rows() != n_intervals || custom->theta.cols() != spec.control_dim) {
            throw std::invalid_argument("custom initial theta must be n_intervals x control_dim");
        }
    }
}

ControlGrid parameterize_control(const Mat &theta, const ProblemSpec &spec, double t0, double T,
                                 double slope) {
    ControlGrid g;
    g.t0 = t0;
    g.T = T;
    g.values.resize(theta.rows(), theta.cols());
    for (Eigen::Index k = 0; k < theta.rows(); ++k) {
        for (Eigen::Index i = 0; i < theta.cols(); ++i) {
            const double lo = spec.control_lower(i);
            const double hi = spec.control_upper(i);
            const double s = std::tanh(slope * theta(k, i));
            // Symmetric boxes map exactly to the centred tanh.
            g.values(k, i) = lo == -hi ? hi * s : lo + (hi - lo) * (s + 1.0) / 2.0;
        }
    }
    return g;
}

Mat invert_control(const Mat &u, const ProblemSpec &spec, double slope) {
    Mat theta(u.rows(), u.cols());
    for (Eigen::Index k = 0; k < u.rows(); ++k) {
        for (Eigen::Index i = 0; i < u.cols(); ++i) {
            const double lo = spec.control_lower(i);
            const double hi = spec.control_upper(i);
            double s = hi > lo ? 2.0 * (u(k, i) - lo) / (hi - lo) - 1.0 : 0.0;
            s = std::clamp(s, -1.0 + 1e-12, 1.0 - 1e-12);
            theta(k, i) = std::atanh(s) / slope;
        }
    }
    return theta;
}

Mat initial_theta(const ProblemSpec &spec, const SolveOptions &opts) {
    const int N = opts.n_intervals;
    const int m = spec.control_dim;
    return std::visit(
        [&](const auto &pattern) -> Mat {
            using P = std::decay_t<decltype(pattern)>;
            if constexpr (std::is_same_v<P, PaperBangBang>) {
                // theta = -/+0.5 gives u = -/+tanh(0.5 * slope) on [-1, 1].
                Mat theta(N, m);
                for (int k = 0; k < N; ++k) {
                    theta.row(k).setConstant(3 * k < N ? -0.5 : 0.5);
                }
                return theta;
            } else if constexpr (std::is_same_v<P, ConstantInit>) {
                return invert_control(Mat::Constant(N, m, pattern.u), spec, opts.tanh_slope);
            } else {
                return pattern.theta;
            }
        },
        opts.init_pattern);
}

namespace {

Vec pack(double T, const Mat &theta) {
    Vec x(1 + theta.size());
    x(0) = T;
    for (Eigen::Index k = 0; k < theta.rows(); ++k) {
        for (Eigen::Index i = 0; i < theta.cols(); ++i) {
            x(1 + k * theta.cols() + i) = theta(k, i);
        }
    }
    return x;
}

Mat unpack_theta(const Vec &x, int N, int m) {
    Mat theta(N, m);
    for (int k = 0; k < N; ++k) {
        for (int i = 0; i < m; ++i) {
            theta(k, i) = x(1 + k * m + i);
        }
    }
    return theta;
}

} // namespace

double transcription_objective(const ProblemSpec &spec, const SolveOptions &opts,
                               const Vec &decision) {
    const double T = decision(0);
    if (!(T > spec.t0 + 1e-6)) {
        return kSentinel;
    }
    const Mat theta = unpack_theta(decision, opts.n_intervals, spec.control_dim);
    const ControlGrid grid = parameterize_control(theta, spec, spec.t0, T, opts.tanh_slope);
    try {
        const PenaltyValue pv = penalized_objective(spec, grid, opts.rho, opts.tol_active);
        return std::isfinite(pv.F_lambda) ? pv.F_lambda : kSentinel;
    } catch (const DivergenceError &) {
        return kSentinel;
    }
}

namespace {

struct Incumbent {
    Vec x;
    double f = kSentinel;
};

// Golden-section search over T alone in [T_c - half_width, T_c + half_width].
// Interpolating line searches stall near sqrt(eps) on the |defect| kink, so
// plain bracketing is used down to an absolute tolerance.
std::pair<double, double> best_terminal_time(const Objective &objective, Vec x, double half_width,
                                             double t_floor) {
    constexpr double kInvPhi = 0.6180339887498949;
    constexpr double kTol = 1e-10;
    double lo = std::max(x(0) - half_width, t_floor);
    double hi = x(0) + half_width;
    auto along_T = [&](double T) {
        x(0) = T;
        return objective(x);
    };
    double a = hi - kInvPhi * (hi - lo);
    double b = lo + kInvPhi * (hi - lo);
    double fa = along_T(a);
    double fb = along_T(b);
    while (hi - lo > kTol) {
        if (fa <= fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - kInvPhi * (hi - lo);
            fa = along_T(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + kInvPhi * (hi - lo);
            fb = along_T(b);
        }
    }
    return fa <= fb ? std::pair{a, fa} : std::pair{b, fb};
}

// One pass of window-restricted simplex searches over the working point. Each
// candidate theta block is scored at its best terminal time, which removes the
// |defect| kink along T. Returns the working objective after the pass.
double polish_sweep(const Objective &objective, Incumbent &work, const SolveOptions &opts, int m,
                    double t_floor, SolveResult &out) {
    const int N = opts.n_intervals;
    const int window = std::min(opts.polish_window, N);
    const int stride = std::max(1, window / 2);

    for (Eigen::Index i = 1; i < work.x.size(); ++i) {
        work.x(i) = std::clamp(work.x(i), -opts.polish_clamp, opts.polish_clamp);
    }
    std::tie(work.x(0), work.f) =
        best_terminal_time(objective, work.x, opts.polish_T_half_width, t_floor);

    NelderMeadOptions nm;
    nm.max_iters = opts.polish_iters;
    nm.f_tol = opts.f_tol;
    nm.x_tol = opts.x_tol;
    nm.initial_scale = opts.polish_scale;

    for (int first = 0; first < N; first += stride) {
        const int count = std::min(window, N - first);
        const Eigen::Index offset = 1 + static_cast<Eigen::Index>(first) * m;
        const Eigen::Index len = static_cast<Eigen::Index>(count) * m;
        double T_last = work.x(0);
        const Objective block = [&](const Vec &y) {
            Vec x = work.x;
            x.segment(offset, len) = y;
            const auto [T, f] = best_terminal_time(objective, x, opts.polish_T_half_width, t_floor);
            T_last = T;
            return f;
        };
        const NelderMeadResult r = nelder_mead(block, work.x.segment(offset, len), nm);
        out.iterations += r.iterations;
        if (r.f_best < work.f) {
            block(r.x_best);
            work.x.segment(offset, len) = r.x_best;
            work.x(0) = T_last;
            work.f = objective(work.x);
        }
        if (first + window >= N) {
            break;
        }
    }
    return work.f;
}

} // namespace

SolveResult solve_time_optimal(const ProblemSpec &spec, const SolveOptions &opts) {
    opts.validate(spec);
    if (spec.time_mode != TimeMode::Free) {
        throw MisuseError("solve_time_optimal needs a free terminal time problem");
    }
    if (spec.num_constraints() == 0) {
        throw MisuseError("solve_time_optimal needs terminal constraints");
    }
    const int N = opts.n_intervals;
    const int m = spec.control_dim;
    const double t_floor = spec.t0 + 1e-6;
    long evaluations = 0;
    const Objective objective = [&](const Vec &x) {
        ++evaluations;
        return transcription_objective(spec, opts, x);
    };

    Incumbent inc;
    inc.x = pack(opts.T_init, initial_theta(spec, opts));
    inc.f = objective(inc.x);

    SolveResult out;
    std::mt19937_64 rng(opts.seed);
    std::bernoulli_distribution coin(0.5);

    NelderMeadOptions nm;
    nm.max_iters = opts.max_iters;
    nm.f_tol = opts.f_tol;
    nm.x_tol = opts.x_tol;

    // Full-space simplex runs: the initial one, then incumbent-centred restarts.
    bool settled = false;
    for (int run = 0; run <= opts.max_restarts; ++run) {
        if (run > 0) {
            nm.initial_scale = 0.01;
            nm.step_signs.resize(static_cast<std::size_t>(inc.x.size()));
            for (auto &s : nm.step_signs) {
                s = coin(rng) ? 1.0 : -1.0;
            }
            ++out.restarts;
        }
        const NelderMeadResult r = nelder_mead(objective, inc.x, nm);
        out.iterations += r.iterations;
        const double gain = inc.f - r.f_best;
        if (r.f_best < inc.f) {
            inc.x = r.x_best;
            inc.f = r.f_best;
        }
        out.objective_history.push_back(inc.f);
        if (run > 0 && r.converged && gain <= opts.f_tol * (1.0 + std::abs(inc.f))) {
            settled = true;
            break;
        }
    }

    // Windowed polishing until a sweep stops paying off. The working point is
    // desaturated first, so it may start above the incumbent.
    bool polished = opts.polish_sweeps == 0;
    Incumbent work = inc;
    double previous = kSentinel;
    for (int sweep = 0; sweep < opts.polish_sweeps; ++sweep) {
        const double f = polish_sweep(objective, work, opts, m, t_floor, out);
        if (f < inc.f) {
            inc = work;
        }
        out.objective_history.push_back(inc.f);
        if (previous - f <= opts.f_tol * (1.0 + std::abs(f))) {
            polished = true;
            break;
        }
        previous = f;
    }
    // Polishing is the last phase; without it the full-space runs decide.
    out.converged = opts.polish_sweeps > 0 ? polished : settled;
    out.evaluations = evaluations;

    out.T_opt = inc.x(0);
    out.theta = unpack_theta(inc.x, N, m);
    out.control = parameterize_control(out.theta, spec, spec.t0, out.T_opt, opts.tanh_slope);
    out.trajectory = integrate_rk4(spec, out.control);
    const Vec x_T = out.trajectory.final_state();
    out.objective = inc.f;
    out.cost = spec.terminal_cost.value(x_T, out.T_opt);
    out.terminal_violation = std::max(phi_term(spec, x_T, out.T_opt, opts.tol_active).value, 0.0);
    return out;
}

SweepResult exactness_sweep(const ProblemSpec &spec, const SolveOptions &opts,
                            const std::vector<double> &lambdas, double feas_tol, bool parallel) {
    for (double l : lambdas) {
        if (!(l >= 0.0)) {
            throw std::invalid_argument("sweep weights must be nonnegative");
        }
    }
    auto run_one = [&](double lambda) {
        SolveOptions o = opts;
        o.rho = lambda;
        const SolveResult r = solve_time_optimal(spec, o);
        return SweepRow{lambda, r.objective, r.cost, r.T_opt, r.terminal_violation, r.converged};
    };

    SweepResult out;
    if (parallel) {
        std::vector<std::future<SweepRow>> jobs;
        for (double l : lambdas) {
            jobs.push_back(std::async(std::launch::async, run_one, l));
        }
        for (auto &j : jobs) {
            out.rows.push_back(j.get());
        }
    } else {
        for (double l : lambdas) {
            out.rows.push_back(run_one(l));
        }
    }
    for (const auto &row : out.rows) {
        if (row.terminal_violation <= feas_tol &&
            (!out.exactness_threshold || row.lambda < *out.exactness_threshold)) {
            out.exactness_threshold = row.lambda;
        }
    }
    return out;
}

} // namespace penalight
