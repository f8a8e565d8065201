// Independent oracles and small problem builders shared by the test suites.
#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "penalight/model.hpp"

namespace testing_support {

using penalight::Mat;
using penalight::ProblemSpec;
using penalight::Vec;

inline Vec v(std::initializer_list<double> xs) {
    Vec out(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) {
        out(i++) = x;
    }
    return out;
}

// x' = A x + B u, Mayer cost x_n(T), no constraints, box [-1, 1]^m.
inline ProblemSpec linear_spec(const Mat &A, const Mat &B, const Vec &x0) {
    ProblemSpec s;
    s.name = "linear";
    s.state_dim = static_cast<int>(A.rows());
    s.control_dim = static_cast<int>(B.cols());
    s.dynamics = [A, B](const Vec &x, const Vec &u, double) { return Vec(A * x + B * u); };
    s.dynamics_jac_x = [A](const Vec &, const Vec &, double) { return A; };
    s.dynamics_jac_u = [B](const Vec &, const Vec &, double) { return B; };
    const int n = s.state_dim;
    s.terminal_cost.name = "x_n";
    s.terminal_cost.value = [n](const Vec &x, double) { return x(n - 1); };
    s.terminal_cost.grad_x = [n](const Vec &, double) {
        Vec g = Vec::Zero(n);
        g(n - 1) = 1.0;
        return g;
    };
    s.control_lower = Vec::Constant(s.control_dim, -1.0);
    s.control_upper = Vec::Constant(s.control_dim, 1.0);
    s.x0 = x0;
    s.time_mode = penalight::TimeMode::Fixed;
    s.fixed_T = 1.0;
    return s;
}

inline ProblemSpec zero_dynamics_spec(int n, int m) {
    return linear_spec(Mat::Zero(n, n), Mat::Zero(n, m), Vec::LinSpaced(n, 1.0, n));
}

// Constraint a.x + b*T + c with constant gradient a.
inline penalight::TerminalConstraint affine_constraint(const Vec &a, double c, double b = 0.0) {
    penalight::TerminalConstraint k;
    k.name = "affine";
    k.value = [a, b, c](const Vec &x, double T) { return a.dot(x) + b * T + c; };
    k.grad_x = [a](const Vec &, double) { return a; };
    if (b != 0.0) {
        k.partial_t = [b](const Vec &, double) { return b; };
    }
    return k;
}

// Minimum of |sum w_i g_i| over the weight simplex, scanned on a grid of the given step.
inline double brute_min_norm(const std::vector<Vec> &g, double step) {
    const int steps = static_cast<int>(std::lround(1.0 / step));
    double best = std::numeric_limits<double>::infinity();
    if (g.size() == 1) {
        return g[0].norm();
    }
    if (g.size() == 2) {
        for (int i = 0; i <= steps; ++i) {
            const double a = static_cast<double>(i) / steps;
            best = std::min(best, (a * g[0] + (1.0 - a) * g[1]).norm());
        }
        return best;
    }
    for (int i = 0; i <= steps; ++i) {
        for (int j = 0; i + j <= steps; ++j) {
            const double a = static_cast<double>(i) / steps;
            const double b = static_cast<double>(j) / steps;
            best = std::min(best, (a * g[0] + b * g[1] + (1.0 - a - b) * g[2]).norm());
        }
    }
    return best;
}

// Largest margin min_i -<g_i, d> over random unit directions d; positive means
// some sampled d separates every g_i strictly.
inline double best_random_margin(const std::vector<Vec> &g, int samples, std::mt19937_64 &rng) {
    std::normal_distribution<double> gauss;
    const auto n = g.front().size();
    double best = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s) {
        Vec d(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            d(i) = gauss(rng);
        }
        d.normalize();
        double margin = std::numeric_limits<double>::infinity();
        for (const auto &gi : g) {
            margin = std::min(margin, -gi.dot(d));
        }
        best = std::max(best, margin);
    }
    return best;
}

inline Vec random_vec(int n, std::mt19937_64 &rng, double scale = 1.0) {
    std::uniform_real_distribution<double> uni(-scale, scale);
    Vec out(n);
    for (int i = 0; i < n; ++i) {
        out(i) = uni(rng);
    }
    return out;
}

} // namespace testing_support
