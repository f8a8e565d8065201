#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "penalight/penalty.hpp"
#include "support.hpp"

using namespace penalight;
using testing_support::v;

namespace {

const double kTau = std::acos(2.0 / 3.0);
const double kTStar = kTau + std::numbers::pi / 2;

// Two states, one equality x1 - 1 and two inequalities x2 - 0.5, -x1 - x2.
ProblemSpec mixed_spec() {
    ProblemSpec s = testing_support::zero_dynamics_spec(2, 1);
    s.eq_constraints.push_back(testing_support::affine_constraint(v({1.0, 0.0}), -1.0));
    s.ineq_constraints.push_back(testing_support::affine_constraint(v({0.0, 1.0}), -0.5));
    s.ineq_constraints.push_back(testing_support::affine_constraint(v({-1.0, -1.0}), 0.0));
    return s;
}

double trapezoid_inner(const Mat &a, const Mat &b, double h) {
    const Vec w = trapezoid_weights(static_cast<int>(a.rows()));
    double s = 0.0;
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
        s += w(k) * a.row(k).dot(b.row(k));
    }
    return h * s;
}

} // namespace

TEST(PhiTerm, OscillatorSingleConstraint) {
    const TerminalPenalty p = phi_term(builtin_problem("oscillator"), v({0.5, 0.1, 2.0}), 2.0);
    EXPECT_DOUBLE_EQ(p.value, 0.1);
    EXPECT_EQ(p.active_eq, std::vector<int>{0});
    EXPECT_TRUE(p.active_ineq.empty());
}

TEST(PhiTerm, NonsmoothAbs) {
    EXPECT_DOUBLE_EQ(phi_term(builtin_problem("nonsmooth_abs"), v({2.5}), 1.0).value, 0.5);
    EXPECT_DOUBLE_EQ(phi_term(builtin_problem("nonsmooth_abs"), v({-1.5}), 1.0).value, 0.5);
}

TEST(PhiTerm, NoConstraintsIsZero) {
    const TerminalPenalty p = phi_term(testing_support::zero_dynamics_spec(2, 1), v({3.0, 4.0}), 1.0);
    EXPECT_EQ(p.value, 0.0);
    EXPECT_TRUE(p.active_eq.empty());
    EXPECT_TRUE(p.active_ineq.empty());
}

TEST(PhiTerm, MaxOverMixedConstraintsAndTies) {
    const ProblemSpec s = mixed_spec();
    // |x1 - 1| = 0.5, x2 - 0.5 = 0.5, -x1 - x2 = -2.5
    const TerminalPenalty p = phi_term(s, v({1.5, 1.0}), 1.0);
    EXPECT_DOUBLE_EQ(p.value, 0.5);
    EXPECT_EQ(p.active_eq, std::vector<int>{0});
    EXPECT_EQ(p.active_ineq, std::vector<int>{0});
}

TEST(PhiTerm, InactiveInequalitiesOnlyGiveNegativeValue) {
    ProblemSpec s = mixed_spec();
    s.eq_constraints.clear();
    const TerminalPenalty p = phi_term(s, v({1.0, 0.0}), 1.0);
    EXPECT_DOUBLE_EQ(p.value, -0.5);
}

TEST(PhiTerm, ZeroExactlyOnFeasiblePoints) {
    const ProblemSpec s = mixed_spec();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    int feasible_seen = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        // Half the samples sit on the equality manifold x1 = 1.
        const Vec x = trial % 2 ? v({1.0, uni(rng)}) : v({uni(rng), uni(rng)});
        const double tol = kDefaultTolActive;
        bool feasible = std::abs(x(0) - 1.0) <= tol;
        for (const auto &c : s.ineq_constraints) {
            feasible = feasible && c.value(x, 1.0) <= tol;
        }
        feasible_seen += feasible;
        EXPECT_EQ(std::max(phi_term(s, x, 1.0).value, 0.0) <= tol, feasible) << x.transpose();
    }
    EXPECT_GT(feasible_seen, 100);
}

TEST(Subdifferential, OscillatorInfeasibleAndFeasible) {
    const ProblemSpec s = builtin_problem("oscillator");
    const Hull up = phi_term_subdifferential(s, v({0.5, 0.1, 2.0}), 2.0);
    ASSERT_EQ(up.generators.size(), 1u);
    EXPECT_EQ(up.generators[0], v({0.0, 1.0, 0.0}));

    const Hull down = phi_term_subdifferential(s, v({0.5, -0.1, 2.0}), 2.0);
    ASSERT_EQ(down.generators.size(), 1u);
    EXPECT_EQ(down.generators[0], v({0.0, -1.0, 0.0}));

    const Hull flat = phi_term_subdifferential(s, v({0.5, 0.0, 2.0}), 2.0);
    ASSERT_EQ(flat.generators.size(), 2u);
    EXPECT_EQ(flat.generators[0], v({0.0, 1.0, 0.0}));
    EXPECT_EQ(flat.generators[1], v({0.0, -1.0, 0.0}));
}

TEST(Subdifferential, NonsmoothAbsSigns) {
    const ProblemSpec s = builtin_problem("nonsmooth_abs");
    const Hull above = phi_term_subdifferential(s, v({3.0}), 2.0);
    ASSERT_EQ(above.generators.size(), 1u);
    EXPECT_EQ(above.generators[0], v({1.0}));
    const Hull inside = phi_term_subdifferential(s, v({1.5}), 2.0);
    ASSERT_EQ(inside.generators.size(), 1u);
    EXPECT_EQ(inside.generators[0], v({-1.0}));
    // |x| - 2 < 0 at x = -1.5, gradient -1 signed by -1
    EXPECT_EQ(phi_term_subdifferential(s, v({-1.5}), 2.0).generators[0], v({1.0}));
}

TEST(Subdifferential, NonsmoothKinkWithoutDataIsUnsupported) {
    ProblemSpec s = builtin_problem("nonsmooth_abs");
    s.eq_constraints[0].kink_grads = nullptr;
    EXPECT_THROW(phi_term_subdifferential(s, v({0.0}), 2.0), UnsupportedPointError);
}

TEST(Subdifferential, FeasibleGeneratorCount) {
    const ProblemSpec s = mixed_spec();
    // x = (1, 0.5): equality holds, first inequality active, second inactive
    const Hull h = phi_term_subdifferential(s, v({1.0, 0.5}), 1.0);
    EXPECT_EQ(h.generators.size(), 2u * 1u + 1u);
    // x = (1, 0): only the equality
    EXPECT_EQ(phi_term_subdifferential(s, v({1.0, 0.0}), 1.0).generators.size(), 2u);
}

TEST(Subdifferential, SignedGeneratorsAppearAmongFeasibleOnes) {
    const ProblemSpec s = mixed_spec();
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec x = testing_support::random_vec(2, rng, 2.0);
        if (phi_term(s, x, 1.0).value <= kDefaultTolActive) {
            continue;
        }
        std::vector<Vec> pool;
        for (const auto &c : s.eq_constraints) {
            pool.push_back(c.grad_x(x, 1.0));
            pool.push_back(-c.grad_x(x, 1.0));
        }
        for (const auto &c : s.ineq_constraints) {
            pool.push_back(c.grad_x(x, 1.0));
        }
        for (const Vec &g : phi_term_subdifferential(s, x, 1.0).generators) {
            bool found = false;
            for (const Vec &p : pool) {
                found = found || p == g;
            }
            EXPECT_TRUE(found);
        }
    }
}

TEST(PhiDiff, ExactTrajectoryDerivativesGiveSmallValue) {
    const ProblemSpec s = builtin_problem("oscillator");
    auto value = [&](int N) {
        const ControlGrid g = ControlGrid::constant(0.0, 2.0, N, v({0.3}));
        const Trajectory tr = integrate_rk4(s, g);
        Mat z(N + 1, 3);
        for (int k = 0; k <= N; ++k) {
            z.row(k) = s.dynamics(tr.state(k), g.at_node(k), tr.times(k)).transpose();
        }
        return phi_diff_value(s, {z, g});
    };
    const double v50 = value(50);
    const double v100 = value(100);
    EXPECT_LE(v50, 0.04 * 0.04 * 2);
    EXPECT_GE(v50 / v100, 3.5);
}

TEST(PhiDiff, ZeroResidualAndConstantResidual) {
    const ProblemSpec s = testing_support::zero_dynamics_spec(3, 1);
    const ControlGrid g = ControlGrid::constant(0.0, 1.0, 20, v({0.0}));
    EXPECT_EQ(phi_diff_value(s, {Mat::Zero(21, 3), g}), 0.0);
    EXPECT_NEAR(phi_diff_value(s, {Mat::Constant(21, 3, 0.7), g}), 0.7 * std::sqrt(3.0), 1e-12);
}

TEST(PhiDiff, ReconstructionIsCumulativeTrapezoid) {
    const ProblemSpec s = testing_support::zero_dynamics_spec(1, 1);
    const ControlGrid g = ControlGrid::constant(0.0, 1.0, 4, v({0.0}));
    Mat z(5, 1);
    z << 0.0, 1.0, 2.0, 3.0, 4.0;
    const Mat x = reconstruct_states(s, {z, g});
    // x0 = 1; increments h/2 (z_k + z_{k+1}) with h = 0.25
    EXPECT_DOUBLE_EQ(x(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(x(1, 0), 1.125);
    EXPECT_DOUBLE_EQ(x(4, 0), 1.0 + 0.125 * (1 + 3 + 5 + 7));
}

TEST(PhiDiffGradient, UnitNormWeight) {
    const ProblemSpec s = builtin_problem("oscillator");
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const ControlGrid g = ControlGrid::constant(0.0, 1.5, 30, v({0.2}));
        Mat z(31, 3);
        for (int k = 0; k <= 30; ++k) {
            z.row(k) = testing_support::random_vec(3, rng).transpose();
        }
        const PhiDiffGradient grad = phi_diff_gradient(s, {z, g});
        EXPECT_NEAR(l2_norm_on_grid(grad.w, g.step()), 1.0, 1e-10);
        EXPECT_NEAR(grad.phi_diff, phi_diff_value(s, {z, g}), 1e-14);
    }
}

TEST(PhiDiffGradient, ZeroJacobianGradientEqualsWeight) {
    const ProblemSpec s = testing_support::zero_dynamics_spec(2, 1);
    const ControlGrid g = ControlGrid::constant(0.0, 1.0, 10, v({0.0}));
    Mat z(11, 2);
    for (int k = 0; k <= 10; ++k) {
        z.row(k) << std::sin(k), std::cos(2.0 * k);
    }
    const PhiDiffGradient grad = phi_diff_gradient(s, {z, g});
    EXPECT_TRUE(grad.gradient == grad.w);
}

TEST(PhiDiffGradient, MatchesFiniteDifferences) {
    const ProblemSpec s = builtin_problem("oscillator");
    const int N = 24;
    const ControlGrid g = ControlGrid::sample(0.0, 2.0, N, [](double t) { return v({std::cos(t)}); });
    std::mt19937_64 rng(17);
    Mat z(N + 1, 3);
    for (int k = 0; k <= N; ++k) {
        z.row(k) = testing_support::random_vec(3, rng).transpose();
    }
    const PhiDiffGradient grad = phi_diff_gradient(s, {z, g});
    for (int dir = 0; dir < 6; ++dir) {
        Mat d(N + 1, 3);
        for (int k = 0; k <= N; ++k) {
            d.row(k) = testing_support::random_vec(3, rng).transpose();
        }
        const double eps = 1e-6;
        const double fd = (phi_diff_value(s, {z + eps * d, g}) - phi_diff_value(s, {z - eps * d, g})) /
                          (2 * eps);
        const double analytic = trapezoid_inner(grad.gradient, d, g.step());
        EXPECT_NEAR(analytic, fd, 1e-4 * std::max(1.0, std::abs(fd)));
    }
}

TEST(PhiDiffGradient, NearFeasibleThrows) {
    const ProblemSpec s = testing_support::zero_dynamics_spec(2, 1);
    const ControlGrid g = ControlGrid::constant(0.0, 1.0, 5, v({0.0}));
    EXPECT_THROW(phi_diff_gradient(s, {Mat::Zero(6, 2), g}), NearFeasibleError);
}

TEST(PenalizedObjective, AnalyticBangBang) {
    const ProblemSpec s = builtin_problem("oscillator");
    const ControlGrid g = ControlGrid::sample(0.0, kTStar, 200, [](double t) {
        return v({t < kTau ? -1.0 : 1.0});
    });
    const PenaltyValue pv = penalized_objective(s, g, 100.0);
    const Vec xT = integrate_rk4(s, g).final_state();
    EXPECT_LE(std::abs(xT(1)), 1e-3);
    EXPECT_NEAR(pv.F_lambda, kTStar + 100.0 * std::abs(xT(1)), 1e-12);
    EXPECT_EQ(pv.phi_diff, 0.0);
    EXPECT_EQ(pv.active_eq, std::vector<int>{0});
}

TEST(PenalizedObjective, ZeroWeightIsTheCost) {
    const ProblemSpec s = builtin_problem("oscillator");
    const ControlGrid g = ControlGrid::constant(0.0, 1.3, 50, v({0.4}));
    const PenaltyValue pv = penalized_objective(s, g, 0.0);
    EXPECT_EQ(pv.F_lambda, pv.J);
    EXPECT_NEAR(pv.J, 1.3, 1e-12);
}

TEST(PenalizedObjective, UnforcedOscillator) {
    const ProblemSpec s = builtin_problem("oscillator");
    const PenaltyValue pv = penalized_objective(s, ControlGrid::constant(0.0, 1.0, 200, v({0.0})), 100.0);
    EXPECT_NEAR(pv.F_lambda, 1.0 + 100.0 * 2.0 * std::sin(1.0), 1e-7);
}

TEST(PenalizedObjective, NegativeWeightRejected) {
    const ProblemSpec s = builtin_problem("oscillator");
    EXPECT_ANY_THROW(penalized_objective(s, ControlGrid::constant(0.0, 1.0, 4, v({0.0})), -1.0));
}

TEST(PenalizedObjective, NondecreasingInWeight) {
    const ProblemSpec s = builtin_problem("oscillator");
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const ControlGrid g = ControlGrid::constant(0.0, 0.5 + trial * 0.1, 20,
                                                    testing_support::random_vec(1, rng));
        double prev = -1e300;
        for (double l : {0.0, 0.1, 1.0, 10.0, 100.0}) {
            const double F = penalized_objective(s, g, l).F_lambda;
            EXPECT_GE(F, prev);
            prev = F;
        }
    }
}

TEST(PenalizedObjective, InactiveInequalitiesCarryNoPenalty) {
    ProblemSpec s = testing_support::zero_dynamics_spec(2, 1);
    s.ineq_constraints.push_back(testing_support::affine_constraint(v({1.0, 0.0}), -10.0));
    const PenaltyValue pv = penalized_objective(s, ControlGrid::constant(0.0, 1.0, 4, v({0.0})), 50.0);
    EXPECT_LT(pv.phi_term, 0.0);
    EXPECT_EQ(pv.F_lambda, pv.J);
}
