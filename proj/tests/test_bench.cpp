#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "penalight/bench.hpp"
#include "support.hpp"

using namespace penalight;
using testing_support::v;

TEST(Analytic, Constants) {
    const AnalyticOscillatorSolution a = analytic_oscillator();
    EXPECT_NEAR(a.tau, 0.8410686705679303, 1e-15);
    EXPECT_NEAR(a.T_star, 2.411864997362827, 1e-15);
    EXPECT_NEAR(a.switch_point(0), 1.0, 1e-15);
    EXPECT_NEAR(a.switch_point(1), -std::sqrt(5.0), 1e-15);
    EXPECT_NEAR(a.final_point(0), 1.0 - std::sqrt(5.0), 1e-15);
    EXPECT_EQ(a.final_point(1), 0.0);
    EXPECT_EQ(a.psi1_T, 0.0);
    EXPECT_NEAR(a.psi2_T, 1.0 / std::sqrt(5.0), 1e-16);
    EXPECT_EQ(a.psi3, -1.0);
}

TEST(Analytic, ArcsAreContinuousAndSatisfyTheDynamics) {
    const AnalyticOscillatorSolution a = analytic_oscillator();
    const ProblemSpec s = builtin_problem("oscillator");
    EXPECT_LE((a.state(0.0) - s.x0).norm(), 1e-15);
    EXPECT_LE((a.state(a.tau - 1e-12) - a.state(a.tau + 1e-12)).norm(), 1e-10);
    EXPECT_LE((a.state(a.T_star).head(2) - a.final_point).norm(), 1e-14);
    const double e = 1e-6;
    for (double t : {0.2, 0.6, 1.2, 2.0}) {
        const Vec dx = (a.state(t + e) - a.state(t - e)) / (2 * e);
        EXPECT_LE((dx - s.dynamics(a.state(t), v({a.control(t)}), t)).norm(), 1e-8) << t;
        const Vec dpsi = (a.adjoint(t + e) - a.adjoint(t - e)) / (2 * e);
        const Vec rhs = -s.dynamics_jac_x(a.state(t), v({a.control(t)}), t).transpose() * a.adjoint(t);
        EXPECT_LE((dpsi - rhs).norm(), 1e-8) << t;
    }
}

TEST(Analytic, SwitchingFunctionChangesSignAtTau) {
    // The control maximizes psi2 u, so sign(psi2) must equal u off the switch.
    const AnalyticOscillatorSolution a = analytic_oscillator();
    EXPECT_NEAR(a.adjoint(a.tau)(1), 0.0, 1e-15);
    for (double t : {0.1, 0.5, 0.8, 0.9, 1.5, 2.4}) {
        EXPECT_EQ(a.adjoint(t)(1) > 0.0, a.control(t) > 0.0) << t;
    }
}

TEST(Analytic, HamiltonianVanishesAlongTheSolution) {
    const AnalyticOscillatorSolution a = analytic_oscillator();
    const ProblemSpec s = builtin_problem("oscillator");
    for (int i = 0; i <= 50; ++i) {
        const double t = a.T_star * i / 50.0;
        EXPECT_LE(std::abs(hamiltonian(s, a.state(t), v({a.control(t)}), a.adjoint(t), t)), 1e-8);
    }
}

TEST(Analytic, FineGridIntegrationAgrees) {
    const AnalyticOscillatorSolution a = analytic_oscillator();
    const ProblemSpec s = builtin_problem("oscillator");
    const ControlGrid g =
        ControlGrid::sample(0.0, a.T_star, 2000, [&](double t) { return v({a.control(t)}); });
    const Trajectory tr = integrate_rk4(s, g);
    EXPECT_LE((tr.final_state().head(2) - a.final_point).norm(), 2.0 * g.step());
}

TEST(DetectSwitch, Examples) {
    Mat u(6, 1);
    u << -1.0, -1.0, 1.0, 1.0, 1.0, 1.0;
    ControlGrid g{0.0, 6.0, u};
    ASSERT_EQ(detect_switch(g), std::vector<double>{2.0});

    u << -1.0, -0.9, 0.1, 0.2, 0.95, 1.0;
    g.values = u;
    // Band intervals 2 and 3 span [2, 4]; the switch sits at their midpoint.
    ASSERT_EQ(detect_switch(g), std::vector<double>{3.0});

    u << 0.9, 0.9, -0.9, -0.9, 0.9, 0.9;
    g.values = u;
    EXPECT_EQ(detect_switch(g), (std::vector<double>{2.0, 4.0}));

    u << 0.0, 0.1, -0.2, 0.3, 0.4, 0.0;
    g.values = u;
    EXPECT_TRUE(detect_switch(g).empty());
    EXPECT_EQ(detect_switch(g, 0.25).size(), 0u);
    EXPECT_EQ(detect_switch(g, 0.15).size(), 1u);

    g.values = Mat::Zero(6, 2);
    EXPECT_THROW(detect_switch(g), std::invalid_argument);
}

TEST(DetectSwitch, SampledAnalyticControl) {
    const AnalyticOscillatorSolution a = analytic_oscillator();
    for (int N : {50, 200, 1000}) {
        const ControlGrid g =
            ControlGrid::sample(0.0, a.T_star, N, [&](double t) { return v({a.control(t)}); });
        const auto sw = detect_switch(g);
        ASSERT_EQ(sw.size(), 1u);
        EXPECT_LE(std::abs(sw[0] - a.tau), g.step());
    }
}

TEST(Bench, DefaultRunPasses) {
    const BenchReport r = run_bench();
    EXPECT_TRUE(r.pass);
    EXPECT_LE(r.T_error, 1e-3);
    EXPECT_LE(r.terminal_violation, 1e-3);
    ASSERT_EQ(r.switches.size(), 1u);
    EXPECT_LE(r.switch_time_error, 2.0 * r.solution.control.step());
    EXPECT_LE(r.endpoint_error, 1e-2);
    EXPECT_NEAR(r.transversality.nu(0), -1.0 / std::sqrt(5.0), 1e-12);
    EXPECT_LE(r.transversality.endpoint_residual, 1e-6);
    EXPECT_EQ(r.usc.verdict, UscVerdict::Holds);
    EXPECT_NEAR(r.usc.distance, 1.0, 1e-12);
    // At the numerical endpoint H = psi2 (-x1 + u) - 1 with psi1 = 0, so the
    // residual tracks the endpoint offset in x1.
    ASSERT_TRUE(r.transversality.hamiltonian_residual);
    const Vec x_T = r.solution.trajectory.final_state();
    const double u_T = r.solution.control.values(199, 0);
    const double oracle = std::abs((-x_T(0) + u_T) / std::sqrt(5.0) - 1.0);
    EXPECT_NEAR(*r.transversality.hamiltonian_residual, oracle, 1e-14);
    EXPECT_LE(*r.transversality.hamiltonian_residual, 5e-3);
}

TEST(Bench, CoarseGridFindsTheSwitch) {
    BenchOptions o;
    o.solve.n_intervals = 20;
    const BenchReport r = run_bench(o);
    EXPECT_LE(r.T_error, 1e-2);
    EXPECT_EQ(r.solution.control.n_intervals(), 20);
    EXPECT_EQ(r.switches.size(), 1u);
}

TEST(Bench, ZeroPenaltyFails) {
    BenchOptions o;
    o.solve.n_intervals = 20;
    o.solve.rho = 0.0;
    o.solve.max_restarts = 2;
    o.solve.polish_sweeps = 2;
    const BenchReport r = run_bench(o);
    EXPECT_FALSE(r.pass);
    EXPECT_GT(r.T_error, 1.0);
}
