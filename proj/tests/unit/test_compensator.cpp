#include "mflq/compensator.hpp"
#include "mflq/errors.hpp"
#include "mflq/examples.hpp"

#include "generators.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mflq;
using mflq::testing::Rng;

TEST(LambdaFunction, IntegratesPiecewiseLinearDerivativeExactly) {
    // fdot(t) = 1 + 2t on [0, 2]: F(t) = F0 + t + t^2
    std::vector<Matrix> s;
    for (int k = 0; k <= 4; ++k) s.push_back(Matrix::Constant(1, 1, 1.0 + 2.0 * (0.5 * k)));
    const LambdaFunction F(SymMatrix(Matrix::Constant(1, 1, 3.0)), TimeFunctionMatrix::sampled(2.0, s));
    for (double t : {0.0, 0.3, 0.5, 1.25, 2.0}) {
        EXPECT_NEAR(F.value(t)(0, 0), 3.0 + t + t * t, 1e-14) << t;
        EXPECT_NEAR(F.derivative(t)(0, 0), 1.0 + 2.0 * t, 1e-14) << t;
    }
    EXPECT_NEAR((-F).value(1.0)(0, 0), -5.0, 1e-14);
    EXPECT_NEAR((F + F).value(1.0)(0, 0), 10.0, 1e-14);
}

TEST(ShiftedProblem, ZeroCompensatorLeavesWeightsUnchanged) {
    Rng rng(31);
    const auto spec = mflq::testing::random_pd_problem(rng, {2, 1, 2}, {true, false, 6, 1.0});
    const auto shifted = shifted_problem(spec, CompensatorPair::zero(2));
    for (double t : {0.0, 0.37, 1.0}) {
        const auto a = evaluate_coefficients(spec, t);
        const auto b = evaluate_coefficients(shifted, t);
        EXPECT_LT(max_abs(a.Qhat - b.Qhat), 1e-14);
        EXPECT_LT(max_abs(a.Shat - b.Shat), 1e-14);
        EXPECT_LT(max_abs(a.Rhat - b.Rhat), 1e-14);
        EXPECT_LT(max_abs(a.Q - b.Q), 1e-14);
    }
    EXPECT_LT(max_abs(terminal_hat(spec).matrix() - terminal_hat(shifted).matrix()), 1e-15);
}

TEST(ShiftedProblem, CostShiftIdentityHolds) {
    Rng rng(32);
    for (int i = 0; i < 6; ++i) {
        const auto dims = mflq::testing::random_dims(rng);
        const auto spec = mflq::testing::random_pd_problem(rng, dims, {i % 2 == 1, false, 6, 1.0});
        const auto comp = mflq::testing::random_compensator(rng, dims.n, 1.0, 0.5, i % 2 == 0);
        const auto law = mflq::testing::random_law(rng, dims.n, dims.m, 1.0, 0.5, i % 2 == 0);
        const auto cs = cost_shift_check(spec, comp, law, TimeGrid(1.0, 400));
        EXPECT_LT(std::abs(cs.defect()), 1e-8 * (1.0 + std::abs(cs.J))) << "problem " << i;
    }
}

TEST(ShiftedProblem, RiccatiSolutionsShiftByTheCompensator) {
    Rng rng(33);
    const auto spec = mflq::testing::random_pd_problem(rng, {2, 1, 1});
    const auto comp = mflq::testing::random_compensator(rng, 2, 1.0, 0.2, false);
    const auto e = riccati_transform_check(spec, comp, TimeGrid(1.0, 400));
    EXPECT_LT(e.P, 1e-9);
    EXPECT_LT(e.Phat, 1e-9);
}

TEST(SpeedCompensator, AnchoredAndMatchesExactFormula) {
    const SpeedParams p;
    const auto comp = speed_compensator(p);
    EXPECT_NEAR(comp.K.value(p.T)(0, 0), p.gamma, 1e-12);
    for (double t : {0.0, 0.25, 0.5, 0.9, 1.0}) {
        EXPECT_NEAR(comp.H.value(t)(0, 0), p.gamma, 0.0);
        EXPECT_NEAR(comp.K.value(t)(0, 0), speed_K_exact(p, t), 1e-6) << t;
    }
    SpeedParams bad;
    bad.beta = bad.gamma;
    EXPECT_THROW(speed_compensator(bad), DomainError);
}

TEST(SpeedCompensator, RcPassesWhilePdFails) {
    const SpeedParams p;
    const auto ex = build_speed_example(p);
    const TimeGrid grid(p.T, 400);
    EXPECT_FALSE(check_condition_pd(ex.spec, grid).pass());
    EXPECT_TRUE(check_condition_rc(ex.spec, speed_compensator(p), grid).pass());
}

TEST(SpeedCompensator, LiesBelowTheRiccatiPair) {
    const SpeedParams p;
    const auto ex = build_speed_example(p);
    const TimeGrid grid(p.T, 400);
    const auto sol = solve_riccati(ex.spec, grid);
    const auto comp = speed_compensator(p);
    for (int k = 0; k < grid.nodes(); ++k) {
        EXPECT_GE(sol.P[k](0, 0) - comp.H.value(grid.t(k))(0, 0), -1e-8);
        EXPECT_GE(sol.Phat[k](0, 0) - comp.K.value(grid.t(k))(0, 0), -1e-8);
    }
}

TEST(CheckRc, SingularDenominatorFailsWithoutThrowing) {
    // R^{HK} = D'HD + R = 0 when H = -R with D = 1
    SpeedParams p;
    const auto ex = build_speed_example(p);
    const auto H = LambdaFunction::constant(SymMatrix(Matrix::Constant(1, 1, p.beta)));
    const CompensatorPair comp{H, H};
    RCReport r;
    EXPECT_NO_THROW(r = check_condition_rc(ex.spec, comp, TimeGrid(p.T, 50)));
    EXPECT_FALSE(r.pass());
    EXPECT_FALSE(r.deviation.denominator_ok);
    EXPECT_FALSE(r.deviation.inequality_ok);
}

TEST(CheckRc, AgreesWithPdOfTheShiftedProblem) {
    Rng rng(34);
    for (int i = 0; i < 40; ++i) {
        const auto dims = mflq::testing::random_dims(rng);
        const auto spec = mflq::testing::random_pd_problem(rng, dims);
        const auto comp = mflq::testing::random_compensator(rng, dims.n, 1.0, 1.0, false);
        const auto eq = rc_pd_equivalence(spec, comp, TimeGrid(1.0, 40));
        EXPECT_EQ(eq.rc, eq.pd_shifted) << "problem " << i;
    }
}
