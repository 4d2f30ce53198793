#include "mflq/errors.hpp"
#include "mflq/problem.hpp"

#include "generators.hpp"

#include <gtest/gtest.h>

using namespace mflq;
using mflq::testing::Rng;

namespace {

ProblemSpec scalar_problem() {
    Rng rng(3);
    return mflq::testing::random_pd_problem(rng, {1, 1, 1});
}

bool mentions(const std::vector<std::string>& v, const std::string& s) {
    for (const auto& x : v)
        if (x.find(s) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST(Validate, RandomProblemsAreValid) {
    Rng rng(11);
    for (int i = 0; i < 20; ++i) {
        mflq::testing::ProblemOptions o;
        o.time_varying = i % 2 == 0;
        o.with_ell = i % 3 == 0;
        EXPECT_TRUE(validate(mflq::testing::random_pd_problem(rng, mflq::testing::random_dims(rng), o)).empty());
    }
}

TEST(Validate, ReportsEveryViolation) {
    auto spec = scalar_problem();
    spec.coeffs.B = TimeFunctionMatrix::constant(Matrix::Zero(2, 1));
    spec.coeffs.D.clear();
    spec.x0 = Vector::Zero(3);
    const auto v = validate(spec);
    EXPECT_GE(v.size(), 3u);
    EXPECT_TRUE(mentions(v, "B: expected 1x1"));
    EXPECT_TRUE(mentions(v, "D: expected 1 channels"));
    EXPECT_TRUE(mentions(v, "x0"));
    EXPECT_THROW(require_valid(spec), ValidationError);
}

TEST(Validate, NamesSampleIndexOfAsymmetry) {
    Rng rng(5);
    auto spec = mflq::testing::random_pd_problem(rng, {2, 1, 1});
    std::vector<Matrix> s{Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
    s[2](0, 1) = 0.5;
    spec.weights.Q = TimeFunctionMatrix::sampled(spec.T, s);
    const auto v = validate(spec);
    EXPECT_TRUE(mentions(v, "Q: not symmetric at sample 2"));
}

TEST(Validate, SampleGridMustEndAtHorizon) {
    auto spec = scalar_problem();
    spec.coeffs.A = TimeFunctionMatrix::sampled(2.0, {Matrix::Zero(1, 1), Matrix::Zero(1, 1)});
    EXPECT_TRUE(mentions(validate(spec), "A: sample grid ends at 2"));
}

TEST(EvaluateCoefficients, HatsAreSumsAndDomainChecked) {
    Rng rng(8);
    const auto spec = mflq::testing::random_pd_problem(rng, {2, 2, 2}, {true, false, 6, 1.0});
    const auto pc = evaluate_coefficients(spec, 0.37);
    EXPECT_TRUE((pc.Ahat - (pc.A + pc.Atilde)).isZero(0.0));
    EXPECT_TRUE((pc.Dhat[1] - (pc.D[1] + pc.Dtilde[1])).isZero(0.0));
    EXPECT_TRUE((pc.Rhat - (pc.R + pc.Rtilde)).isZero(1e-15));
    EXPECT_THROW(evaluate_coefficients(spec, 1.5), OutOfDomain);
    EXPECT_THROW(evaluate_coefficients(spec, -0.1), OutOfDomain);
    EXPECT_NO_THROW(evaluate_coefficients(spec, 1.0));
}

TEST(BoldQuadruple, MatchesHattedCoefficients) {
    Rng rng(9);
    const auto spec = mflq::testing::random_pd_problem(rng, {2, 1, 2}, {true, false, 6, 1.0});
    for (double t : {0.0, 0.13, 0.5, 1.0}) {
        const auto q = bold_quadruple(spec, t);
        const auto h = hat_coefficients(spec, t);
        const auto pc = evaluate_coefficients(spec, t);
        EXPECT_TRUE((q.Q.matrix().topLeftCorner(2, 2) - pc.Q).isZero(0.0));
        EXPECT_TRUE((q.Q.matrix().bottomRightCorner(2, 2) - h.Qhat.matrix()).isZero(0.0));
        EXPECT_TRUE((q.S.bottomRightCorner(2, 1) - h.Shat).isZero(0.0));
        EXPECT_TRUE((q.R.matrix().bottomRightCorner(1, 1) - h.Rhat.matrix()).isZero(0.0));
        EXPECT_TRUE((q.G.matrix().bottomRightCorner(2, 2) - h.Ghat.matrix()).isZero(0.0));
    }
}

TEST(CoefficientTable, EntriesSitAtHalfSteps) {
    Rng rng(10);
    const auto spec = mflq::testing::random_pd_problem(rng, {2, 1, 1}, {true, false, 6, 1.0});
    const TimeGrid grid(1.0, 20);
    const CoefficientTable table(spec, grid);
    for (int i = 0; i <= 40; ++i) {
        const auto& e = table.at_half(i);
        const auto ref = evaluate_coefficients(spec, 0.5 * i * grid.dt());
        EXPECT_NEAR(e.t, ref.t, 1e-15);
        EXPECT_TRUE((e.B - ref.B).isZero(1e-14));
        EXPECT_TRUE((e.Qhat - ref.Qhat).isZero(1e-14));
    }
    EXPECT_EQ(table.at_node(20).t, 1.0);
}

TEST(ConditionPd, RandomPdProblemsPass) {
    Rng rng(12);
    for (int i = 0; i < 20; ++i) {
        mflq::testing::ProblemOptions o;
        o.time_varying = i % 2 == 0;
        const auto spec = mflq::testing::random_pd_problem(rng, mflq::testing::random_dims(rng), o);
        EXPECT_TRUE(check_condition_pd(spec, TimeGrid(spec.T, 100)).pass());
    }
}

TEST(ConditionPd, MonotoneUnderAddingToQ) {
    Rng rng(13);
    for (int i = 0; i < 20; ++i) {
        const auto dims = mflq::testing::random_dims(rng);
        auto spec = mflq::testing::random_pd_problem(rng, dims);
        ASSERT_TRUE(check_condition_pd(spec, TimeGrid(spec.T, 50)).pass());
        spec.weights.Q = TimeFunctionMatrix::constant(spec.weights.Q(0.0) + 0.3 * Matrix::Identity(dims.n, dims.n));
        EXPECT_TRUE(check_condition_pd(spec, TimeGrid(spec.T, 50)).pass());
    }
}

TEST(ConditionPd, IdentifiesFailingClause) {
    auto spec = scalar_problem();
    spec.weights.R = TimeFunctionMatrix::constant(Matrix::Constant(1, 1, -0.5));
    spec.weights.Rtilde = TimeFunctionMatrix::constant(Matrix::Constant(1, 1, 0.0));
    const auto r = check_condition_pd(spec, TimeGrid(spec.T, 20));
    EXPECT_FALSE(r.control_ok);
    EXPECT_FALSE(r.joint_ok);
    EXPECT_TRUE(r.terminal_ok);
    EXPECT_NEAR(r.control_min, -0.5, 1e-12);
    spec.weights.G = SymMatrix(Matrix::Constant(1, 1, -1.0));
    EXPECT_FALSE(check_condition_pd(spec, TimeGrid(spec.T, 20)).terminal_ok);
}
