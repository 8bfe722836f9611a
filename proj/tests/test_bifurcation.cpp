#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "bslab/bifurcation.hpp"

using namespace bslab;

namespace {

BifParams onset_params(double alpha, double kappa = 0.0) {
    BifParams p;
    p.alpha = alpha;
    p.kappa = kappa;
    p.Q = 0.05;
    return p;
}

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
               double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// adaptive Simpson mean over [0, 2 pi)
double mean_over_period(const std::function<double(double)>& f) {
    const double a = 0.0, b = 2.0 * pi;
    const double fa = f(a), fm = f(0.5 * (a + b)), fb = f(b);
    return simpson(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), 1e-15, 40) / (2.0 * pi);
}

}  // namespace

TEST(Closed, CriticalValues) {
    const BifParams p = onset_params(0.0);
    EXPECT_NEAR(p.C_c(), 0.1, 1e-15);
    EXPECT_NEAR(p.k_c(), 1.0, 1e-15);
    EXPECT_NEAR(p.omega_c(), 1.03440804327886004697, 1e-14);
    EXPECT_NEAR(p.M(), 0.98 / 1.07, 1e-15);
    EXPECT_NEAR(p.M(), 0.915887850467289719626, 1e-15);
}

TEST(Closed, LambdaExpansion) {
    BifParams p = onset_params(0.02, 0.05);
    EXPECT_NEAR(lambda_expansion(p), p.M() * (0.02 - 2.0 * 2.0 * 0.0025), 1e-16);
    p.bp = {1.5, 2.2, 1.0, 1.04};
    EXPECT_THROW(lambda_expansion(p), RangeError);
}

TEST(Closed, GeAmplitude) {
    BifParams p;
    p.alpha = 0.1;
    p.pp.f = 10.0;
    EXPECT_NEAR(ge_amplitude(p), 0.0318887772993424573, 1e-15);
    p.Q = 0.5;
    EXPECT_NEAR(ge_amplitude(p), 0.0117809724509617246, 1e-15);
    p.Q = 0.0;
    p.pp.f = 0.0;
    EXPECT_THROW(ge_amplitude(p), VerticalBranch);
    p.Q = 0.05;
    p.pp.f = 0.3;
    p.alpha = 0.0;
    EXPECT_EQ(ge_amplitude(p), 0.0);
    p.alpha = 0.01;
    p.kappa = 0.1;
    EXPECT_EQ(ge_amplitude(p), 0.0);
}

TEST(Closed, GeAmplitudeScaling) {
    // linear in alpha for Q > 0, square root for Q = 0
    BifParams p = onset_params(0.01);
    const double a = ge_amplitude(p);
    p.alpha = 0.04;
    EXPECT_NEAR(ge_amplitude(p), 4.0 * a, 1e-15);
    p.Q = 0.0;
    const double s = ge_amplitude(p);
    p.alpha = 0.01;
    EXPECT_NEAR(ge_amplitude(p), 0.5 * s, 1e-15);
}

TEST(Closed, QuadraturesAgainstSimpson) {
    const double f = 0.3, c = 0.98;
    const double I1 = mean_over_period([&](double x) { return std::sqrt(f * f + c * std::cos(x) * std::cos(x)); });
    const double I2 =
        mean_over_period([&](double x) { return std::sqrt(f * f + c * std::cos(x) * std::cos(x)) * std::cos(2.0 * x); });
    const auto q = gw_quadratures(onset_params(0.01));
    EXPECT_NEAR(q.I1, I1, 1e-10);
    EXPECT_NEAR(q.I2, I2, 1e-10);
    EXPECT_NEAR(q.I1, 0.718766858725443700016, 1e-12);
    EXPECT_NEAR(q.I2, 0.176358346338226073088, 1e-12);
    EXPECT_GT(q.I1, q.I2);
    EXPECT_GT(q.I2, 0.0);
}

TEST(Closed, GwPrediction) {
    const auto g = gw_amplitude_and_speed(onset_params(0.01));
    EXPECT_NEAR(g.coefficient, 0.867759254769807107, 1e-12);
    EXPECT_NEAR(g.A1, 0.0115239335622559596, 1e-14);
    EXPECT_EQ(g.s, 0.0);
    const auto k = gw_amplitude_and_speed(onset_params(0.01, 0.01));
    EXPECT_NEAR(k.s, 8.70062840141097e-4, 1e-16);
    BifParams q = onset_params(0.01);
    q.Q = 0.0;
    EXPECT_THROW(gw_amplitude_and_speed(q), RangeError);
}

TEST(Closed, ParameterValidation) {
    BifParams p = onset_params(0.01);
    EXPECT_NO_THROW(p.validate());
    p.Q = -1.0;
    EXPECT_THROW(p.validate(), RangeError);
}

TEST(Fourier, DerivativeAndAntiderivative) {
    RealFourier B(8, 64);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(B.K());
    c(RealFourier::cos_index(2)) = 1.0;
    c(RealFourier::sin_index(3)) = -0.5;
    const Eigen::VectorXd d = B.deriv() * c;
    EXPECT_NEAR(d(RealFourier::sin_index(2)), -2.0, 1e-15);
    EXPECT_NEAR(d(RealFourier::cos_index(3)), -1.5, 1e-15);
    EXPECT_LE((B.antiderivative(d) - c).norm(), 1e-14);
    for (double x : {0.0, 0.3, 2.0}) EXPECT_NEAR(B.eval(c, x), std::cos(2 * x) - 0.5 * std::sin(3 * x), 1e-14);
}

TEST(Solvers, SteadyGeAmplitudeMatchesFormula) {
    std::vector<double> errs;
    for (double alpha : {0.01, 0.005}) {
        const BifParams p = onset_params(alpha);
        const auto prof = reduced_steady_solve(ge_profile(ge_amplitude(p), p), p.C(), p.k(), p.bp, p.physical());
        EXPECT_LE(prof.residual, 1e-10);
        const double err = std::abs(std::abs(prof.A1) - ge_amplitude(p)) / ge_amplitude(p);
        EXPECT_LE(err, 0.1) << alpha;
        errs.push_back(err);
    }
    EXPECT_LT(errs[1], errs[0]);
}

TEST(Solvers, GeStabilityHasComplexPairAndTranslationMode) {
    const BifParams p = onset_params(0.01);
    const auto prof = reduced_steady_solve(ge_profile(ge_amplitude(p), p), p.C(), p.k(), p.bp, p.physical());
    const auto st = reduced_stability(prof, p.bp, p.physical());
    EXPECT_TRUE(st.has_unstable_complex_pair);
    EXPECT_GT(st.n_unstable, 0);
    EXPECT_LE(st.translation_residual, 1e-8);
    EXPECT_FALSE(st.degenerate);
}

TEST(Solvers, TravellingGwMatchesPrediction) {
    std::vector<double> errs;
    for (double alpha : {0.01, 0.005}) {
        const BifParams p = onset_params(alpha);
        const double A = gw_amplitude_and_speed(p).A1;
        const auto gw = gw_travelling_solve(gw_seed(A, p), p.C(), p.k(), p.bp, p.physical());
        EXPECT_LE(gw.residual, 1e-10);
        EXPECT_NEAR(gw.omega, -p.omega_c(), 1e-2);
        const double err = std::abs(std::abs(gw.A1) - A) / A;
        EXPECT_LE(err, 0.1) << alpha;
        errs.push_back(err);
    }
    EXPECT_LT(errs[1], errs[0]);
}

TEST(Solvers, ContinuationLowersDrag) {
    const BifParams p = onset_params(0.01);
    const auto prof = reduced_steady_solve(ge_profile(ge_amplitude(p), p), p.C(), p.k(), p.bp, p.physical());
    ContinuationOptions opt;
    opt.n_steps = 6;
    opt.stability = false;
    const auto br = continue_branch(prof, p.bp, p.physical(), -1, opt);
    ASSERT_GE(br.size(), 2u);
    for (std::size_t i = 1; i < br.size(); ++i) {
        EXPECT_LT(br[i].C, br[i - 1].C);
        EXPECT_GT(br[i].arclength, br[i - 1].arclength);
        EXPECT_LE(br[i].residual, 1e-10);
        EXPECT_GT(std::abs(br[i].A1), std::abs(br[i - 1].A1));
        EXPECT_NEAR(br[i].alpha, (p.C_c() - br[i].C) / p.pp.H0, 1e-12);
    }
}

TEST(Reduced, LinearRateWithoutNonlinearDrag) {
    BifParams p = onset_params(0.01);
    PhysicalParams pp = p.physical();
    pp.Q = 0.0;
    pp.f = 0.0;
    ReducedEvolveConfig c;
    c.k = 1.0;
    c.C = p.C();
    c.coupling = Coupling::Constant;
    c.dt = 0.01;
    c.t_end = 50.0;
    c.output_stride = 100;
    RealFourier B;
    Eigen::VectorXd q = Eigen::VectorXd::Zero(B.K());
    q(1) = 1e-3;
    const auto ev = reduced_time_evolve(q, c, p.bp, pp);
    const double rate = std::log(ev.samples.back().A1 / ev.samples.front().A1) / ev.samples.back().t;
    EXPECT_NEAR(rate, p.alpha, 1e-6);
    c.coupling = Coupling::Geostrophic;
    EXPECT_THROW(reduced_time_evolve(q, c, p.bp, pp), RangeError);
}

TEST(Reduced, SmallDataSaturateAtSteadyProfile) {
    const BifParams p = onset_params(0.01);
    const auto prof = reduced_steady_solve(ge_profile(ge_amplitude(p), p), p.C(), p.k(), p.bp, p.physical());
    RealFourier B;
    Eigen::VectorXd psi0 = Eigen::VectorXd::Zero(B.K());
    psi0(1) = 1e-4;
    psi0(2) = -2e-4;
    psi0(3) = 1e-5;
    ReducedEvolveConfig c;
    c.k = p.k();
    c.C = p.C();
    c.dt = 0.1;
    c.t_end = 2500.0;
    c.output_stride = 1000;
    const auto ev = reduced_time_evolve(psi0, c, p.bp, p.physical());
    EXPECT_NEAR(ev.samples.back().A1, std::abs(prof.A1), 1e-6);
}
