#include <gtest/gtest.h>

#include <cmath>

#include "nlt/core/errors.hpp"
#include "nlt/volterra/volterra.hpp"

using namespace nlt::volterra;

namespace {

VolterraProblem exp_problem(double T, double dt) {
    return VolterraProblem::invariant([](double x) { return std::exp(-x); }, [](double) { return 1.0; }, T, dt);
}

double max_err_exp(const Series& s) {
    double e = 0.0;
    for (size_t n = 0; n < s.t.size(); ++n)
        e = std::max(e, std::abs(s.v[n] - 0.5 * (1.0 + std::exp(-2.0 * s.t[n]))));
    return e;
}

}  // namespace

TEST(Volterra, ExponentialKernelClosedForm) {
    Series s = solve(exp_problem(5.0, 1e-3));
    EXPECT_LT(max_err_exp(s), 1e-5);
}

TEST(Volterra, GeneralPathMatchesInvariant) {
    auto inv = exp_problem(3.0, 0.01);
    auto gen = VolterraProblem::general([](double t, double s) { return std::exp(-(t - s)); },
                                        [](double) { return 1.0; }, 3.0, 0.01);
    Series a = solve(inv), b = solve(gen);
    for (size_t n = 0; n < a.v.size(); ++n) EXPECT_NEAR(a.v[n], b.v[n], 1e-14);
}

TEST(Volterra, ZeroKernelReturnsForcing) {
    auto p = VolterraProblem::invariant([](double) { return 0.0; }, [](double t) { return std::sin(t); }, 2.0, 0.1);
    Series s = solve(p);
    for (size_t n = 0; n < s.v.size(); ++n) EXPECT_DOUBLE_EQ(s.v[n], std::sin(s.t[n]));
}

TEST(Volterra, SecondOrderConvergence) {
    double e1 = max_err_exp(solve(exp_problem(2.0, 0.04)));
    double e2 = max_err_exp(solve(exp_problem(2.0, 0.02)));
    EXPECT_NEAR(e1 / e2, 4.0, 0.8);
}

TEST(Volterra, SingularStepThrows) {
    auto p = VolterraProblem::invariant([](double) { return -20.0; }, [](double) { return 1.0; }, 1.0, 0.1);
    EXPECT_THROW(solve(p), nlt::NumericError);
}

TEST(Volterra, ResolventOfExponentialKernel) {
    auto p = exp_problem(4.0, 1e-3);
    Resolvent r = resolvent(p);
    for (size_t n = 0; n < r.size(); n += 100) EXPECT_NEAR(r(n, 0), std::exp(-2.0 * p.time(n)), 1e-6);
}

TEST(Volterra, ReconstructionIsExactDiscreteInverse) {
    auto p = VolterraProblem::general([](double t, double s) { return (1.0 + 0.3 * std::sin(t)) * std::exp(-(t - s)) + 0.2 * s; },
                                      [](double t) { return std::cos(t) + t; }, 3.0, 0.02);
    Resolvent r = resolvent(p);
    Reconstruction rec = reconstruct(p, r);
    EXPECT_LT(rec.residual, 1e-8);
    EXPECT_GT(rec.plain_residual, rec.residual);

    auto q = exp_problem(3.0, 0.02);
    Reconstruction rq = reconstruct(q, resolvent(q));
    EXPECT_LT(rq.residual, 1e-12);
    // natural resolvent without the correction is only second order accurate
    Reconstruction rq2 = reconstruct(exp_problem(3.0, 0.01), resolvent(exp_problem(3.0, 0.01)));
    EXPECT_NEAR(rq.plain_residual / rq2.plain_residual, 4.0, 0.8);
}

TEST(Volterra, GripenbergStableResolvent) {
    auto p = VolterraProblem::invariant([](double x) { return 0.5 * std::exp(-x); }, [](double) { return 1.0; }, 200.0, 0.05);
    GripenbergReport rep = gripenberg_check(p, {1.0, 2.0, 5.0, 10.0});
    EXPECT_TRUE(rep.nonnegative);
    EXPECT_TRUE(rep.decreasing_in_t);
    EXPECT_TRUE(rep.tail_condition);
    EXPECT_TRUE(rep.flags.empty());
    size_t n100 = static_cast<size_t>(100.0 / p.dt);
    EXPECT_LT(std::abs(rep.r_l1.back() - rep.r_l1[n100]) / rep.r_l1.back(), 0.01);
    // r = 0.5 exp(-1.5 t), total mass 1/3
    EXPECT_NEAR(rep.r_l1_sup, 1.0 / 3.0, 1e-3);
}

TEST(Volterra, GripenbergFlagsConstantKernel) {
    double T = 20.0, c = 3.0 / T;
    auto p = VolterraProblem::invariant([c](double) { return c; }, [](double) { return 1.0; }, T, 0.05);
    GripenbergReport rep = gripenberg_check(p, {0.1 * T, 0.25 * T, 0.5 * T});
    EXPECT_FALSE(rep.tail_condition);
    EXPECT_FALSE(rep.flags.empty());
}

TEST(Volterra, GripenbergZeroKernel) {
    auto p = VolterraProblem::invariant([](double) { return 0.0; }, [](double) { return 1.0; }, 10.0, 0.1);
    GripenbergReport rep = gripenberg_check(p, {1.0});
    EXPECT_EQ(rep.r_l1_sup, 0.0);
    EXPECT_TRUE(rep.tail_condition);
}

TEST(Volterra, RunningL1) {
    Series s;
    for (int n = 0; n <= 100; ++n) {
        s.t.push_back(0.01 * n);
        s.v.push_back(-1.0);
    }
    auto l = running_l1(s);
    EXPECT_NEAR(l.back(), 1.0, 1e-12);
}

TEST(LinearDDE, PureDecay) {
    LinearDDEProblem p{[](double) { return 0.1; }, [](double, double) { return 0.0; },
                       [](double) { return 0.0; }, 2.0};
    LinearDDEReport r = linear_dde_solve(p, 20.0, 0.01);
    double err = 0.0;
    for (size_t n = 0; n < r.I.t.size(); ++n) err = std::max(err, std::abs(r.I.v[n] - 2.0 * std::exp(-0.1 * r.I.t[n])));
    EXPECT_LT(err, 1e-6);
    EXPECT_LT(r.route_gap, 1e-6);
}

TEST(LinearDDE, ExponentialMemoryConverges) {
    LinearDDEProblem p{[](double) { return 0.0; }, [](double t, double s) { return std::exp(-(t - s)); },
                       [](double) { return 0.0; }, 1.0};
    LinearDDEReport r = linear_dde_solve(p, 100.0, 0.05);
    EXPECT_LT(r.tail_oscillation, 1e-4);
    EXPECT_LT(r.route_gap, 1e-6);
    EXPECT_NEAR(r.sup_column_mass, 1.0, 1e-8);
    EXPECT_LT(r.truncation_tail, 1e-12);
    ASSERT_EQ(r.window_mass.size(), r.gamma_scan.size());
    for (size_t i = 1; i < r.window_mass.size(); ++i) EXPECT_LE(r.window_mass[i], r.window_mass[i - 1] + 1e-12);
}

TEST(LinearDDE, RoutesAgreeWithForcing) {
    LinearDDEProblem p{[](double t) { return 0.2 + 0.1 * std::sin(t); },
                       [](double t, double s) { return std::exp(-(t - s)); },
                       [](double t) { return std::exp(-t); }, 1.0};
    LinearDDEReport coarse = linear_dde_solve(p, 10.0, 0.01);
    LinearDDEReport fine = linear_dde_solve(p, 10.0, 0.0025);
    EXPECT_LT(fine.route_gap, 1e-6);
    EXPECT_NEAR(coarse.route_gap / fine.route_gap, 16.0, 3.2);
    EXPECT_LT(fine.tail_oscillation, coarse.sup_abs);
}

TEST(LinearDDE, MemoryOnlyConstantIsStationary) {
    // I constant solves the equation with a = f = 0 for any kernel
    LinearDDEProblem p{[](double) { return 0.0; }, [](double t, double s) { return 1.0 + t * s; },
                       [](double) { return 0.0; }, 3.0};
    LinearDDEReport r = linear_dde_solve(p, 5.0, 0.05);
    for (double v : r.I.v) EXPECT_NEAR(v, 3.0, 1e-12);
}

TEST(LinearDDE, BoundConstantsStableUnderRefinement) {
    std::vector<LinearDDEProblem> fam;
    for (double a : {0.0, 0.2, 0.5})
        fam.push_back({[a](double) { return a; }, [](double t, double s) { return std::exp(-(t - s)); },
                       [](double t) { return std::exp(-t); }, 1.0});
    BoundConstants c1 = measure_bound_constants(fam, 20.0, 0.02);
    BoundConstants c2 = measure_bound_constants(fam, 20.0, 0.01);
    EXPECT_NEAR(c1.C1, 1.0, 1e-6);
    EXPECT_GT(c1.C2, 0.0);
    EXPECT_NEAR(c1.C1, c2.C1, 1e-3);
    EXPECT_NEAR(c1.C2, c2.C2, 1e-3 * c2.C2);
}
