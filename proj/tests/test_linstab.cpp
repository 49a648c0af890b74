#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nlt/core/errors.hpp"
#include "nlt/core/quadrature.hpp"
#include "nlt/linstab/linstab.hpp"
#include "oracles.hpp"

using namespace nlt;
using namespace nlt::linstab;

namespace {

pde::Model log_model(double p = 2.0) {
    SourceFn s = SourceFn::kernel_inf(1.0, Kernel::log());
    return {s, canonical_functional(s), p};
}

pde::Model const_model(double p = 2.0) {
    SourceFn s = SourceFn::constant(1.0);
    return {s, canonical_functional(s), p};
}

const LinearKernel& log_kernel() {
    static LinearKernel lk(log_model());
    return lk;
}

// a xi_p e^{-y}
Profile bump(const Equilibrium& eq, double a) {
    Profile prof;
    prof.eval = [eq, a](double y) {
        EquilibriumPoint e = eq.at(y);
        double ex = std::exp(-y);
        return Jet{a * e.xi * ex, a * (e.dxi - e.xi) * ex, a * (e.d2xi - 2 * e.dxi + e.xi) * ex};
    };
    return prof;
}

Profile rational(double c) {
    Profile prof;
    prof.eval = [c](double y) {
        double d = 1.0 / (1.0 + y);
        return Jet{c * d, -c * d * d, 2 * c * d * d * d};
    };
    return prof;
}

}  // namespace

TEST(Semigroup, ConstantAndIdentity) {
    Profile c = constant_profile(3.0);
    EXPECT_NEAR(semigroup(c, 2.0, 1.5, 0.7), 3.0 * std::exp(-0.75), 1e-15);
    Profile r = rational(1.0);
    EXPECT_DOUBLE_EQ(semigroup(r, 2.0, 0.0, 0.3), 1.0 / 1.3);
}

TEST(Semigroup, CompositionProperty) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.0, 3.0);
    const double p = 1.7;
    Profile r = rational(2.0);
    for (int i = 0; i < 50; ++i) {
        double y = U(rng) + 1e-3, t1 = U(rng), t2 = U(rng);
        Profile inner;
        inner.eval = [&](double x) { return Jet{semigroup(r, p, t2, x), 0.0, 0.0}; };
        EXPECT_NEAR(semigroup(inner, p, t1, y), semigroup(r, p, t1 + t2, y), 1e-12);
    }
}

TEST(LinearKernel, ConstantSourceClosedForm) {
    LinearKernel lk(const_model());
    EXPECT_NEAR(lk.K0(), 0.25, 1e-12);
    EXPECT_NEAR(lk.denom(), 4.0 / 9.0, 1e-12);
    for (double t : {0.5, 2.0, 7.0}) EXPECT_NEAR(lk.K(t), 0.25 * std::exp(-t / 2.0), 1e-12);
    EXPECT_NEAR(lk.Kprime(1.0), -0.125 * std::exp(-0.5), 1e-12);
}

TEST(LinearKernel, DerivativeMatchesDifferences) {
    const LinearKernel& lk = log_kernel();
    for (double t : {0.0, 0.7, 3.0, 9.0}) {
        double h = 1e-4;
        double fd = t == 0.0 ? (-3 * lk.K(0) + 4 * lk.K(h) - lk.K(2 * h)) / (2 * h)
                             : (lk.K(t + h) - lk.K(t - h)) / (2 * h);
        EXPECT_NEAR(lk.Kprime(t), fd, 1e-7 * std::max(1.0, std::abs(fd)));
        EXPECT_NEAR(lk.monotone_margin(t), lk.Kprime(t) + lk.K(t) / lk.p(), 1e-12);
    }
}

TEST(LinearKernel, LogSourceCertificate) {
    const LinearKernel& lk = log_kernel();
    KernelCertificate c = certify_kernel(lk, 10 * lk.p(), 400);
    EXPECT_TRUE(c.positive);
    EXPECT_TRUE(c.nonincreasing);
    EXPECT_GT(c.min_K, 0.0);
    for (double m : c.margin) EXPECT_GE(m, -1e-10);
    EXPECT_LE(c.max_derivative_margin, 0.0);
    EXPECT_EQ(c.csv().substr(0, 22), "t,K,expK_monotone_marg");
}

TEST(Laplace, ConstantSourcePole) {
    LinearKernel lk(const_model());
    LaplaceTransform Kh(lk);
    for (std::complex<double> z : {std::complex<double>(0.3, 0.0), std::complex<double>(-0.2, 4.0),
                                   std::complex<double>(1.0, -20.0)}) {
        std::complex<double> exact = 0.25 / (z + 0.5);
        EXPECT_LE(std::abs(Kh(z) - exact), Kh.tail_bound(z) + 1e-10);
    }
}

TEST(Laplace, PositiveOnRealAxis) {
    LaplaceTransform Kh(log_kernel());
    for (double x : {0.01, 0.5, 3.0}) EXPECT_GT(Kh({x, 0.0}).real(), 0.0);
}

TEST(Laplace, LogModelWindingZero) {
    const LinearKernel& lk = log_kernel();
    LaplaceReport r = laplace_condition(lk, -1.0 / (1.2 * lk.p()));
    EXPECT_EQ(r.winding, 0);
    EXPECT_TRUE(r.conclusive);
    EXPECT_EQ(r.status, "holds");
    EXPECT_GE(r.samples, 4000u);
}

TEST(LinearEvolve, ZeroPerturbation) {
    LinearEvolution ev = linear_evolve(log_kernel(), constant_profile(0.0), 2.0, 0.05);
    for (double v : ev.u.v) EXPECT_EQ(v, 0.0);
    for (double v : ev.norm) EXPECT_EQ(v, 0.0);
}

TEST(LinearEvolve, DecayRateMatchesContinuedZero) {
    const LinearKernel& lk = log_kernel();
    const double p = lk.p();
    LinearEvolution ev = linear_evolve(lk, bump(lk.equilibrium(), 1e-3), 20.0, 0.02);
    double rate = oracle::linear_decay_rate(lk);
    EXPECT_NEAR(ev.fit.rate, rate, 2e-3 * rate);
    EXPECT_GT(ev.fit.r2, 0.999);
    // decay at least 1/q for q = 1.2 p
    EXPECT_GE(ev.fit.rate, 1.0 / (1.2 * p));
    double sup = 0.0;
    for (size_t n = 0; n < ev.u.v.size(); ++n)
        sup = std::max(sup, std::abs(ev.u.v[n]) * std::exp(ev.u.t[n] / (1.2 * p)));
    EXPECT_LT(sup, 10.0 * std::abs(ev.u.v[0]));
}

TEST(LinearEvolve, IdentityForITilde) {
    // I~(t) = <dI(xi_p), xi~(t)> / (p I_p) along the linear flow, up to O(dt^2)
    const LinearKernel& lk = log_kernel();
    auto err = [&](double dt) {
        LinearEvolution ev = linear_evolve(lk, bump(lk.equilibrium(), 1e-3), 4.0, dt, 1000);
        size_t n = ev.u.v.size() - 1;
        double pr = lk.pair([&](double y) { return ev.xi(n, y).v; }) / (lk.p() * lk.Ip());
        return std::abs(ev.I_tilde.v[n] - pr) / std::abs(ev.I0_tilde);
    };
    double e1 = err(0.02), e2 = err(0.01);
    EXPECT_LT(e2, 1e-4);
    EXPECT_NEAR(e1 / e2, 4.0, 0.8);
}

TEST(LinearEvolve, MatchesNonlinearPDE) {
    const LinearKernel& lk = log_kernel();
    pde::StepOptions opt;
    opt.functional_nodes = 256;
    LinearizationGap g0 = linearization_gap(lk, bump(lk.equilibrium(), 1e-3), 8.0, 0.02, 25, {1e-2, 1e2, 21}, opt);
    EXPECT_LT(g0.I_rel_gap, 1e-4);
    LinearizationGap g1 = linearization_gap(lk, bump(lk.equilibrium(), 1e-2), 8.0, 0.02, 25, {1e-2, 1e2, 21}, opt);
    LinearizationGap g2 = linearization_gap(lk, bump(lk.equilibrium(), 5e-3), 8.0, 0.02, 25, {1e-2, 1e2, 21}, opt);
    double slope = std::log(g1.profile_gap / g2.profile_gap) / std::log(g1.amplitude / g2.amplitude);
    EXPECT_NEAR(slope, 2.0, 0.2);
}

TEST(Perturbation, ZeroAndScaling) {
    const LinearKernel& lk = log_kernel();
    Deltas z = perturbation_deltas(lk, constant_profile(0.0));
    EXPECT_NEAR(z.d1, 0.0, 1e-14);
    EXPECT_NEAR(z.d2, 0.0, 1e-14);
    std::vector<double> a{4e-3, 2e-3, 1e-3}, d1, d2;
    for (double x : a) {
        Deltas d = perturbation_deltas(lk, bump(lk.equilibrium(), x));
        d1.push_back(std::abs(d.d1));
        d2.push_back(std::abs(d.d2));
    }
    for (int i = 0; i < 2; ++i) {
        EXPECT_NEAR(std::log(d1[i] / d1[i + 1]) / std::log(2.0), 1.0, 0.05);
        EXPECT_NEAR(std::log(d2[i] / d2[i + 1]) / std::log(2.0), 2.0, 0.1);
    }
}

TEST(Perturbation, LipschitzRatiosBounded) {
    const LinearKernel& lk = log_kernel();
    std::vector<Profile> fam;
    for (double a : {1e-3, 2e-3, -1e-3}) fam.push_back(bump(lk.equilibrium(), a));
    for (double c : {1e-3, -2e-3}) fam.push_back(rational(c));
    LipschitzReport r = lipschitz_ratios(lk, fam);
    EXPECT_EQ(r.pairs, 10u);
    EXPECT_GT(r.delta1, 0.0);
    EXPECT_LT(r.delta1, 10.0);
    EXPECT_LT(r.delta2, 10.0);
}

TEST(LinearDDECoefficients, ClosedFormMatchesIntegrals) {
    const LinearKernel& lk = log_kernel();
    for (double t : {0.0, 0.5, 2.0, 6.0})
        for (double y : {0.02, 1.0, 30.0})
            EXPECT_NEAR(coefficient_closed(lk, t, y), coefficient_integrals(lk, t, y), 1e-9);
}

TEST(LinearDDECoefficients, HistoryCoefficientMatchesIntegrals) {
    // coefficient of I~(s) collected directly from the linearised profile
    const LinearKernel& lk = log_kernel();
    const SourceFn& h = lk.model().source;
    const double p = lk.p();
    for (double t : {1.0, 3.0})
        for (double s : {0.3 * t, 0.8 * t}) {
            double direct = lk.pair([&](double y) {
                auto yp = [&](double u) { return semigroup_point(p, t - u, y); };
                double v = h.eval(yp(s), 0) * std::exp(-(t - s) / p) / p -
                           h.eval(yp(s), 1) * std::exp(-(t - s) / p) * yp(s) / p;
                v += adaptive_integrate([&](double u) { return h.eval(yp(u), 1) * std::exp((s - t) / p); }, 0, s) / p;
                v += (1 + y / p) * h.eval(yp(s), 2) * yp(s);
                v -= (1 + y / p) *
                     adaptive_integrate([&](double u) { return h.eval(yp(u), 2) * std::exp((s - u) / p); }, 0, s);
                return v;
            });
            EXPECT_NEAR(lin_dde_coeffs(lk, t, s).m, -direct / lk.denom(), 1e-9);
        }
}

TEST(LinearDDECoefficients, ShiftInvariance) {
    // M(t) - int_0^t m(t,s) ds equals the coefficient of I~(0) in the forcing
    const LinearKernel& lk = log_kernel();
    for (double t : {0.5, 2.0, 6.0}) {
        double M = lin_dde_coeffs(lk, t, t).M;
        double im = adaptive_integrate([&](double s) { return lin_dde_coeffs(lk, t, s).m; }, 0.0, t, 1e-12);
        double gh = lk.pair_evolved([&](double y) { return lk.model().source.eval(y, 0); }, t) / lk.denom();
        EXPECT_NEAR(M - im, -gh, 1e-10);
    }
}

TEST(LinearDDE, RoutesAndBounds) {
    const LinearKernel& lk = log_kernel();
    const double p = lk.p();
    Profile xi0 = bump(lk.equilibrium(), 1e-3);
    LinearDDERun a = lin_dde_solve(lk, 0.0, xi0, 10.0, 0.02);
    LinearDDERun b = lin_dde_solve(lk, 0.0, xi0, 10.0, 0.01);
    EXPECT_GE(a.M_residual_rate, 1.0 / (1.2 * p));
    EXPECT_LT(a.m_residual, 1.0);
    EXPECT_GE(a.dI_fit.rate, 1.0 / (1.2 * p));
    // weighted gap finite and stable under refinement on a fixed horizon
    EXPECT_NEAR(a.weighted_gap, b.weighted_gap, 0.05 * b.weighted_gap);
    // restoring the initial displacement term closes the gap to discretisation level
    EXPECT_NEAR(a.completed_gap / b.completed_gap, 4.0, 0.8);
    EXPECT_LT(b.completed_gap, 1e-3 * b.end_gap);
}

TEST(LinearDDE, BoundedByInitialValue) {
    const LinearKernel& lk = log_kernel();
    LinearDDERun r = lin_dde_solve(lk, 1e-3, constant_profile(0.0), 20.0, 0.02);
    double C = r.sup_abs / 1e-3;
    EXPECT_GE(C, 1.0);
    EXPECT_LT(C, 10.0);
    LinearDDERun r2 = lin_dde_solve(lk, 2e-3, constant_profile(0.0), 20.0, 0.02);
    EXPECT_NEAR(r2.sup_abs / 2e-3, C, 1e-9 * C);
}
