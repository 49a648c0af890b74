#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "nlt/core/equilibrium.hpp"
#include "nlt/core/errors.hpp"
#include "nlt/core/functional.hpp"
#include "nlt/core/initial_data.hpp"
#include "nlt/core/quadrature.hpp"
#include "nlt/core/source.hpp"

using namespace nlt;

namespace {

SourceFn log_source() { return SourceFn::kernel_inf(1.0, Kernel::log()); }

double gk(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 40, 1e-14);
}

FunctionalSpec unit_b_functional() {
    FunctionalSpec F;
    F.a = [](double y) { return 1.0 / (y * y); };
    F.b = [](double) { return 1.0; };
    return F;
}

Profile exp_profile(double amp, double scale) {
    Profile p;
    p.eval = [=](double y) {
        double e = std::exp(-y / scale);
        return Jet{amp * e, -amp * e / scale, amp * e / (scale * scale)};
    };
    return p;
}

}  // namespace

TEST(Quadrature, GaussLegendreIntegratesPolynomialsExactly) {
    for (int n : {1, 2, 3, 4, 7, 8, 128}) {
        const GaussRule& g = gauss_legendre(n);
        double s0 = 0, s2 = 0;
        for (int i = 0; i < n; ++i) {
            s0 += g.w[i];
            s2 += g.w[i] * g.x[i] * g.x[i];
            if (i > 0) EXPECT_LT(g.x[i - 1], g.x[i]);
        }
        EXPECT_NEAR(s0, 2.0, 1e-13);
        if (n >= 2) EXPECT_NEAR(s2, 2.0 / 3.0, 1e-13);
    }
}

TEST(Quadrature, SemiInfiniteAlgebraicTail) {
    auto r = integrate_semi_infinite([](double y) { return 1.0 / (y * y * y); }, 1.0);
    EXPECT_NEAR(r.value, 0.5, 1e-12);
}

TEST(Source, ConstantKind) {
    SourceFn s = SourceFn::constant(1.0);
    EXPECT_EQ(s.eval(5.0, 0), 1.0);
    EXPECT_EQ(s.eval(5.0, 1), 0.0);
    EXPECT_THROW(s.eval(0.0, 0), DomainError);
    EXPECT_THROW(s.eval(1.0, 3), DomainError);
}

TEST(Source, LogKernelValueMatchesQuadrature) {
    SourceFn s = log_source();
    EXPECT_NEAR(s.eval(1.0, 0), 1.0 + std::log(2.0), 1e-15);
    // independent: adaptive quadrature of k(y')/y'
    double q = gk([](double t) { return 1.0 / (t * (1.0 + t)); }, 1.0,
                  std::numeric_limits<double>::infinity());
    EXPECT_NEAR(s.eval(1.0, 0), 1.0 + q, 1e-12);
}

TEST(Source, LogKernelSecondDerivative) {
    SourceFn s = log_source();
    EXPECT_NEAR(s.eval(1.0, 2), 0.75, 1e-15);
    double h = 1e-5;
    double fd = (s.eval(1.0 + h, 1) - s.eval(1.0 - h, 1)) / (2 * h);
    EXPECT_NEAR(fd, 0.75, 1e-8);
}

TEST(Source, LogKernelConvexityClosedForms) {
    SourceFn s = log_source();
    for (double y : LogGrid{1e-4, 1e4, 300}.points()) {
        double h1 = s.eval(y, 1), h2 = s.eval(y, 2);
        EXPECT_NEAR(y * h2 + h1, 1.0 / ((1 + y) * (1 + y)), 1e-12 * std::max(1.0, 1 / y));
        EXPECT_NEAR(y * y * h2, (2 * y + 1) / ((1 + y) * (1 + y)), 1e-12);
    }
    SourceReport r = check_source(s);
    EXPECT_TRUE(r.ok) << r.message;
    EXPECT_TRUE(r.convexity_conditions);
    EXPECT_LT(r.tail_gap, 1e-5);
    EXPECT_LT(r.yh_at_small, 1e-4);
}

TEST(Source, ExpAndCompactKernelsDerivativesAgreeWithDifferences) {
    for (SourceFn s : {SourceFn::kernel_inf(1.0, Kernel::exp()), SourceFn::kernel_inf(1.0, Kernel::compact()),
                       SourceFn::kernel_p(1.0, 2.0, Kernel::exp()), SourceFn::kernel_p(1.0, 2.0, Kernel::compact())}) {
        for (double y : {0.1, 0.5, 0.9, 2.0}) {
            double h = 1e-6 * y;
            double d1 = (s.eval(y + h, 0) - s.eval(y - h, 0)) / (2 * h);
            double d2 = (s.eval(y + h, 1) - s.eval(y - h, 1)) / (2 * h);
            EXPECT_NEAR(d1, s.eval(y, 1), 1e-6 * std::max(1.0, std::abs(d1))) << s.describe() << " y=" << y;
            EXPECT_NEAR(d2, s.eval(y, 2), 1e-5 * std::max(1.0, std::abs(d2))) << s.describe() << " y=" << y;
        }
        EXPECT_TRUE(check_source(s).ok) << s.describe();
    }
}

TEST(Source, CustomKernelMatchesBuiltin) {
    Kernel k = Kernel::custom("exp-custom", [](double y) { return std::exp(-y); },
                              [](double y) { return -std::exp(-y); }, true);
    SourceFn a = SourceFn::kernel_inf(1.0, k), b = SourceFn::kernel_inf(1.0, Kernel::exp());
    for (double y : {0.05, 0.7, 3.0}) EXPECT_NEAR(a.eval(y, 0), b.eval(y, 0), 1e-10);
}

TEST(Source, KernelPRejectsLogKernel) {
    EXPECT_THROW(SourceFn::kernel_p(1.0, 2.0, Kernel::log()), ConfigError);
}

TEST(Source, TabulatedSplineFollowsTable) {
    SourceFn ref = log_source();
    std::vector<double> ys, hs;
    for (int i = 0; i <= 400; ++i) {
        double y = 0.05 + i * 0.05;
        ys.push_back(y);
        hs.push_back(ref.eval(y, 0));
    }
    ys.push_back(1e7);
    hs.push_back(1.0);
    SourceFn t = SourceFn::tabulated(ys, hs, 1.0);
    EXPECT_NEAR(t.eval(1.0, 0), ref.eval(1.0, 0), 1e-12);
    EXPECT_NEAR(t.eval(1.025, 0), ref.eval(1.025, 0), 1e-5);
    EXPECT_NEAR(t.eval(1.025, 1), ref.eval(1.025, 1), 1e-3);
    EXPECT_THROW(t.eval(0.01, 0), DomainError);
}

TEST(Equilibrium, ConstantSource) {
    SourceFn s = SourceFn::constant(1.0);
    Equilibrium eq(s, 2.0);
    for (double y : {0.01, 1.0, 50.0}) {
        EquilibriumPoint e = eq.at(y);
        EXPECT_NEAR(e.xi, 2.0, 1e-14);
        EXPECT_NEAR(e.Axi, 2.0, 1e-14);
        Jet j{e.xi, e.dxi, e.d2xi};
        EXPECT_NEAR(apply_AB(j, 2.0, y).B, 1.0, 1e-14);
    }
}

TEST(Equilibrium, LogSourceAgreesWithAdaptiveOracle) {
    SourceFn s = log_source();
    const double p = 2.0, y = 1.0, Y = 1e4;
    double body = gk([&](double t) { return p * s.eval(t, 0) / ((p + t) * (p + t)); }, y, Y);
    // tail with h = 1 + 1/y' + O(y'^-2) closed by partial fractions
    double tail = p / (p + Y) + (std::log((p + Y) / Y) / (p * p) - 1.0 / (p * (p + Y))) * p;
    double oracle = (p + y) * (body + tail);
    EXPECT_NEAR(equilibrium_xi_p(s, p, y).xi, oracle, 1e-8);
}

TEST(Equilibrium, LogSourceSatisfiesStationarityByDifferences) {
    SourceFn s = log_source();
    Equilibrium eq(s, 2.0);
    for (double y : {0.05, 1.0, 7.0}) {
        double d = 1e-3 * y;
        double fd = (-eq.at(y + 2 * d).xi + 8 * eq.at(y + d).xi - 8 * eq.at(y - d).xi +
                     eq.at(y - 2 * d).xi) /
                    (12 * d);
        double B = eq.at(y).xi / 2.0 - (1 + y / 2.0) * fd;
        EXPECT_NEAR(B, s.eval(y, 0), 1e-8) << "y=" << y;
        double A = eq.at(y).xi - y * fd;
        EXPECT_NEAR(A, eq.at(y).Axi, 1e-8);
    }
}

TEST(Equilibrium, TableMatchesQuadrature) {
    SourceFn s = log_source();
    Equilibrium exact(s, 2.0), fast(s, 2.0, true);
    for (double y : LogGrid{1e-8, 1e8, 57}.points())
        EXPECT_NEAR(fast.P(y), exact.P(y), 5e-11 * exact.P(y)) << "y=" << y;
}

TEST(Operators, SimpleProfiles) {
    ABValue c = apply_AB(constant_profile(3.0), 2.0, 1.5);
    EXPECT_DOUBLE_EQ(c.A, 3.0);
    EXPECT_DOUBLE_EQ(c.B, 1.5);
    Profile lin;
    lin.eval = [](double y) { return Jet{y, 1.0, 0.0}; };
    EXPECT_DOUBLE_EQ(apply_AB(lin, 2.0, 4.0).A, 0.0);
}

TEST(Functional, ClosedFormValues) {
    FunctionalSpec F = unit_b_functional();
    EXPECT_NEAR(functional_I(F, constant_profile(2.0)), 1.0 / 3.0, 1e-10);
    EXPECT_NEAR(functional_I(F, constant_profile(0.0)), 1.0, 1e-10);
    EXPECT_NEAR(functional_dI(F, constant_profile(2.0), 2.0), -1.0 / 36.0, 1e-15);
    EXPECT_EQ(functional_dI(F, constant_profile(2.0), 0.5), 0.0);
}

TEST(Functional, MonotoneInProfile) {
    FunctionalSpec F = unit_b_functional();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.1, 3.0);
    for (int k = 0; k < 20; ++k) {
        double a = U(rng), s = U(rng), extra = U(rng);
        double lo = functional_I(F, exp_profile(a, s));
        Profile hi = exp_profile(a, s);
        auto base = hi.eval;
        hi.eval = [base, extra](double y) {
            Jet j = base(y);
            j.v += extra;
            return j;
        };
        EXPECT_GE(lo, functional_I(F, hi));
    }
}

TEST(Functional, GateauxDerivativeMatchesGradient) {
    SourceFn s = log_source();
    FunctionalSpec F = canonical_functional(s);
    Profile z = Equilibrium(s, 2.0).profile();
    auto phi = [](double y) { return std::exp(-y) + 1.0 / (1.0 + y); };
    double eps = 1e-6;
    Profile zp = z;
    zp.eval = [&](double y) {
        Jet j = z(y);
        j.v += eps * phi(y);
        return j;
    };
    double fd = (functional_I(F, zp) - functional_I(F, z)) / eps;
    double an = inner_dI(F, z, phi);
    EXPECT_LT(std::abs(fd / an - 1.0), 1e-5);
}

TEST(Functional, RhoAtConstantEquilibrium) {
    SourceFn s = SourceFn::constant(1.0);
    FunctionalSpec F = canonical_functional(s);
    RhoValue r = rho(F, s, 2.0, Equilibrium(s, 2.0).profile());
    EXPECT_NEAR(r.numerator, 2.0 / 9.0, 1e-10);
    EXPECT_NEAR(r.denominator, 4.0 / 9.0, 1e-10);
    EXPECT_NEAR(r.rho, 0.5, 1e-10);
}

TEST(Functional, RhoAtLogEquilibrium) {
    SourceFn s = log_source();
    FunctionalSpec F = canonical_functional(s);
    for (double p : {0.5, 2.0, 5.0})
        EXPECT_NEAR(rho(F, s, p, Equilibrium(s, p).profile()).rho, 1.0 / p, 1e-6);
}

TEST(Functional, RhoExceedsInverseP) {
    SourceFn c = SourceFn::constant(1.0);
    RhoValue r = rho(canonical_functional(c), c, 2.0, constant_profile(3.0));
    EXPECT_NEAR(r.rho, 0.6, 1e-10);
    SourceFn s = log_source();
    // xi_4 decreases to 4 > 2 h(1)
    RhoValue rl = rho(canonical_functional(s), s, 2.0, Equilibrium(s, 4.0).profile());
    EXPECT_GT(rl.rho, 0.5);
}

TEST(Functional, RhoDeviationIdentityOnRandomProfiles) {
    SourceFn s = log_source();
    const double p = 2.0;
    FunctionalSpec F = canonical_functional(s);
    Equilibrium eq(s, p);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.2, 1.5);
    for (int k = 0; k < 20; ++k) {
        double c = U(rng), a = U(rng) - 0.2, sc = 3 * U(rng);
        Profile z;
        z.eval = [=](double y) {
            EquilibriumPoint e = eq.at(y);
            double ex = std::exp(-y / sc);
            return Jet{c * e.xi + a * ex, c * e.dxi - a * ex / sc, c * e.d2xi + a * ex / (sc * sc)};
        };
        RhoValue r = rho(F, s, p, z);
        double rhs = inner_dI(F, z, [&](double y) {
                         Jet j = z(y);
                         EquilibriumPoint e = eq.at(y);
                         Jet d{j.v - e.xi, j.d1 - e.dxi, 0.0};
                         return -apply_AB(d, p, y).B;
                     }) /
                     r.denominator;
        EXPECT_NEAR(r.rho - 1.0 / p, rhs, 1e-8) << "sample " << k;
    }
}

TEST(Functional, GradientLipschitzConstantStable) {
    SourceFn s = log_source();
    FunctionalSpec F = canonical_functional(s);
    auto lipschitz = [&](int n) {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> U(0.0, 4.0);
        double C = 0.0;
        for (int k = 0; k < 30; ++k) {
            double c1 = U(rng), c2 = U(rng), s1 = 0.5 + U(rng);
            auto z1 = [=](double y) { return c1 * std::exp(-y / s1); };
            auto z2 = [=](double y) { return c2 * std::exp(-y / s1); };
            double l1 = integrate_semi_infinite(
                            [&](double y) { return std::abs(F.gradient(y, z1(y)) - F.gradient(y, z2(y))); },
                            F.eps0, 1e-10, n, 8 * n)
                            .value;
            double sup = std::abs(c1 - c2) * std::exp(-F.eps0 / s1);
            C = std::max(C, l1 / sup);
        }
        return C;
    };
    double c1 = lipschitz(64), c2 = lipschitz(256);
    EXPECT_GT(c1, 0.0);
    EXPECT_NEAR(c1, c2, 1e-6 * c2);
}

TEST(Functional, PositiveLowerBoundAndSampledInfimum) {
    SourceFn s = log_source();
    FunctionalSpec F = canonical_functional(s);
    std::vector<Profile> fam;
    for (double c : {0.5, 1.0, 2.0, 4.0}) fam.push_back(Equilibrium(s, 2.0).profile(c));
    for (double a : {0.0, 1.0, 5.0}) fam.push_back(constant_profile(a));
    double cM = 1e300;
    for (auto& z : fam) cM = std::min(cM, functional_I(F, z));
    EXPECT_GT(cM, 0.0);
    EXPECT_GT(sampled_positivity(F, s, fam), 0.0);
}

TEST(Norms, ConstantAndExponential) {
    LogGrid g{1e-7, 1e3, 400};
    EXPECT_NEAR(weighted_norm(constant_profile(2.5), 2, g), 2.5, 1e-15);
    Profile e = exp_profile(1.0, 1.0);
    EXPECT_GE(weighted_norm(e, 1, g), 1.0 - 1e-6);
    EXPECT_LE(weighted_norm(e, 1, g), 1.0);
}

TEST(Norms, EquilibriumNormStableUnderRefinement) {
    Profile z = Equilibrium(log_source(), 2.0, true).profile();
    double a = weighted_norm(z, 2, LogGrid{1e-4, 1e4, 200});
    double b = weighted_norm(z, 2, LogGrid{1e-4, 1e4, 800});
    EXPECT_NEAR(a, b, 1e-4);
    // central differences of xi' reproduce the analytic second derivative
    Profile nod = z;
    nod.eval = [z](double y) {
        Jet j = z(y);
        j.d2 = std::numeric_limits<double>::quiet_NaN();
        return j;
    };
    EXPECT_NEAR(weighted_norm(nod, 2, LogGrid{1e-4, 1e4, 200}), a, 1e-6);
}

TEST(InitialData, FamiliesAreDecreasing) {
    SourceFn s = log_source();
    for (InitialSpec spec : {InitialSpec{"equilibrium", 3.0, 1.0, 0.0}, InitialSpec{"scaled", 0.0, 1.2, 0.0},
                             InitialSpec{"perturbed", 0.0, 1.0, 0.1}}) {
        Profile z = make_initial(spec, s, 2.0);
        for (double y : LogGrid{1e-3, 1e3, 50}.points()) {
            EXPECT_GT(z(y).v, 0.0);
            EXPECT_LE(z(y).d1, 0.0);
        }
    }
    EXPECT_THROW(make_initial(InitialSpec{"bogus"}, s, 2.0), ConfigError);
}
