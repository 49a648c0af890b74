#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nlt/core/errors.hpp"
#include "nlt/core/fit.hpp"
#include "nlt/core/initial_data.hpp"
#include "nlt/dde/dde.hpp"
#include "nlt/linstab/linstab.hpp"

using namespace nlt;
using namespace nlt::dde;

namespace {

pde::Model log_model(double p = 2.0) {
    SourceFn s = SourceFn::kernel_inf(1.0, Kernel::log());
    return {s, canonical_functional(s), p};
}

pde::Model const_model(double p = 2.0) {
    SourceFn s = SourceFn::constant(1.0);
    return {s, canonical_functional(s), p};
}

Profile xi_pprime(const pde::Model& m, double pp) {
    InitialSpec is;
    is.p_prime = pp;
    return make_initial(is, m.source, m.p);
}

Profile perturbed(const pde::Model& m, double a) {
    InitialSpec is;
    is.family = "perturbed";
    is.amplitude = a;
    return make_initial(is, m.source, m.p);
}

// I(s) = I0 * fn(s) sampled on a uniform grid
template <class Fn>
IHistory sampled(Fn fn, double T, double dt, LogInterp interp = LogInterp::linear) {
    IHistory h(fn(0.0), 0.0, interp);
    long n = std::lround(T / dt);
    for (long k = 1; k <= n; ++k) h.push(k * dt, fn(k * dt));
    return h;
}

double yp(double p, double t, double s, double y) {
    double e = std::exp((t - s) / p);
    return e * y + p * (e - 1.0);
}

}  // namespace

TEST(IHistory, InterpolantAndPositivity) {
    IHistory h = sampled([](double s) { return 1.0 + 0.5 * s; }, 2.0, 0.5);
    EXPECT_NEAR(h.log_I_at(1.0), std::log(1.5), 1e-15);
    EXPECT_NEAR(h.log_I_at(0.25), 0.5 * std::log(1.25), 1e-15);
    EXPECT_DOUBLE_EQ(h.v(2.0, 1.3, 1.3), 1.0);
    EXPECT_NEAR(h.v(2.0, 2.0, 1.0), std::sqrt(1.5 / 2.0), 1e-15);
    EXPECT_THROW(h.push(3.0, 0.0), ModelError);
    EXPECT_THROW(h.push(3.0, -1.0), ModelError);
    EXPECT_THROW(h.v(2.0, 1.0, 1.5), DomainError);
}

TEST(IHistory, QuadraticFromRhoIsConsistent) {
    const double p = 2.0, I0 = 0.7;
    pde::RhoHistory rh(0.5);
    for (int k = 1; k <= 20; ++k) rh.push(0.1 * k, 0.5 + 0.2 * std::sin(0.1 * k));
    IHistory h = IHistory::from_rho(rh, I0, p);
    for (double s : {0.03, 0.57, 1.21, 1.99})
        EXPECT_NEAR(h.log_I_at(s), std::log(I0) + p * rh.R_at(s) - s, 1e-13);
}

TEST(VandZ, ConstantIGivesUnitPath) {
    const double p = 2.0, t = 3.0;
    for (LogInterp li : {LogInterp::linear, LogInterp::quadratic}) {
        IHistory h = sampled([](double) { return 0.4; }, 3.0, 0.05, li);
        for (double s : {0.0, 0.7, 1.55, 2.96}) {
            VZ vz = v_and_z(h, p, t, s, 1.3);
            EXPECT_NEAR(vz.v, 1.0, 1e-15);
            EXPECT_NEAR(vz.z, yp(p, t, s, 1.3), 1e-12 * yp(p, t, s, 1.3));
        }
        VZ end = v_and_z(h, p, t, t, 1.3);
        EXPECT_DOUBLE_EQ(end.v, 1.0);
        EXPECT_DOUBLE_EQ(end.z, 1.3);
        EXPECT_THROW(v_and_z(h, p, 2.0, 2.5, 1.0), DomainError);
        EXPECT_THROW(v_and_z(h, p, 2.0, 1.0, 0.0), DomainError);
    }
}

TEST(VandZ, ReproducesPDECharacteristic) {
    pde::Model m = log_model();
    pde::LagrangianState st(m, xi_pprime(m, 1.0));
    for (int k = 0; k < 100; ++k) pde::step(st, 0.02);
    IHistory h = IHistory::from_rho(st.history(), st.records().front().I, m.p);
    const double t = st.t();
    for (double s : {0.0, 0.31, 1.0, 1.77})
        for (double y : {0.01, 1.0, 40.0}) {
            VZ vz = v_and_z(h, m.p, t, s, y);
            double ref = pde::characteristic(st.history(), t, y, s);
            EXPECT_NEAR(vz.z / vz.v, ref, 1e-8 * ref) << "s=" << s << " y=" << y;
            EXPECT_GE(vz.z, std::exp((t - s) / m.p) * y);
            EXPECT_GT(vz.v, 0.0);
        }
}

TEST(Functionals, UnitPathClosedForm) {
    pde::Model m = log_model();
    IHistory h = sampled([](double) { return 0.25; }, 4.0, 0.01);
    for (double t : {0.5, 2.0, 4.0})
        for (double y : {0.2, 1.0, 10.0})
            EXPECT_NEAR(F_eval(m, h, t, y), F_unit(m, t, y), 1e-9) << t << ' ' << y;
    EXPECT_DOUBLE_EQ(F_eval(m, h, 0.0, 1.0), 0.0);
    EXPECT_NEAR(F_unit(m, 0.0, 1.0), 0.0, 1e-15);
}

TEST(Functionals, SplitOfBXiAgainstPDE) {
    pde::Model m = log_model();
    Profile xi0 = xi_pprime(m, 3.0);
    pde::LagrangianState st(m, xi0);
    for (int k = 0; k < 150; ++k) pde::step(st, 0.02);
    IHistory h = IHistory::from_rho(st.history(), st.records().front().I, m.p);
    const double p = m.p;
    for (double t : {1.0, 3.0})
        for (double y : {1.0, 3.0, 25.0}) {
            Jet j = st.xi_eval(y, t);
            double Bxi = j.v / p - (1.0 + y / p) * j.d1;
            double initial = G_eval(m, h, t, y, xi0) +
                             std::exp(-t / p) * m.source.eval(yp(p, t, 0.0, y), 0);
            double split = initial + F_eval(m, h, t, y);
            EXPECT_NEAR(split, Bxi, 1e-7) << t << ' ' << y;
            // B xi - B xi_p = F(v) - F(1) + G
            double rhs = F_eval(m, h, t, y) - F_unit(m, t, y) + G_eval(m, h, t, y, xi0);
            EXPECT_NEAR(rhs, Bxi - m.source.eval(y, 0), 1e-7);
        }
}

TEST(Functionals, GVanishesAtEquilibrium) {
    pde::Model m = log_model();
    Equilibrium eq(m.source, m.p, true);
    IHistory h = sampled([](double) { return 1.0; }, 5.0, 0.1);
    for (double t : {0.0, 1.0, 5.0})
        for (double y : {0.1, 1.0, 30.0})
            EXPECT_NEAR(G_eval(m, h, t, y, eq.profile()), 0.0, 1e-9);
}

TEST(Gradient, MatchesFiniteDifferences) {
    pde::Model m = log_model();
    const double p = m.p, dt = 0.01, T = 4.0, eps = 1e-6;
    auto I = [](double s) { return 0.25 * (1.0 + 0.3 * std::sin(1.3 * s) * std::exp(-0.3 * s)); };
    IHistory base = sampled(I, T, dt);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ut(1.0, T), uy(0.0, 1.0), uf(0.05, 0.95);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        long nt = std::lround(ut(rng) / dt);
        double t = nt * dt;
        long k = std::max<long>(1, std::lround(uf(rng) * nt));
        double tau = k * dt;
        double y = std::exp(std::log(0.05) + uy(rng) * std::log(2000.0));
        double vk = base.v(p, t, tau);
        // raise v_t(tau) by +/- eps through log I at node k
        auto shifted = [&](double e) {
            IHistory h(base.I(0), 0.0, LogInterp::linear);
            for (size_t j = 1; j < base.size(); ++j) {
                double Ij = base.I(j);
                if (long(j) == k) Ij *= std::pow(1.0 + e / vk, p);
                h.push(base.t(j), Ij);
            }
            return F_eval(m, h, t, y);
        };
        // log-linear hat: dv = e v(s)/v_k hat(s), mass dt to second order
        double fd = (shifted(eps) - shifted(-eps)) / (2 * eps * dt);
        double an = dF_gradient(m, base, t, y, tau);
        double rel = std::abs(fd - an) / std::abs(an);
        worst = std::max(worst, rel);
        EXPECT_LT(rel, 1e-4) << "t=" << t << " tau=" << tau << " y=" << y << " dF=" << an;
    }
    RecordProperty("worst_rel", std::to_string(worst));
}

TEST(Gradient, UnitPathMatchesLinearCoefficient) {
    pde::Model m = log_model();
    linstab::LinearKernel lk(m);
    const Equilibrium& eq = lk.equilibrium();
    const double p = m.p, t = 3.0;
    IHistory h = sampled([](double) { return 1.0; }, t, 0.01);
    double min_dF = 1.0;
    for (double tau : {0.2, 1.0, 2.0, 2.9})
        for (double y : {1.0, 2.0, 10.0, 100.0}) {
            double dF = dF_gradient(m, h, t, y, tau);
            double y0 = yp(p, t, 0.0, y);
            Jet hj = m.source.jet(y0);
            double bracket = hj.d1 - hj.v / (p + y0) + eq.P(y0) / p;
            double ref = std::exp(-(t - tau) / p) *
                         (lk.B2A(linstab::semigroup_point(p, t - tau, y)) - bracket);
            EXPECT_NEAR(dF, ref, 1e-8 * std::max(1.0, std::abs(ref))) << tau << ' ' << y;
            min_dF = std::min(min_dF, dF);
        }
    EXPECT_GE(min_dF, -1e-10);
}

TEST(Gradient, NonnegativeOnUnitPathGrid) {
    pde::Model m = log_model();
    const double t = 4.0, dt = 0.05;
    IHistory h = sampled([](double) { return 1.0; }, t, dt);
    for (long k = 1; k < 80; ++k)
        for (double y : {1.0, 5.0, 50.0}) EXPECT_GE(dF_gradient(m, h, t, y, k * dt), -1e-10);
}

TEST(Gradient, ConstantSourceKeepsOnlyDirectTerm) {
    pde::Model m = const_model();
    IHistory h = sampled([](double) { return 1.0; }, 3.0, 0.05);
    for (double tau : {0.5, 2.5})
        EXPECT_NEAR(dF_gradient(m, h, 3.0, 2.0, tau), std::exp(-(3.0 - tau) / 2.0) / 2.0, 1e-14);
    EXPECT_THROW(dF_gradient(m, h, 3.0, 2.0, 3.0), DomainError);
    EXPECT_THROW(dF_gradient(m, h, 3.0, 2.0, 0.0), DomainError);
}

TEST(DDERun, EquilibriumStaysConstant) {
    pde::Model m = log_model();
    Equilibrium eq(m.source, m.p, true);
    pde::RunConfig cfg;
    cfg.T = 10 * m.p;
    cfg.dt = 0.05;
    cfg.stride = 20;
    cfg.monitors = false;
    Options o;
    o.nodes_per_interval = 3;
    DDETrajectory d = dde_run(m, eq.profile(), cfg, o);
    for (double I : d.traj.I) EXPECT_NEAR(I / d.traj.I.front(), 1.0, 1e-8);
}

TEST(DDERun, MatchesPDEFarFromEquilibrium) {
    pde::Model m = log_model();
    pde::RunConfig cfg;
    cfg.dt = m.p / 200;
    cfg.stride = 10;
    cfg.monitors = false;
    for (double pp : {1.0, 3.0, 4.0}) {
        cfg.T = (pp == 3.0 ? 10.0 : 2.0) * m.p;
        Profile xi0 = xi_pprime(m, pp);
        Trajectory P = pde::run(m, xi0, cfg);
        DDETrajectory D = dde_run(m, xi0, cfg);
        ASSERT_EQ(P.t.size(), D.traj.t.size());
        double gap = 0.0;
        for (size_t k = 0; k < P.t.size(); ++k) gap = std::max(gap, std::abs(P.I[k] / D.traj.I[k] - 1));
        EXPECT_LT(gap, 1e-6) << "p'=" << pp;
    }
}

TEST(DDERun, LogDerivativeIntegrableAndStable) {
    pde::Model m = log_model();
    pde::RunConfig cfg;
    cfg.dt = 0.05;
    cfg.stride = 20;
    cfg.monitors = false;
    cfg.T = 10 * m.p;
    double a = dde_run(m, xi_pprime(m, 3.0), cfg).traj.summary.at("log_derivative_l1");
    cfg.T = 20 * m.p;
    double b = dde_run(m, xi_pprime(m, 3.0), cfg).traj.summary.at("log_derivative_l1");
    EXPECT_TRUE(std::isfinite(b));
    EXPECT_GT(a, 0.0);
    EXPECT_LT(std::abs(b - a), 1e-4 * a);
}

TEST(DDERun, SmallPerturbationDecayRate) {
    pde::Model m = log_model();
    Equilibrium eq(m.source, m.p, true);
    Profile xi0 = perturbed(m, 2.5e-3);
    Profile diff;
    diff.eval = [&](double y) {
        Jet a = xi0(y);
        EquilibriumPoint e = eq.at(y);
        return Jet{a.v - e.xi, a.d1 - e.dxi, a.d2 - e.d2xi};
    };
    ASSERT_LE(weighted_norm(diff, 1, {1e-4, 1e4, 200}), 1e-2);
    pde::RunConfig cfg;
    cfg.T = 10 * m.p;
    cfg.dt = 0.02;
    cfg.stride = 10;
    cfg.monitors = false;
    DDETrajectory d = dde_run(m, xi0, cfg);
    std::vector<double> t, v;
    for (size_t k = 0; k < d.traj.t.size(); ++k)
        if (d.traj.t[k] > 0.0) {
            t.push_back(d.traj.t[k]);
            v.push_back(std::abs(d.dlogIdt[k]));
        }
    RateFit fit = fit_rate(t, v, 0.5);
    EXPECT_GE(fit.rate, 1.0 / (1.2 * m.p));
    EXPECT_GT(fit.r2, 0.99);
}

TEST(DDERun, GlobalConvergenceFromDistantData) {
    pde::Model m = log_model();
    pde::RunConfig cfg;
    cfg.T = 30 * m.p;
    cfg.dt = 0.05;
    cfg.stride = 5;
    cfg.monitors = false;
    for (double pp : {1.0, 4.0}) {
        DDETrajectory d = dde_run(m, xi_pprime(m, pp), cfg);
        double lo = 1e300, hi = -1e300;
        for (size_t k = 0; k < d.traj.t.size(); ++k)
            if (d.traj.t[k] >= 0.9 * cfg.T) {
                lo = std::min(lo, d.traj.I[k]);
                hi = std::max(hi, d.traj.I[k]);
            }
        EXPECT_LT(hi - lo, 1e-5) << "p'=" << pp;
        EXPECT_GT(lo, 0.0);
    }
}

TEST(DDERun, CsvColumns) {
    pde::Model m = log_model();
    pde::RunConfig cfg;
    cfg.T = 0.2;
    cfg.dt = 0.05;
    cfg.stride = 1;
    cfg.monitors = true;
    DDETrajectory d = dde_run(m, xi_pprime(m, 3.0), cfg);
    std::string csv = d.csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,I,dlogIdt,f,g");
    EXPECT_EQ(d.traj.size(), 5u);
    EXPECT_EQ(d.traj.dist1inf.size(), 5u);
    // f vanishes on the unit path at t = 0
    EXPECT_DOUBLE_EQ(d.f.front(), 0.0);
}

TEST(ConstantSourceODE, EquilibriumClosedForm) {
    pde::Model m = const_model();
    // xi_p = p h_inf for a constant source
    OdeRun r = const_h_ode(m, constant_profile(m.p), 10.0, 0.01, 10);
    for (size_t k = 0; k < r.t.size(); ++k) {
        double e = std::exp(-r.t[k] / m.p);
        EXPECT_NEAR(r.I1[k], 1.0, 1e-10);
        EXPECT_NEAR(r.I2[k], 1.0 - e, 1e-10);
        EXPECT_NEAR(r.J[k], e, 1e-10);
    }
}

TEST(ConstantSourceODE, BetaBoundsEnvelopeAndPDE) {
    pde::Model m = const_model();
    Profile xi0 = perturbed(m, 0.5);
    const double T = 6.0, dt = 0.01;
    OdeRun r = const_h_ode(m, xi0, T, dt, 10);
    EXPECT_GE(r.min_beta, 0.0);
    for (size_t k = 0; k < r.t.size(); ++k)
        EXPECT_LE(r.beta[k], r.C1 * std::exp(-r.t[k] / m.p) * (1 + 1e-12));
    EXPECT_LE(r.envelope_excess, 1e-12);
    EXPECT_LT(r.i2_residual, 1e-5);
    pde::RunConfig cfg;
    cfg.T = T;
    cfg.dt = dt;
    cfg.stride = 10;
    cfg.monitors = false;
    Trajectory P = pde::run(m, xi0, cfg);
    ASSERT_EQ(P.t.size(), r.t.size());
    double gap = 0.0;
    for (size_t k = 0; k < P.t.size(); ++k) gap = std::max(gap, std::abs(r.I(k) / P.I[k] - 1));
    EXPECT_LT(gap, 1e-5);
    EXPECT_THROW(const_h_ode(log_model(), xi0, 1.0, 0.1), DomainError);
}
