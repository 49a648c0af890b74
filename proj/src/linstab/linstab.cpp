#include "nlt/linstab/linstab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nlt/core/errors.hpp"
#include "nlt/core/quadrature.hpp"
#include "nlt/core/trajectory.hpp"

namespace nlt::linstab {

double semigroup(const Profile& z, double p, double t, double y) {
    if (t < 0.0) throw DomainError("semigroup: t must be nonnegative");
    return std::exp(-t / p) * z(semigroup_point(p, t, y)).v;
}

LinearKernel::LinearKernel(const pde::Model& model, int nodes)
    : model_(model), eq_(model.source, model.p, true) {
    FunctionalRule rule(model_.functional, nodes);
    y_ = rule.y;
    W_.resize(rule.size());
    double Axi_pair = 0.0;
    for (size_t i = 0; i < rule.size(); ++i) {
        EquilibriumPoint e = eq_.at(y_[i]);
        Ip_ += rule.w[i] * rule.integrand(i, e.xi);
        W_[i] = rule.w[i] * rule.gradient(i, e.xi);
        Axi_pair += W_[i] * e.Axi;
    }
    denom_ = p() * Ip_ + Axi_pair;
    if (!(denom_ > kDenFloor * p() * Ip_))
        throw ModelError("linearisation: p I(xi_p) + <dI(xi_p), A xi_p> is not positive");
    K0_ = K(0.0);
}

double LinearKernel::pair(const std::function<double(double)>& phi) const {
    double s = 0.0;
    for (size_t i = 0; i < y_.size(); ++i) s += W_[i] * phi(y_[i]);
    return s;
}

double LinearKernel::pair_evolved(const std::function<double(double)>& phi, double t) const {
    double s = 0.0;
    for (size_t i = 0; i < y_.size(); ++i) s += W_[i] * phi(semigroup_point(p(), t, y_[i]));
    return std::exp(-t / p()) * s;
}

double LinearKernel::BA(double y) const {
    return eq_.at(y).Axi / p() - y * model_.source.eval(y, 1);
}

double LinearKernel::B2A(double y) const {
    const SourceFn& h = model_.source;
    return BA(y) / p() + h.eval(y, 1) + (1.0 + y / p()) * y * h.eval(y, 2);
}

double LinearKernel::K(double t) const {
    return -pair_evolved([this](double y) { return BA(y); }, t) / denom_;
}

double LinearKernel::Kprime(double t) const {
    return pair_evolved([this](double y) { return B2A(y); }, t) / denom_;
}

double LinearKernel::monotone_margin(double t) const {
    const SourceFn& h = model_.source;
    return pair_evolved([&](double y) { return h.eval(y, 1) + (1.0 + y / p()) * y * h.eval(y, 2); }, t) /
           denom_;
}

double LinearKernel::g(const Profile& xi0, double t) const {
    return pair_evolved([&](double y) { return apply_AB(xi0(y), p(), y).B; }, t);
}

std::string KernelCertificate::csv() const {
    std::ostringstream os;
    os << "t,K,expK_monotone_margin\n";
    for (size_t i = 0; i < t.size(); ++i)
        os << format_double(t[i]) << ',' << format_double(K[i]) << ',' << format_double(margin[i]) << '\n';
    return os.str();
}

KernelCertificate certify_kernel(const LinearKernel& lk, double t_max, int n, double tol) {
    if (n < 2) throw DomainError("certify_kernel: need at least two grid points");
    KernelCertificate c;
    std::vector<double> E(n);
    c.t.resize(n);
    c.K.resize(n);
    c.margin.assign(n, 0.0);
    c.min_K = std::numeric_limits<double>::infinity();
    c.max_increase = -std::numeric_limits<double>::infinity();
    c.max_derivative_margin = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        double t = t_max * i / (n - 1);
        c.t[i] = t;
        c.K[i] = lk.K(t);
        E[i] = std::exp(t / lk.p()) * c.K[i];
        c.min_K = std::min(c.min_K, c.K[i]);
        c.max_derivative_margin = std::max(c.max_derivative_margin, lk.monotone_margin(t));
    }
    for (int i = 0; i + 1 < n; ++i) {
        c.margin[i] = E[i] - E[i + 1];
        c.max_increase = std::max(c.max_increase, E[i + 1] - E[i]);
    }
    c.margin[n - 1] = -std::exp(c.t[n - 1] / lk.p()) * lk.monotone_margin(c.t[n - 1]) * (c.t[1] - c.t[0]);
    c.positive = c.min_K > 0.0;
    c.nonincreasing = c.max_increase <= tol;
    return c;
}

LaplaceTransform::LaplaceTransform(const LinearKernel& lk, double tl_factor, double panel)
    : p_(lk.p()), TL_(tl_factor * lk.p()) {
    const GaussRule& gl = gauss_legendre(8);
    int panels = std::max(1, static_cast<int>(std::ceil(TL_ / panel)));
    double h = TL_ / panels;
    for (int k = 0; k < panels; ++k)
        for (size_t i = 0; i < gl.x.size(); ++i) {
            double t = k * h + 0.5 * h * (gl.x[i] + 1.0);
            t_.push_back(t);
            wK_.push_back(0.5 * h * gl.w[i] * lk.K(t));
        }
    KTL_ = lk.K(TL_);
}

std::complex<double> LaplaceTransform::operator()(std::complex<double> z) const {
    std::complex<double> s = 0.0;
    for (size_t i = 0; i < t_.size(); ++i) s += wK_[i] * std::exp(-z * t_[i]);
    return s;
}

double LaplaceTransform::tail_bound(std::complex<double> z) const {
    double x = z.real();
    if (!(x > -1.0 / p_)) throw DomainError("laplace: tail bound needs Re z > -1/p");
    return std::abs(KTL_) * std::exp(-x * TL_) / (1.0 / p_ + x);
}

LaplaceReport laplace_condition(const LinearKernel& lk, double re_left, double re_right, double im_max,
                                size_t n) {
    if (!(re_left > -1.0 / lk.p())) throw DomainError("laplace_condition: left edge must exceed -1/p");
    if (!(re_right > re_left) || !(im_max > 0.0)) throw DomainError("laplace_condition: empty rectangle");
    LaplaceTransform Kh(lk);
    LaplaceReport rep;
    rep.re_left = re_left;
    rep.re_right = re_right;
    rep.im_max = im_max;
    const double w = re_right - re_left, hgt = 2.0 * im_max, perim = 2.0 * (w + hgt);
    // counterclockwise from the lower left corner
    auto point = [&](double s) -> std::complex<double> {
        if (s < w) return {re_left + s, -im_max};
        s -= w;
        if (s < hgt) return {re_right, -im_max + s};
        s -= hgt;
        if (s < w) return {re_right - s, im_max};
        s -= w;
        return {re_left, im_max - s};
    };
    constexpr size_t kCap = size_t(1) << 16;
    for (size_t m = std::max<size_t>(n, 8);; m *= 2) {
        std::vector<std::complex<double>> v(m);
        double tail = 0.0;
        for (size_t k = 0; k < m; ++k) {
            std::complex<double> z = point(perim * static_cast<double>(k) / static_cast<double>(m));
            v[k] = 1.0 + Kh(z);
            tail = std::max(tail, Kh.tail_bound(z));
        }
        double total = 0.0, worst = 0.0, mn = std::numeric_limits<double>::infinity();
        for (size_t k = 0; k < m; ++k) {
            double d = std::arg(v[(k + 1) % m] / v[k]);
            total += d;
            worst = std::max(worst, std::abs(d));
            mn = std::min(mn, std::abs(v[k]));
        }
        if (worst < 0.5 * std::numbers::pi || 2 * m > kCap) {
            rep.samples = m;
            rep.min_abs = mn;
            rep.max_tail = tail;
            rep.winding = static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
            rep.conclusive = worst < 0.5 * std::numbers::pi && tail < 0.5 * mn;
            if (!rep.conclusive)
                rep.status = "inconclusive";
            else
                rep.status = rep.winding == 0 ? "holds" : "violated";
            return rep;
        }
    }
}

Jet LinearEvolution::xi(size_t n, double y) const {
    if (!lk || n >= u.v.size()) throw DomainError("linear evolution: time index out of range");
    const double p = lk->p(), t = dt * static_cast<double>(n);
    Jet j0 = xi0(semigroup_point(p, t, y));
    double v = std::exp(-t / p) * j0.v, d = j0.d1;
    double sv = 0.0, sd = 0.0;
    for (size_t k = 0; k <= n; ++k) {
        double w = (k == 0 || k == n) ? 0.5 : 1.0;
        if (n == 0) w = 0.0;
        double tau = t - dt * static_cast<double>(k);
        EquilibriumPoint e = lk->equilibrium().at(semigroup_point(p, tau, y));
        sv += w * u.v[k] * std::exp(-tau / p) * e.Axi;
        sd += w * u.v[k] * e.dAxi;
    }
    v += dt * sv / lk->denom();
    d += dt * sd / lk->denom();
    return {v, d, std::numeric_limits<double>::quiet_NaN()};
}

double LinearEvolution::I(size_t n) const { return lk->Ip() * (1.0 + lk->p() * I_tilde.v.at(n)); }

LinearEvolution linear_evolve(const LinearKernel& lk, const Profile& xi0, double T, double dt, int stride,
                              const LogGrid& grid) {
    if (stride < 1) throw DomainError("linear_evolve: stride must be positive");
    LinearEvolution ev;
    ev.lk = &lk;
    ev.xi0 = xi0;
    ev.dt = dt;
    auto prob = volterra::VolterraProblem::invariant([&lk](double t) { return lk.K(t); },
                                                     [&](double t) { return lk.g(xi0, t); }, T, dt);
    ev.u = volterra::solve(prob);
    ev.I0_tilde = lk.pair([&](double y) { return xi0(y).v; }) / (lk.p() * lk.Ip());
    ev.I_tilde.t = ev.u.t;
    ev.I_tilde.v.assign(ev.u.v.size(), ev.I0_tilde);
    for (size_t n = 1; n < ev.u.v.size(); ++n)
        ev.I_tilde.v[n] = ev.I_tilde.v[n - 1] - 0.5 * dt * (ev.u.v[n] + ev.u.v[n - 1]) / lk.denom();
    std::vector<double> ys = grid.points();
    for (size_t n = 0; n < ev.u.v.size(); n += static_cast<size_t>(stride)) {
        double sup = 0.0;
        for (double y : ys) {
            Jet j = ev.xi(n, y);
            sup = std::max(sup, std::abs(j.v) + y * std::abs(j.d1));
        }
        ev.t_norm.push_back(ev.u.t[n]);
        ev.norm.push_back(sup);
    }
    bool nonzero = std::all_of(ev.norm.begin(), ev.norm.end(), [](double v) { return v > 0.0; });
    if (nonzero && ev.norm.size() >= 20) ev.fit = fit_rate(ev.t_norm, ev.norm, 0.5);
    return ev;
}


namespace {

Profile shifted(const Equilibrium& eq, const Profile& zeta) {
    Profile prof;
    prof.eval = [eq, zeta](double y) {
        EquilibriumPoint e = eq.at(y);
        Jet z = zeta(y);
        return Jet{e.xi + z.v, e.dxi + z.d1, e.d2xi + z.d2};
    };
    prof.descriptor = "perturbed equilibrium";
    return prof;
}

Profile difference(const Profile& a, const Profile& b) {
    Profile prof;
    prof.eval = [a, b](double y) {
        Jet x = a(y), z = b(y);
        return Jet{x.v - z.v, x.d1 - z.d1, x.d2 - z.d2};
    };
    return prof;
}

}  // namespace

LinearizationGap linearization_gap(const LinearKernel& lk, const Profile& zeta, double T, double dt, int stride,
                                   const LogGrid& grid, const pde::StepOptions& opt) {
    LinearizationGap gap;
    gap.amplitude = weighted_norm(zeta, 1, grid);
    LinearEvolution ev = linear_evolve(lk, zeta, T, dt, stride, grid);
    pde::LagrangianState st(lk.model(), shifted(lk.equilibrium(), zeta), opt);
    const size_t N = ev.u.v.size() - 1;
    std::vector<double> ys = grid.points();
    std::vector<double> xp;
    for (double y : ys) xp.push_back(lk.equilibrium().at(y).xi);
    for (size_t n = 0; n <= N; ++n) {
        if (n > 0) pde::step(st, dt);
        double Ipde = st.records().back().I;
        gap.I_rel_gap = std::max(gap.I_rel_gap, std::abs(Ipde / ev.I(n) - 1.0));
        if (n % static_cast<size_t>(stride) != 0) continue;
        for (size_t k = 0; k < ys.size(); ++k) {
            double d = st.xi_eval(ys[k], st.t()).v - xp[k] - ev.xi(n, ys[k]).v;
            gap.profile_gap = std::max(gap.profile_gap, std::abs(d));
        }
    }
    return gap;
}

Deltas perturbation_deltas(const LinearKernel& lk, const Profile& zeta) {
    const FunctionalSpec& F = lk.model().functional;
    const double p = lk.p();
    Profile full = shifted(lk.equilibrium(), zeta);
    Profile base = lk.equilibrium().profile();
    auto Bz = [&](double y) { return apply_AB(zeta(y), p, y).B; };
    double I = functional_I(F, full);
    double D = p * I + inner_dI(F, full, [&](double y) { return apply_AB(full(y), p, y).A; });
    if (!(D > kDenFloor * p * I)) throw ModelError("perturbed denominator below the positivity floor");
    double Ip = functional_I(F, base);
    double D0 = p * Ip + inner_dI(F, base, [&](double y) { return apply_AB(base(y), p, y).A; });
    double N = inner_dI(F, full, Bz);
    double N0 = inner_dI(F, base, Bz);
    return {-N / D, N * D0 / D - N0};
}

LipschitzReport lipschitz_ratios(const LinearKernel& lk, const std::vector<Profile>& family,
                                 const LogGrid& grid) {
    LipschitzReport r;
    std::vector<Deltas> d;
    std::vector<double> norms;
    for (const Profile& z : family) {
        d.push_back(perturbation_deltas(lk, z));
        norms.push_back(weighted_norm(z, 1, grid));
    }
    for (size_t i = 0; i < family.size(); ++i)
        for (size_t j = i + 1; j < family.size(); ++j) {
            double dn = weighted_norm(difference(family[i], family[j]), 1, grid);
            if (!(dn > 0.0)) continue;
            r.delta1 = std::max(r.delta1, std::abs(d[i].d1 - d[j].d1) / dn);
            double s = norms[i] + norms[j];
            if (s > 0.0) r.delta2 = std::max(r.delta2, std::abs(d[i].d2 - d[j].d2) / (s * dn));
            ++r.pairs;
        }
    return r;
}

namespace {

// h'(y0) - h(y0)/(p + y0) + int_{y0}^inf h/(p + y')^2
double tail_bracket(const LinearKernel& lk, double y0) {
    const SourceFn& h = lk.model().source;
    const double p = lk.p();
    return h.eval(y0, 1) - h.eval(y0, 0) / (p + y0) + lk.equilibrium().P(y0) / p;
}

}  // namespace

double coefficient_closed(const LinearKernel& lk, double t, double y) {
    const SourceFn& h = lk.model().source;
    const double p = lk.p();
    double y0 = semigroup_point(p, t, y);
    return lk.BA(y) + y * h.eval(y0, 1) + p * h.eval(y0, 0) / (p + y0) - lk.equilibrium().P(y0);
}

double coefficient_integrals(const LinearKernel& lk, double t, double y) {
    const SourceFn& h = lk.model().source;
    const double p = lk.p();
    auto yp = [&](double s) { return semigroup_point(p, t - s, y); };
    double out = std::exp(-t / p) * h.eval(yp(0.0), 0);
    if (t <= 0.0) return out;
    out += adaptive_integrate([&](double s) { return h.eval(yp(s), 0) * std::exp(-(t - s) / p); }, 0.0, t) / p;
    out -= y / p * adaptive_integrate([&](double s) { return h.eval(yp(s), 1); }, 0.0, t);
    out += (1.0 + y / p) * y *
           adaptive_integrate([&](double s) { return h.eval(yp(s), 2) * std::exp((t - s) / p); }, 0.0, t);
    return out;
}

DDECoefficients lin_dde_coeffs(const LinearKernel& lk, double t, double s) {
    if (!(s >= 0.0) || !(t >= s)) throw DomainError("lin_dde_coeffs: need 0 <= s <= t");
    const double p = lk.p();
    DDECoefficients c;
    c.M = -lk.pair([&](double y) { return coefficient_closed(lk, t, y); }) / lk.denom();
    const double tau = t - s;
    c.m = -lk.pair([&](double y) {
        double y0 = semigroup_point(p, t, y);
        return std::exp(-tau / p) * lk.B2A(semigroup_point(p, tau, y)) - std::exp(-tau / p) * tail_bracket(lk, y0);
    }) / lk.denom();
    return c;
}

DisplacementTerms displacement_terms(const LinearKernel& lk, double t, double s, double y) {
    const double p = lk.p();
    double y0 = semigroup_point(p, t, y);
    EquilibriumPoint e = lk.equilibrium().at(y0);
    double Bd = e.dxi / p + lk.model().source.eval(y0, 1);  // B applied to xi_p'
    DisplacementTerms d;
    d.alpha = y * Bd - (1.0 + y / p) * e.dxi;
    d.gamma = std::exp(-(t - s) / p) * Bd;
    d.delta = -std::exp(-t / p) * y0 * Bd + (1.0 + y / p) * e.dxi;
    return d;
}

LinearDDERun lin_dde_solve(const LinearKernel& lk, double I0_tilde, const Profile& xi0, double T, double dt) {
    if (!(T > 0.0) || !(dt > 0.0)) throw DomainError("lin_dde_solve: T and dt must be positive");
    const double p = lk.p();
    const size_t N = static_cast<size_t>(std::lround(T / dt));
    std::vector<double> K(N + 1), Kp(N + 1), beta(N + 1), M(N + 1), gB(N + 1), gh(N + 1);
    std::vector<double> dM(N + 1), dbeta(N + 1), dg(N + 1);
    for (size_t n = 0; n <= N; ++n) {
        double t = dt * n;
        K[n] = lk.K(t);
        Kp[n] = lk.Kprime(t);
        // m(t,s) = -K'(t-s) + e^{-(t-s)/p} beta(t)
        beta[n] = lk.pair_evolved([&](double y) { return tail_bracket(lk, y); }, t) * std::exp(t / p) / lk.denom();
        M[n] = lin_dde_coeffs(lk, t, t).M;
        gB[n] = lk.g(xi0, t);
        gh[n] = lk.pair_evolved([&](double y) { return lk.model().source.eval(y, 0); }, t);
        // gamma(t,s) = e^{-(t-s)/p} gamma(t,t)
        dM[n] = lk.pair([&](double y) { return displacement_terms(lk, t, t, y).alpha; }) / lk.denom();
        dbeta[n] = -lk.pair([&](double y) { return displacement_terms(lk, t, t, y).gamma; }) / lk.denom();
        dg[n] = -lk.pair([&](double y) { return displacement_terms(lk, t, t, y).delta; }) / lk.denom();
    }
    auto idx = [dt, N](double t) {
        long k = std::lround(t / dt);
        if (k < 0 || static_cast<size_t>(k) > N || std::abs(t - dt * k) > 1e-9 * std::max(1.0, t))
            throw DomainError("lin_dde_solve: off-grid coefficient request");
        return static_cast<size_t>(k);
    };
    auto coefficient_route = [&](bool complete) {
        auto m = [&](size_t n, size_t j) {
            double b = beta[n] + (complete ? dbeta[n] : 0.0);
            return -Kp[n - j] + std::exp(-dt * (n - j) / p) * b;
        };
        // a = M - int_0^t m ds so that a + int m = M
        std::vector<double> a(N + 1);
        for (size_t n = 0; n <= N; ++n) {
            double s = 0.0;
            if (n > 0) {
                s = 0.5 * (m(n, 0) + m(n, n));
                for (size_t j = 1; j < n; ++j) s += m(n, j);
                s *= dt;
            }
            a[n] = M[n] + (complete ? dM[n] : 0.0) - s;
        }
        volterra::LinearDDEProblem prob{[a, &idx](double t) { return a[idx(t)]; },
                                        [m, &idx](double t, double s) { return m(idx(t), idx(s)); },
                                        [&, complete](double t) {
                                            size_t n = idx(t);
                                            double g = -(gB[n] + I0_tilde * gh[n]) / lk.denom();
                                            return complete ? g + I0_tilde * dg[n] : g;
                                        },
                                        I0_tilde};
        return volterra::linear_dde_solve(prob, T, dt, false, false);
    };
    volterra::LinearDDEProblem kern{[&](double t) { return K[idx(t)]; },
                                    [&](double t, double s) { return -Kp[idx(t) - idx(s)]; },
                                    [&](double t) {
                                        size_t n = idx(t);
                                        return K[n] * I0_tilde - gB[n] / lk.denom();
                                    },
                                    I0_tilde};
    volterra::LinearDDEReport rc = coefficient_route(false);
    volterra::LinearDDEReport rf = coefficient_route(true);
    volterra::LinearDDEReport rk = volterra::linear_dde_solve(kern, T, dt, false, false);
    LinearDDERun run;
    run.I_coeff = rc.I;
    run.I_completed = rf.I;
    run.I_kernel = rk.I;
    run.sup_abs = rc.sup_abs;
    for (size_t n = 0; n <= N; ++n) {
        double gap = std::abs(rc.I.v[n] - rk.I.v[n]);
        run.weighted_gap = std::max(run.weighted_gap, std::exp(dt * n / (2.0 * p)) * gap);
        run.completed_gap = std::max(run.completed_gap, std::abs(rf.I.v[n] - rk.I.v[n]));
    }
    run.end_gap = std::abs(rc.I.v[N] - rk.I.v[N]);
    std::vector<double> tt, res;
    for (size_t n = 0; n <= N; ++n) {
        double r = std::abs(M[n] - lk.K0());
        if (r > 0.0) {
            tt.push_back(dt * n);
            res.push_back(r);
        }
    }
    if (tt.size() >= 20) run.M_residual_rate = fit_rate(tt, res, 0.5).rate;
    for (int i = 1; i <= 8; ++i)
        for (int j = 0; j <= i; ++j) {
            double t = T * i / 8.0, s = t * j / i;
            DDECoefficients c = lin_dde_coeffs(lk, t, s);
            run.m_residual =
                std::max(run.m_residual, std::abs(c.m + lk.Kprime(t - s)) * std::exp((2.0 * t - s) / p));
        }
    run.dI.resize(N + 1);
    for (size_t n = 0; n <= N; ++n) {
        const auto& v = rc.I.v;
        double d = n == 0 ? (v[1] - v[0]) / dt : n == N ? (v[N] - v[N - 1]) / dt : (v[n + 1] - v[n - 1]) / (2 * dt);
        run.dI[n] = std::abs(d);
    }
    bool positive = std::all_of(run.dI.begin() + N / 2, run.dI.end(), [](double v) { return v > 0.0; });
    if (positive && N >= 20) run.dI_fit = fit_rate(rc.I.t, run.dI, 0.5);
    return run;
}

}  // namespace nlt::linstab
