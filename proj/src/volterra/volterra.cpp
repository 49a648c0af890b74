#include "nlt/volterra/volterra.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nlt/core/errors.hpp"
#include "nlt/core/quadrature.hpp"
#include "nlt/core/trajectory.hpp"

namespace nlt::volterra {

VolterraProblem VolterraProblem::invariant(std::function<double(double)> k,
                                           std::function<double(double)> g, double T, double dt) {
    VolterraProblem p;
    p.Kdiff = std::move(k);
    p.translation_invariant = true;
    p.g = std::move(g);
    p.T = T;
    p.dt = dt;
    return p;
}

VolterraProblem VolterraProblem::general(std::function<double(double, double)> k,
                                         std::function<double(double)> g, double T, double dt) {
    VolterraProblem p;
    p.K = std::move(k);
    p.g = std::move(g);
    p.T = T;
    p.dt = dt;
    return p;
}

size_t VolterraProblem::steps() const {
    if (!(dt > 0.0) || !(T > 0.0)) throw DomainError("volterra: T and dt must be positive");
    return static_cast<size_t>(std::lround(T / dt));
}

std::string Series::csv(const std::string& name) const {
    std::ostringstream os;
    os << "t," << name << '\n';
    for (size_t i = 0; i < t.size(); ++i) os << format_double(t[i]) << ',' << format_double(v[i]) << '\n';
    return os.str();
}

namespace {

void check_pivot(double piv, double t) {
    if (std::abs(piv) < 1e-12)
        throw NumericError("volterra: singular step, 1 + dt K(t,t)/2 ~ 0 at t = " + std::to_string(t));
}

// Product trapezoid with kernel rows supplied by fill(n, row) for row[0..n].
template <class Fill>
std::vector<double> trapezoid_rows(size_t N, double dt, const std::vector<double>& g, Fill fill) {
    std::vector<double> u(N + 1), row;
    u[0] = g[0];
    for (size_t n = 1; n <= N; ++n) {
        row.resize(n + 1);
        fill(n, row);
        double s = 0.5 * row[0] * u[0];
        for (size_t j = 1; j < n; ++j) s += row[j] * u[j];
        double piv = 1.0 + 0.5 * dt * row[n];
        check_pivot(piv, dt * n);
        u[n] = (g[n] - dt * s) / piv;
    }
    return u;
}

std::vector<double> sample(const std::function<double(double)>& f, size_t N, double dt) {
    std::vector<double> v(N + 1);
    for (size_t n = 0; n <= N; ++n) v[n] = f(dt * n);
    return v;
}

}  // namespace

Series solve(const VolterraProblem& prob) {
    const size_t N = prob.steps();
    const double dt = prob.dt;
    std::vector<double> g = sample(prob.g, N, dt);
    Series out;
    out.t.resize(N + 1);
    for (size_t n = 0; n <= N; ++n) out.t[n] = dt * n;
    if (prob.translation_invariant) {
        std::vector<double> Kd = sample(prob.Kdiff, N, dt);
        out.v = trapezoid_rows(N, dt, g, [&](size_t n, std::vector<double>& row) {
            for (size_t j = 0; j <= n; ++j) row[j] = Kd[n - j];
        });
    } else {
        out.v = trapezoid_rows(N, dt, g, [&](size_t n, std::vector<double>& row) {
            double t = dt * n;
            for (size_t j = 0; j <= n; ++j) row[j] = prob.K(t, dt * j);
        });
    }
    return out;
}

Resolvent resolvent(const VolterraProblem& prob) {
    const size_t N = prob.steps();
    const double dt = prob.dt;
    Resolvent r;
    r.dt = dt;
    if (prob.translation_invariant) {
        r.invariant = true;
        std::vector<double> Kd = sample(prob.Kdiff, N, dt);
        r.diff.resize(N + 1);
        r.diff[0] = Kd[0];
        double piv = 1.0 + 0.5 * dt * Kd[0];
        check_pivot(piv, 0.0);
        for (size_t n = 1; n <= N; ++n) {
            double s = 0.5 * Kd[n] * r.diff[0];
            for (size_t j = 1; j < n; ++j) s += Kd[n - j] * r.diff[j];
            r.diff[n] = (Kd[n] - dt * s) / piv;
        }
        return r;
    }
    r.rows.resize(N + 1);
    std::vector<double> row, acc;
    r.rows[0] = {prob.K(0.0, 0.0)};
    for (size_t n = 1; n <= N; ++n) {
        double t = dt * n;
        row.resize(n + 1);
        for (size_t j = 0; j <= n; ++j) row[j] = prob.K(t, dt * j);
        double piv = 1.0 + 0.5 * dt * row[n];
        check_pivot(piv, t);
        acc.assign(n, 0.0);
        // acc[j] = sum_{sigma=j+1}^{n-1} K(t_n, s_sigma) r(s_sigma, s_j)
        for (size_t sg = 1; sg < n; ++sg) {
            const double k = row[sg];
            const std::vector<double>& rs = r.rows[sg];
            for (size_t j = 0; j < sg; ++j) acc[j] += k * rs[j];
        }
        std::vector<double>& rn = r.rows[n];
        rn.resize(n + 1);
        for (size_t j = 0; j < n; ++j) {
            double s = 0.5 * row[j] * r.rows[j][j] + acc[j];
            rn[j] = (row[j] - dt * s) / piv;
        }
        rn[n] = row[n];
    }
    return r;
}

Reconstruction reconstruct(const VolterraProblem& prob, const Resolvent& r) {
    const size_t N = prob.steps();
    const double dt = prob.dt;
    std::vector<double> g = sample(prob.g, N, dt);
    Series ref = solve(prob);
    Reconstruction out;
    out.u.t = ref.t;
    out.u.v.resize(N + 1);
    out.u.v[0] = g[0];
    for (size_t n = 1; n <= N; ++n) {
        double h0 = 0.5 * dt * r(0, 0);
        double hn = 0.5 * dt * r(n, n);
        double s = 0.5 * r(n, 0) * g[0] / (1.0 - h0);
        double sp = 0.5 * r(n, 0) * g[0];
        for (size_t j = 1; j < n; ++j) {
            double hj = 0.5 * dt * r(j, j);
            s += r(n, j) * g[j] / (1.0 - hj * hj);
            sp += r(n, j) * g[j];
        }
        s += 0.5 * r(n, n) * g[n] / (1.0 + hn);
        sp += 0.5 * r(n, n) * g[n];
        out.u.v[n] = g[n] - dt * s;
        out.residual = std::max(out.residual, std::abs(out.u.v[n] - ref.v[n]));
        out.plain_residual = std::max(out.plain_residual, std::abs(g[n] - dt * sp - ref.v[n]));
    }
    return out;
}

std::vector<double> resolvent_l1(const Resolvent& r) {
    const size_t N = r.size() - 1;
    std::vector<double> out(N + 1, 0.0);
    double sup = 0.0;
    for (size_t n = 1; n <= N; ++n) {
        double s = 0.5 * (std::abs(r(n, 0)) + std::abs(r(n, n)));
        for (size_t j = 1; j < n; ++j) s += std::abs(r(n, j));
        sup = std::max(sup, r.dt * s);
        out[n] = sup;
    }
    return out;
}

GripenbergReport gripenberg_check(const VolterraProblem& prob, const std::vector<double>& T0_scan) {
    GripenbergReport rep;
    const size_t N = prob.steps();
    const double dt = prob.dt;
    // w(t) and sign / monotonicity on a subsampled grid
    const size_t stride = std::max<size_t>(1, N / 400);
    rep.w.assign(N + 1, 0.0);
    for (size_t n = 1; n <= N; ++n) {
        double t = dt * n;
        double s = 0.5 * (prob.kernel(t, 0.0) + prob.kernel(t, t));
        for (size_t j = 1; j < n; ++j) s += prob.kernel(t, dt * j);
        rep.w[n] = dt * s;
    }
    for (size_t j = 0; j <= N; j += stride) {
        double s = dt * j, prev = prob.kernel(s, s);
        if (prev < 0.0) rep.nonnegative = false;
        for (size_t n = j + 1; n <= N; n += 1) {
            double k = prob.kernel(dt * n, s);
            if (k < 0.0) rep.nonnegative = false;
            if (k > prev + 1e-14 * std::max(1.0, std::abs(prev))) rep.decreasing_in_t = false;
            prev = k;
        }
    }
    size_t n90 = static_cast<size_t>(0.9 * N);
    rep.w_drift = std::abs(rep.w[N] - rep.w[n90]);
    rep.T0_scan = T0_scan;
    rep.tail_condition = false;
    for (double T0 : T0_scan) {
        double sup = 0.0;
        for (size_t n = 0; n <= N; n += stride) {
            double t = dt * n, upper = std::max(t - T0, 0.0);
            if (upper <= 0.0) continue;
            int panels = std::max(1, static_cast<int>(std::ceil(upper)));
            double m = 0.0, h = upper / panels;
            for (int q = 0; q < panels; ++q)
                m += gauss_integrate([&](double s) { return prob.kernel(t, s); }, q * h, (q + 1) * h, 8);
            sup = std::max(sup, m);
        }
        rep.tail_mass.push_back(sup);
        if (sup < 1.0) rep.tail_condition = true;
    }
    Resolvent r = resolvent(prob);
    rep.r_l1 = resolvent_l1(r);
    rep.r_l1_sup = rep.r_l1.back();
    if (!rep.nonnegative) rep.flags.push_back("kernel takes negative values");
    if (!rep.decreasing_in_t) rep.flags.push_back("t -> K(t,s) is not decreasing");
    if (rep.w_drift > 1e-3 * std::max(1.0, std::abs(rep.w[N])))
        rep.flags.push_back("w(t) has not settled on [0.9T, T]");
    if (!rep.tail_condition) rep.flags.push_back("tail mass >= 1 for every scanned T0");
    return rep;
}

LinearDDEReport linear_dde_solve(const LinearDDEProblem& prob, double T, double dt,
                                 bool volterra_route, bool monitors) {
    if (!(T > 0.0) || !(dt > 0.0)) throw DomainError("linear dde: T and dt must be positive");
    const size_t N = static_cast<size_t>(std::lround(T / dt));
    LinearDDEReport rep;
    std::vector<double> a = sample(prob.a, N, dt), f = sample(prob.f, N, dt);
    std::vector<double> I(N + 1), row;
    I[0] = prob.I0;
    // F_n = f_n - (a_n + b_n) I_n + M_n, b_n = trapezoid of k(t_n, .), M_n = trapezoid of k I
    auto memory = [&](size_t n, double& b, double& M) {
        b = M = 0.0;
        if (n == 0) return;
        double t = dt * n;
        row.resize(n + 1);
        for (size_t j = 0; j <= n; ++j) row[j] = prob.k(t, dt * j);
        b = 0.5 * (row[0] + row[n]);
        M = 0.5 * row[0] * I[0];
        for (size_t j = 1; j < n; ++j) {
            b += row[j];
            M += row[j] * I[j];
        }
        b *= dt;
        M *= dt;
        // the s = t_n end carries k(t_n,t_n) I_n / 2, moved to the left side
    };
    double b0, M0;
    memory(0, b0, M0);
    double Fprev = f[0] - a[0] * I[0];
    for (size_t n = 0; n < N; ++n) {
        double b, M;
        memory(n + 1, b, M);
        double tn1 = dt * (n + 1);
        double kd = 0.5 * dt * prob.k(tn1, tn1);
        // I_{n+1} (1 + dt/2 (a + b - kd)) = I_n + dt/2 (F_n + f + M)
        double c = a[n + 1] + b - kd;
        I[n + 1] = (I[n] + 0.5 * dt * (Fprev + f[n + 1] + M)) / (1.0 + 0.5 * dt * c);
        Fprev = f[n + 1] - c * I[n + 1] + M;
    }
    rep.I.t.resize(N + 1);
    for (size_t n = 0; n <= N; ++n) rep.I.t[n] = dt * n;
    rep.I.v = I;
    for (double v : I) rep.sup_abs = std::max(rep.sup_abs, std::abs(v));
    size_t n90 = static_cast<size_t>(std::floor(0.9 * N));
    double lo = I[n90], hi = I[n90];
    for (size_t n = n90; n <= N; ++n) {
        lo = std::min(lo, I[n]);
        hi = std::max(hi, I[n]);
    }
    rep.tail_oscillation = hi - lo;
    for (size_t n = 0; n < N; ++n)
        rep.a_minus_l1 += 0.5 * dt * (std::max(-a[n], 0.0) + std::max(-a[n + 1], 0.0));

    rep.volterra_route = volterra_route;
    if (volterra_route) {
        // u = I', K(t,s) = a(t) + int_0^s k(t,s') ds', g = f - a I0
        std::vector<double> g(N + 1);
        for (size_t n = 0; n <= N; ++n) g[n] = f[n] - a[n] * prob.I0;
        std::vector<double> u = trapezoid_rows(N, dt, g, [&](size_t n, std::vector<double>& r) {
            double t = dt * n, cum = 0.0, prev = prob.k(t, 0.0);
            r[0] = a[n];
            for (size_t j = 1; j <= n; ++j) {
                double kj = prob.k(t, dt * j);
                cum += 0.5 * dt * (prev + kj);
                prev = kj;
                r[j] = a[n] + cum;
            }
        });
        rep.I_volterra.t = rep.I.t;
        rep.I_volterra.v.resize(N + 1);
        rep.I_volterra.v[0] = prob.I0;
        for (size_t n = 0; n < N; ++n)
            rep.I_volterra.v[n + 1] = rep.I_volterra.v[n] + 0.5 * dt * (u[n] + u[n + 1]);
        for (size_t n = 0; n <= N; ++n)
            rep.route_gap = std::max(rep.route_gap, std::abs(rep.I_volterra.v[n] - I[n]));
    }

    if (!monitors) return rep;
    // hypothesis monitors on [0, 10T] truncations
    const double Tinf = 10.0 * T;
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    auto column = [&](double s) {
        return GK::integrate([&](double t) { return prob.k(t, s); }, s, Tinf, 15, 1e-10);
    };
    for (int i = 0; i <= 50; ++i) {
        double s = T * i / 50.0;
        rep.sup_column_mass = std::max(rep.sup_column_mass, column(s));
        rep.truncation_tail = std::max(
            rep.truncation_tail,
            GK::integrate([&](double t) { return prob.k(t, s); }, Tinf, 2.0 * Tinf, 15, 1e-10));
    }
    rep.gamma_scan = {0.1 * T, 0.2 * T, 0.4 * T, 0.8 * T};
    for (double gam : rep.gamma_scan) {
        double sup = 0.0;
        for (int i = 1; i <= 40; ++i) {
            double Tp = T * i / 40.0;
            double upper = Tp - gam;
            if (upper <= 0.0) continue;
            double m = gauss_integrate(
                [&](double s) {
                    return GK::integrate([&](double t) { return prob.k(t, s); }, Tp, Tinf, 15, 1e-10);
                },
                0.0, upper, 16);
            sup = std::max(sup, m);
        }
        rep.window_mass.push_back(sup);
    }
    return rep;
}

BoundConstants measure_bound_constants(const std::vector<LinearDDEProblem>& family, double T,
                                       double dt) {
    BoundConstants c;
    for (const LinearDDEProblem& base : family) {
        LinearDDEProblem p1 = base;
        p1.I0 = 1.0;
        p1.f = [](double) { return 0.0; };
        LinearDDEReport r1 = linear_dde_solve(p1, T, dt, false, false);
        c.C1 = std::max(c.C1, r1.sup_abs);
        LinearDDEProblem p2 = base;
        p2.I0 = 0.0;
        double l1 = 0.0;
        const size_t N = static_cast<size_t>(std::lround(T / dt));
        for (size_t n = 0; n < N; ++n)
            l1 += 0.5 * dt * (std::abs(base.f(dt * n)) + std::abs(base.f(dt * (n + 1))));
        if (l1 <= 0.0) continue;
        LinearDDEReport r2 = linear_dde_solve(p2, T, dt, false, false);
        c.C2 = std::max(c.C2, r2.sup_abs / l1);
    }
    return c;
}

std::vector<double> running_l1(const Series& u) {
    std::vector<double> out(u.v.size(), 0.0);
    for (size_t n = 1; n < u.v.size(); ++n)
        out[n] = out[n - 1] + 0.5 * (u.t[n] - u.t[n - 1]) * (std::abs(u.v[n]) + std::abs(u.v[n - 1]));
    return out;
}

}  // namespace nlt::volterra
