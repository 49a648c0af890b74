#include "nlt/control/control.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "json.hpp"
#include "nlt/core/errors.hpp"
#include "nlt/core/quadrature.hpp"
#include "nlt/dde/dde.hpp"

namespace nlt::control {

namespace {

constexpr int kBisect = 60;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// Weighted and unweighted payoff integrand at state x with control v.
double integrand(const ControlProblem& prob, double s, double x, double v) {
    if (v == 0.0) return is_weighted(prob.variant) ? 0.0 : prob.g.g_inf;
    double gz = prob.g.g(x / v);
    if (!is_weighted(prob.variant)) return gz;
    return gz * std::exp(-(prob.T - s) / prob.p) * v;
}

// x(s) from x(b) = xb under the control v(s') = vs + beta (s' - s) on [s, b].
double propagate(double p, double xb, double s, double b, double vs, double beta) {
    double L = b - s;
    double e = std::expm1(L / p);
    double out = xb * (1.0 + e) + vs * p * e;
    if (beta != 0.0) out += beta * p * (L * (1.0 + e) - p * e);
    return out;
}

double int_g_xp(const ControlProblem& prob, double a, double b, bool weighted) {
    if (!(b > a)) return 0.0;
    auto f = [&](double s) {
        double v = prob.g.g(prob.x_p(s));
        return weighted ? v * std::exp(-(prob.T - s) / prob.p) : v;
    };
    // g'' may jump where x_p crosses z_inf
    const double zi = prob.g.z_inf;
    if (std::isfinite(zi) && zi > 0.0) {
        double sc = prob.T - prob.p * std::log((zi + prob.p) / (prob.y + prob.p));
        if (sc > a && sc < b)
            return adaptive_integrate(f, a, sc, 1e-13, 15) + adaptive_integrate(f, sc, b, 1e-13, 15);
    }
    return adaptive_integrate(f, a, b, 1e-13, 15);
}

void need_dg(const Payoff& g, const char* who) {
    if (!g.dg) throw DomainError(std::string(who) + ": payoff derivative g' is required");
}

}  // namespace

std::string to_string(Variant v) {
    switch (v) {
        case Variant::max01: return "max01";
        case Variant::min1inf: return "min1inf";
        case Variant::max01w: return "max01w";
        case Variant::min1infw: return "min1infw";
    }
    return "?";
}

Variant parse_variant(const std::string& s) {
    for (Variant v : {Variant::max01, Variant::min1inf, Variant::max01w, Variant::min1infw})
        if (to_string(v) == s) return v;
    throw ConfigError("unknown control variant '" + s + "'");
}

// ---------------------------------------------------------------- payoff

Payoff Payoff::constant(double g0) {
    Payoff g;
    g.name = "constant(" + fmt(g0) + ")";
    g.g = [g0](double) { return g0; };
    g.dg = [](double) { return 0.0; };
    g.d2g = [](double) { return 0.0; };
    g.g_inf = g0;
    g.z_inf = 0.0;
    return g;
}

Payoff Payoff::from_source(const SourceFn& s, double scale, int order) {
    if (order != 0 && order != 1) throw DomainError("Payoff::from_source: order must be 0 or 1");
    Payoff g;
    g.name = fmt(scale) + (order == 0 ? " h" : " h'") + " of " + s.describe();
    g.g = [s, scale, order](double z) { return scale * s.eval(z, order); };
    g.dg = [s, scale, order](double z) { return scale * s.eval(z, order + 1); };
    if (order == 0) g.d2g = [s, scale](double z) { return scale * s.eval(z, 2); };
    g.g_inf = order == 0 ? scale * s.h_inf() : 0.0;
    if (s.is_constant())
        g.z_inf = 0.0;
    else if (s.kind() == SourceFn::Kind::kernel_inf || s.kind() == SourceFn::Kind::kernel_p)
        g.z_inf = s.kernel().support;
    return g;
}

Payoff source_payoff(Variant v, const SourceFn& s, double p, double y) {
    return is_weighted(v) ? Payoff::from_source(s, 1.0 / p, 0)
                          : Payoff::from_source(s, -(1.0 + y / p), 1);
}

HypothesisReport check_hypotheses(Variant v, const Payoff& g, double z_min, double z_max, int n) {
    HypothesisReport r;
    const double tol = 1e-12;
    std::vector<double> z(n);
    for (int i = 0; i < n; ++i)
        z[i] = std::exp(std::log(z_min) + (std::log(z_max) - std::log(z_min)) * i / (n - 1));
    auto fail = [&](const std::string& what, double amount) {
        if (amount > r.worst) r.worst = amount;
        if (r.ok) {
            r.ok = false;
            r.failed = what;
        }
    };
    auto decreasing = [&](const std::function<double(double)>& q, const std::string& what) {
        double prev = q(z[0]);
        for (int i = 1; i < n; ++i) {
            double cur = q(z[i]);
            double rise = cur - prev;
            if (rise > tol * std::max(1.0, std::abs(prev))) fail(what, rise);
            prev = cur;
        }
    };
    for (double zi : z)
        if (g.g(zi) < -tol) fail("g >= 0", -g.g(zi));
    decreasing(g.g, "g decreasing");
    switch (v) {
        case Variant::max01:
            decreasing([&](double x) { return x * (g.g(x) - g.g_inf); }, "x [g(x) - g(inf)] decreasing");
            break;
        case Variant::min1inf:
            need_dg(g, "check_hypotheses");
            decreasing([&](double x) { return -x * x * g.dg(x); }, "-z^2 g'(z) decreasing");
            break;
        case Variant::max01w: break;
        case Variant::min1infw:
            need_dg(g, "check_hypotheses");
            decreasing([&](double x) { return -x * g.dg(x); }, "-z g'(z) decreasing");
            break;
    }
    return r;
}

// ---------------------------------------------------------------- problem

double ControlProblem::x_p(double s) const {
    double a = (T - s) / p;
    return y * std::exp(a) + p * std::expm1(a);
}

double ControlProblem::lower() const {
    return is_max(variant) ? y * std::exp((T - t) / p) : x_p(t);
}

double ControlProblem::upper() const { return is_max(variant) ? x_p(t) : kInf; }

bool ControlProblem::reachable() const { return t < T && x > lower() && x < upper(); }

void ControlProblem::validate() const {
    if (!(p > 0.0) || !(y > 0.0)) throw DomainError("control problem: need p > 0 and y > 0");
    if (!(t < T)) throw DomainError("control problem: need t < T");
    if (!reachable())
        throw DomainError("control problem: (x, t) = (" + fmt(x) + ", " + fmt(t) +
                          ") outside the reachable set (" + fmt(lower()) + ", " + fmt(upper()) +
                          ") of " + to_string(variant));
}

double ControlProblem::interior_point(double frac, double v_max) const {
    double lo = lower();
    double top = is_max(variant) ? upper() : y * std::exp((T - t) / p) + v_max * p * std::expm1((T - t) / p);
    return lo + frac * (top - lo);
}

double PiecewiseControl::at(double s) const {
    size_t n = segments();
    size_t j = std::upper_bound(breakpoints.begin(), breakpoints.end(), s) - breakpoints.begin();
    j = j == 0 ? 0 : std::min(j - 1, n - 1);
    if (!linear) return values[j];
    double w = (s - breakpoints[j]) / (breakpoints[j + 1] - breakpoints[j]);
    return values[j] + w * (values[j + 1] - values[j]);
}

void check_admissible(const ControlProblem& prob, const PiecewiseControl& v) {
    const auto& b = v.breakpoints;
    if (b.size() < 2) throw DomainError("control: need at least one segment");
    if (v.values.size() != (v.linear ? b.size() : b.size() - 1))
        throw DomainError("control: value count does not match the breakpoints");
    double tol = 1e-12 * std::max(1.0, std::abs(prob.T));
    if (std::abs(b.front() - prob.t) > tol || std::abs(b.back() - prob.T) > tol)
        throw DomainError("control: breakpoints must span [t, T]");
    for (size_t i = 1; i < b.size(); ++i)
        if (!(b[i] > b[i - 1])) throw DomainError("control: breakpoints must increase");
    for (double vi : v.values) {
        bool ok = is_max(prob.variant) ? (vi > 0.0 && vi <= 1.0) : (vi >= 1.0 && std::isfinite(vi));
        if (!ok)
            throw DomainError("control: value " + fmt(vi) + " inadmissible for " +
                              to_string(prob.variant));
    }
}

namespace {

// x at every breakpoint, from x(T) = y.
std::vector<double> breakpoint_states(const ControlProblem& prob, const PiecewiseControl& v) {
    size_t n = v.segments();
    std::vector<double> X(n + 1);
    X[n] = prob.y;
    for (size_t j = n; j-- > 0;) {
        double a = v.breakpoints[j], b = v.breakpoints[j + 1];
        double va = v.linear ? v.values[j] : v.values[j];
        double beta = v.linear ? (v.values[j + 1] - v.values[j]) / (b - a) : 0.0;
        X[j] = propagate(prob.p, X[j + 1], a, b, va, beta);
    }
    return X;
}

double state_in_segment(const ControlProblem& prob, const PiecewiseControl& v,
                        const std::vector<double>& X, size_t j, double s) {
    double b = v.breakpoints[j + 1];
    double beta = 0.0;
    if (v.linear) beta = (v.values[j + 1] - v.values[j]) / (b - v.breakpoints[j]);
    return propagate(prob.p, X[j + 1], s, b, v.at(s), beta);
}

}  // namespace

double trajectory_x(const ControlProblem& prob, const PiecewiseControl& v, double s) {
    check_admissible(prob, v);
    if (s < prob.t || s > prob.T) throw DomainError("trajectory_x: s outside [t, T]");
    auto X = breakpoint_states(prob, v);
    size_t n = v.segments();
    size_t j = std::upper_bound(v.breakpoints.begin(), v.breakpoints.end(), s) - v.breakpoints.begin();
    j = j == 0 ? 0 : std::min(j - 1, n - 1);
    return state_in_segment(prob, v, X, j, s);
}

double payoff(const ControlProblem& prob, const PiecewiseControl& v, int gauss) {
    check_admissible(prob, v);
    auto X = breakpoint_states(prob, v);
    const GaussRule& gl = gauss_legendre(gauss);
    double total = 0.0;
    for (size_t j = 0; j < v.segments(); ++j) {
        double a = v.breakpoints[j], b = v.breakpoints[j + 1];
        double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        for (size_t i = 0; i < gl.x.size(); ++i) {
            double s = mid + half * gl.x[i];
            double x = state_in_segment(prob, v, X, j, s);
            total += half * gl.w[i] * integrand(prob, s, x, v.at(s));
        }
    }
    return total;
}

// ---------------------------------------------------------------- closed forms

double switching_time(const ControlProblem& prob) {
    if (!is_max(prob.variant)) throw DomainError("switching_time: max variants only");
    prob.validate();
    const double p = prob.p;
    double arg = std::exp((prob.T - prob.t) / p) * (1.0 + prob.y / p) - prob.x / p;
    double tau = prob.t + p * std::log(arg);
    if (!(tau > prob.t) || !(tau < prob.T))
        throw NumericError("switching_time: tau = " + fmt(tau) + " not inside (t, T)");
    return tau;
}

Value value_max_unweighted(const ControlProblem& prob) {
    if (prob.variant != Variant::max01) throw DomainError("value_max_unweighted: variant max01 only");
    Value r;
    r.region = "bang_bang";
    r.tau = switching_time(prob);
    r.q = (r.tau - prob.t) * prob.g.g_inf + int_g_xp(prob, r.tau, prob.T, false);
    r.dq_dx = (prob.g.g(prob.x_p(r.tau)) - prob.g.g_inf) * std::exp((prob.t - r.tau) / prob.p);
    return r;
}

Value value_max_weighted(const ControlProblem& prob) {
    if (prob.variant != Variant::max01w) throw DomainError("value_max_weighted: variant max01w only");
    Value r;
    r.region = "bang_bang";
    r.tau = switching_time(prob);
    r.q = int_g_xp(prob, r.tau, prob.T, true);
    r.dq_dx = prob.g.g(prob.x_p(r.tau)) * std::exp(-(prob.T - r.tau) / prob.p) *
              std::exp((prob.t - r.tau) / prob.p);
    return r;
}

double min_unweighted_lambda_path(const ControlProblem& prob, double lambda, double s) {
    return prob.y * std::exp((1.0 / prob.p + 1.0 / lambda) * (prob.T - s));
}

double min_unweighted_tau_path(const ControlProblem& prob, double tau, double s) {
    double xt = prob.x_p(tau);
    return xt * std::exp((1.0 / prob.p + 1.0 / xt) * (tau - s));
}

Value value_min_unweighted(const ControlProblem& prob) {
    if (prob.variant != Variant::min1inf) throw DomainError("value_min_unweighted: variant min1inf only");
    prob.validate();
    need_dg(prob.g, "value_min_unweighted");
    const double p = prob.p, t = prob.t, T = prob.T, x = prob.x;
    const Payoff& g = prob.g;
    Value r;
    double edge = min_unweighted_lambda_path(prob, prob.y, t);
    if (x >= edge) {
        r.region = "lambda";
        r.lambda = 1.0 / (std::log(x / prob.y) / (T - t) - 1.0 / p);
        r.q = (T - t) * g.g(r.lambda);
        r.dq_dx = -g.dg(r.lambda) * r.lambda * r.lambda / x;
        return r;
    }
    r.region = "tau";
    double lo = t, hi = T;
    for (int it = 0; it < kBisect; ++it) {
        double mid = 0.5 * (lo + hi);
        (min_unweighted_tau_path(prob, mid, t) < x ? lo : hi) = mid;
    }
    r.tau = 0.5 * (lo + hi);
    double z = prob.x_p(r.tau);
    r.q = (r.tau - t) * g.g(z) + int_g_xp(prob, r.tau, T, false);
    r.dq_dx = -g.dg(z) * z * z / x;
    return r;
}

// ---------------------------------------------------------------- CharMap

CharMap::CharMap(Payoff g) : g_(std::move(g)) {
    need_dg(g_, "CharMap");
    if (!(g_.z_inf > 0.0)) throw DomainError("CharMap: g' vanishes identically (z_inf = 0)");
    z0_ = g_.z_inf > 1.0 ? 1.0 : 0.5 * g_.z_inf;
}

double CharMap::L(double z) const {
    if (!(z > 0.0)) throw DomainError("CharMap: z must be positive");
    double d = g_.dg(z);
    if (!(d < 0.0)) throw DomainError("CharMap: g'(" + fmt(z) + ") is not negative");
    return std::log(-d);
}

double CharMap::derivative(double z) const {
    if (!g_.d2g) throw DomainError("CharMap: g'' is required");
    return -z * g_.d2g(z) / g_.dg(z);
}

double CharMap::integral(double a, double b) const {
    if (a == b) return 0.0;
    if (a > b) return -integral(b, a);
    const GaussRule& gl = gauss_legendre(8);
    constexpr double kPanel = 0.125;
    auto panels = [&](double w1, double w2, const std::function<double(double)>& f) {
        int n = std::max(1, static_cast<int>(std::ceil((w2 - w1) / kPanel)));
        double h = (w2 - w1) / n, sum = 0.0;
        for (int k = 0; k < n; ++k) {
            double m = w1 + (k + 0.5) * h;
            for (size_t i = 0; i < gl.x.size(); ++i) sum += 0.5 * h * gl.w[i] * f(m + 0.5 * h * gl.x[i]);
        }
        return sum;
    };
    const double zi = g_.z_inf;
    double zc = std::isfinite(zi) ? 0.5 * zi : kInf;
    double sum = 0.0;
    if (a < zc) {
        double e = std::min(b, zc);
        sum += panels(std::log(a), std::log(e), [&](double w) {
            double z = std::exp(w);
            return L(z) * z;
        });
    }
    if (b > zc) {
        double s = std::max(a, zc);
        sum += panels(-std::log(zi - s), -std::log(zi - b), [&](double u) {
            double d = std::exp(-u);
            return L(zi - d) * d;
        });
    }
    return sum;
}

double CharMap::F(double z) const { return -z * L(z) + integral(z0_, z); }

double CharMap::diff(double a, double b) const { return -b * L(b) + a * L(a) + integral(a, b); }

double CharMap::solve_forward(double a, double delta) const {
    if (delta < 0.0) throw DomainError("CharMap::solve_forward: delta must be nonnegative");
    if (delta == 0.0) return a;
    // F(a + delta) - F(a) >= delta; F -> inf at z_inf
    double lo = a, hi = std::min(a + delta, g_.z_inf);
    if (!(hi > lo)) throw NumericError("CharMap::solve_forward: empty bracket at z = " + fmt(a));
    const double base = a * L(a);
    double I_lo = 0.0;
    for (int it = 0; it < kBisect; ++it) {
        double mid = 0.5 * (lo + hi);
        double I_mid = I_lo + integral(lo, mid);
        double val = -mid * L(mid) + base + I_mid - delta;
        if (!std::isfinite(val)) throw NumericError("CharMap::solve_forward: non-finite F at " + fmt(mid));
        if (val < 0.0) {
            lo = mid;
            I_lo = I_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------- weighted minimisation

WeightedMinGeometry weighted_min_geometry(const ControlProblem& prob, const CharMap& F) {
    WeightedMinGeometry geo;
    const double p = prob.p, y = prob.y, T = prob.T, t = prob.t;
    const double zi = prob.g.z_inf;
    geo.lambda_inf = std::min(zi, y);
    if (zi < y)
        geo.T_inf = T;
    else if (std::isfinite(zi))
        geo.T_inf = T - p * std::log((zi + p) / (y + p));
    else
        geo.T_inf = -kInf;
    if (zi >= y) {
        double zt = F.solve_forward(y, T - t);
        geo.lambda_boundary = y * std::exp((T - t) / p) * prob.g.dg(y) / prob.g.dg(zt);
    } else {
        geo.lambda_boundary = zi > 0.0 ? y * std::exp((1.0 / p + 1.0 / zi) * (T - t)) : kInf;
    }
    if (zi == 0.0)
        geo.flat_boundary = kInf;
    else if (t < geo.T_inf)
        geo.flat_boundary = std::exp((1.0 / p + 1.0 / zi) * (geo.T_inf - t)) * std::max(zi, y);
    else
        geo.flat_boundary = 0.0;
    return geo;
}

double lambda_trajectory(const ControlProblem& prob, const CharMap& F, double lambda, double s) {
    if (!(s <= prob.T)) throw DomainError("lambda_trajectory: s > T");
    double z = F.solve_forward(lambda, prob.T - s);
    return prob.y * std::exp((prob.T - s) / prob.p) * prob.g.dg(lambda) / prob.g.dg(z);
}

double tau_trajectory(const ControlProblem& prob, const CharMap& F, double tau, double s) {
    if (!(s <= tau)) throw DomainError("tau_trajectory: s > tau");
    double xt = prob.x_p(tau);
    double z = F.solve_forward(xt, tau - s);
    return xt * std::exp((tau - s) / prob.p) * prob.g.dg(xt) / prob.g.dg(z);
}

Value value_min_weighted(const ControlProblem& prob) {
    if (prob.variant != Variant::min1infw) throw DomainError("value_min_weighted: variant min1infw only");
    prob.validate();
    const double p = prob.p, y = prob.y, T = prob.T, t = prob.t, x = prob.x;
    const Payoff& g = prob.g;
    const double decay = std::exp(-(T - t) / p);
    Value r;
    if (g.z_inf == 0.0) {
        r.region = "flat";
        double g0 = g.g(1.0);
        r.q = g0 * (decay * x - y);
        r.dq_dx = g0 * decay;
        return r;
    }
    need_dg(g, "value_min_weighted");
    if (!g.d2g) throw DomainError("value_min_weighted: g'' is required");
    CharMap F(g);
    WeightedMinGeometry geo = weighted_min_geometry(prob, F);

    if (x >= geo.lambda_boundary) {
        r.region = "lambda";
        auto X = [&](double lam, double& zt) {
            zt = F.solve_forward(lam, T - t);
            return y * std::exp((T - t) / p) * g.dg(lam) / g.dg(zt);
        };
        double zt = 0.0;
        double hi = std::log(geo.lambda_inf), lo = hi - std::log(2.0);
        int grow = 0;
        while (X(std::exp(lo), zt) <= x) {
            hi = lo;
            lo -= 1.0;
            if (++grow > 700) throw NumericError("value_min_weighted: lambda bracket not found");
        }
        for (int it = 0; it < kBisect; ++it) {
            double mid = 0.5 * (lo + hi);
            (X(std::exp(mid), zt) > x ? lo : hi) = mid;
        }
        double lam = std::exp(0.5 * (lo + hi));
        X(lam, zt);
        r.lambda = lam;
        r.q = x * decay * g.g(zt) - y * g.g(lam) - y * g.dg(lam) * (zt - lam);
        r.dq_dx = decay * (g.g(zt) - zt * g.dg(zt));
        return r;
    }
    if (t < geo.T_inf && x <= geo.flat_boundary) {
        r.region = "flat";
        double gi = g.g(g.z_inf);
        r.q = int_g_xp(prob, geo.T_inf, T, true) +
              gi * (decay * x - y + p * std::expm1(-(T - geo.T_inf) / p));
        r.dq_dx = gi * decay;
        return r;
    }
    r.region = "tau";
    auto X = [&](double tau, double& zt) {
        double xt = prob.x_p(tau);
        zt = F.solve_forward(xt, tau - t);
        return xt * std::exp((tau - t) / p) * g.dg(xt) / g.dg(zt);
    };
    double zt = 0.0;
    double lo = std::max(t, geo.T_inf), hi = T;
    for (int it = 0; it < kBisect; ++it) {
        double mid = 0.5 * (lo + hi);
        (X(mid, zt) < x ? lo : hi) = mid;
    }
    double tau = 0.5 * (lo + hi);
    X(tau, zt);
    double xt = prob.x_p(tau);
    r.tau = tau;
    r.q = decay * x * g.g(zt) - std::exp(-(T - tau) / p) * xt * (g.g(xt) + g.dg(xt) * (zt - xt)) +
          int_g_xp(prob, tau, T, true);
    r.dq_dx = decay * (g.g(zt) - zt * g.dg(zt));
    return r;
}

Value value(const ControlProblem& prob) {
    switch (prob.variant) {
        case Variant::max01: return value_max_unweighted(prob);
        case Variant::min1inf: return value_min_unweighted(prob);
        case Variant::max01w: return value_max_weighted(prob);
        case Variant::min1infw: return value_min_weighted(prob);
    }
    return {};
}

// ---------------------------------------------------------------- dynamic programming

DPResult brute_force(const ControlProblem& prob, int n_steps, int x_nodes, int v_levels,
                     double v_max) {
    prob.validate();
    if (n_steps < 1 || n_steps > 256) throw DomainError("brute_force: need 1 <= n_steps <= 256");
    if (x_nodes < 2 || v_levels < 2) throw DomainError("brute_force: need >= 2 nodes and levels");
    const bool mx = is_max(prob.variant);
    const double p = prob.p, T = prob.T, t = prob.t, y = prob.y;
    const double dt = (T - t) / n_steps;
    const double ed = std::exp(dt / p), em = p * std::expm1(dt / p);
    const GaussRule& gl = gauss_legendre(4);

    DPResult r;
    r.n_steps = n_steps;
    r.times.resize(n_steps + 1);
    for (int k = 0; k <= n_steps; ++k) r.times[k] = t + k * dt;
    r.levels.resize(v_levels);
    for (int j = 0; j < v_levels; ++j) {
        double w = static_cast<double>(j) / (v_levels - 1);
        r.levels[j] = mx ? w : 1.0 + (v_max - 1.0) * w;
    }
    // grids conform to the reachable interval at each time
    auto bounds = [&](double s, double& lo, double& hi) {
        double a = (T - s) / p;
        if (mx) {
            lo = y * std::exp(a);
            hi = prob.x_p(s);
        } else {
            lo = prob.x_p(s);
            hi = y * std::exp(a) + v_max * p * std::expm1(a);
        }
    };
    std::vector<double> glo(n_steps), ghi(n_steps);
    for (int k = 0; k < n_steps; ++k) bounds(r.times[k], glo[k], ghi[k]);
    auto node = [&](int k, int i) {
        double l0 = std::log(glo[k]), l1 = std::log(ghi[k]);
        return std::exp(l0 + (l1 - l0) * i / (x_nodes - 1));
    };
    auto stage = [&](double sa, double sb, double xb, double v) {
        double half = 0.5 * (sb - sa), mid = 0.5 * (sa + sb), sum = 0.0;
        for (size_t i = 0; i < gl.x.size(); ++i) {
            double s = mid + half * gl.x[i];
            sum += half * gl.w[i] * integrand(prob, s, propagate(p, xb, s, sb, v, 0.0), v);
        }
        return sum;
    };
    const double bad = mx ? -kInf : kInf;
    auto better = [&](double a, double b) { return mx ? a > b : a < b; };
    // W(k, .) interpolated at x, linear in x between log-spaced nodes
    auto interp = [&](const std::vector<double>& W, int k, double x) {
        double tol = 1e-12 * ghi[k];
        if (x < glo[k] - tol || x > ghi[k] + tol) return bad;
        x = std::clamp(x, glo[k], ghi[k]);
        double l0 = std::log(glo[k]), l1 = std::log(ghi[k]);
        double f = (std::log(x) - l0) / (l1 - l0) * (x_nodes - 1);
        int i = std::clamp(static_cast<int>(std::floor(f)), 0, x_nodes - 2);
        double xa = node(k, i), xb = node(k, i + 1);
        double wa = W[i], wb = W[i + 1];
        if (!std::isfinite(wa) || !std::isfinite(wb)) {
            if (std::abs(x - xa) <= tol && std::isfinite(wa)) return wa;
            if (std::abs(x - xb) <= tol && std::isfinite(wb)) return wb;
            return bad;
        }
        return wa + (wb - wa) * (x - xa) / (xb - xa);
    };

    r.policy.assign(n_steps, std::vector<int>(x_nodes, -1));
    std::vector<std::vector<double>> W(n_steps, std::vector<double>(x_nodes, bad));
    // last step: the control that lands exactly on y
    {
        int k = n_steps - 1;
        for (int i = 0; i < x_nodes; ++i) {
            double v = (node(k, i) - ed * y) / em;
            double vlo = mx ? 0.0 : 1.0, vhi = mx ? 1.0 : v_max;
            if (v < vlo - 1e-9 || v > vhi + 1e-9) continue;
            v = std::clamp(v, vlo, vhi);
            W[k][i] = stage(r.times[k], T, y, v);
            r.policy[k][i] = static_cast<int>(std::lround((v - r.levels[0]) /
                                                          (r.levels[1] - r.levels[0])));
        }
    }
    for (int k = n_steps - 2; k >= 0; --k) {
        for (int i = 0; i < x_nodes; ++i) {
            double xi = node(k, i);
            double best = bad;
            int arg = -1;
            for (int j = 0; j < v_levels; ++j) {
                double v = r.levels[j];
                double xn = (xi - v * em) / ed;
                double w = interp(W[k + 1], k + 1, xn);
                if (!std::isfinite(w)) continue;
                double total = w + stage(r.times[k], r.times[k + 1], xn, v);
                if (arg < 0 || better(total, best)) {
                    best = total;
                    arg = j;
                }
            }
            W[k][i] = best;
            r.policy[k][i] = arg;
        }
    }
    r.grid.resize(x_nodes);
    for (int i = 0; i < x_nodes; ++i) r.grid[i] = node(0, i);
    double xq = prob.x;
    if (xq < glo[0] || xq > ghi[0]) {
        r.clipped = true;
        xq = std::clamp(xq, glo[0], ghi[0]);
    }
    r.value = interp(W[0], 0, xq);
    r.feasible = std::isfinite(r.value);

    if (mx) {
        // cells whose bang-bang switch lies at least 4 steps from both s_k and T
        long cells = 0, bang = 0;
        ControlProblem cell = prob;
        for (int k = 0; k + 1 < n_steps; ++k) {
            cell.t = r.times[k];
            for (int i = 1; i + 1 < x_nodes; ++i) {
                if (r.policy[k][i] < 0) continue;
                cell.x = node(k, i);
                if (!cell.reachable()) continue;
                double a = std::exp((T - cell.t) / p) * (1.0 + y / p) - cell.x / p;
                double tau = cell.t + p * std::log(a);
                if (tau - cell.t < 4.0 * dt || T - tau < 4.0 * dt) continue;
                ++cells;
                if (r.policy[k][i] == 0 || r.policy[k][i] == v_levels - 1) ++bang;
            }
        }
        r.bang_bang_fraction = cells > 0 ? static_cast<double>(bang) / cells : 1.0;
    } else {
        // follow the greedy policy from (x, t)
        double xc = xq;
        for (int k = 0; k + 1 < n_steps; ++k) {
            double l0 = std::log(glo[k]), l1 = std::log(ghi[k]);
            int i = std::clamp(static_cast<int>(std::lround((std::log(xc) - l0) / (l1 - l0) *
                                                            (x_nodes - 1))),
                               0, x_nodes - 1);
            int j = r.policy[k][i];
            if (j < 0) break;
            if (j == v_levels - 1) r.saturated = true;
            xc = std::clamp((xc - r.levels[j] * em) / ed, glo[k + 1], ghi[k + 1]);
        }
    }
    return r;
}

// ---------------------------------------------------------------- stationarity

StationarityReport stationarity_check(const ControlProblem& prob, int n) {
    if (!(prob.t < prob.T)) throw DomainError("stationarity_check: need t < T");
    need_dg(prob.g, "stationarity_check");
    const Payoff& g = prob.g;
    const double p = prob.p, y = prob.y, T = prob.T, t = prob.t;
    const double xt = prob.x_p(t);
    StationarityReport r;
    r.min_grad = kInf;
    for (int j = 0; j < n; ++j) {
        double tau = t + (T - t) * (j + 0.5) / n;
        double x = prob.x_p(tau);
        double d;
        if (!is_weighted(prob.variant)) {
            d = (-x * (1.0 + x / p) * g.dg(x) - g.g(x) + g.g(xt)) / (1.0 + x / p);
        } else {
            double I = int_g_xp(prob, t, tau, true) / (y + p) + p * g.g(xt) / (xt + p) -
                       p * g.g(x) / (x + p);
            d = std::exp(-(T - tau) / p) * (-x * g.dg(x) + g.g(x) + I);
        }
        r.tau.push_back(tau);
        r.grad.push_back(d);
        r.min_grad = std::min(r.min_grad, d);
    }
    r.ok = r.min_grad >= -1e-12;
    return r;
}

// ---------------------------------------------------------------- sampled controls

SampleReport sample_controls(const ControlProblem& prob, int n, std::uint64_t seed, int segments,
                             double v_max) {
    prob.validate();
    const bool mx = is_max(prob.variant);
    const double p = prob.p, t = prob.t, T = prob.T;
    Value val = value(prob);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double lmax = std::log(v_max);

    PiecewiseControl v;
    v.breakpoints.resize(segments + 1);
    for (int j = 0; j <= segments; ++j) v.breakpoints[j] = t + (T - t) * j / segments;
    v.breakpoints.back() = T;
    // mass of each segment in x(t) = e^{(T-t)/p} y + sum v_j c_j
    std::vector<double> c(segments);
    for (int j = 0; j < segments; ++j)
        c[j] = p * (std::exp((v.breakpoints[j + 1] - t) / p) - std::exp((v.breakpoints[j] - t) / p));
    const double target = prob.x - prob.y * std::exp((T - t) / p);
    if (!mx && !(target < v_max * p * std::expm1((T - t) / p)))
        throw DomainError("sample_controls: x = " + fmt(prob.x) + " not reachable with v <= " +
                          fmt(v_max));

    SampleReport r;
    r.seed = seed;
    r.worst_margin = kInf;
    std::vector<double> lu(segments);
    int attempts = 0;
    while (r.n < n) {
        if (++attempts > 100 * n) throw NumericError("sample_controls: too many rejected samples");
        double lu_max = 0.0;
        for (int j = 0; j < segments; ++j) {
            lu[j] = (mx ? -1.0 : 1.0) * lmax * U(rng);
            lu_max = std::max(lu_max, std::abs(lu[j]));
        }
        auto mass = [&](double a) {
            double m = 0.0;
            for (int j = 0; j < segments; ++j) m += c[j] * std::exp(a * lu[j]);
            return m;
        };
        // exponent a scales log v; mass moves monotonically from the v = 1 value
        double lo = 0.0, hi;
        if (mx) {
            hi = 1.0;
            while (mass(hi) > target) {
                hi *= 2.0;
                if (hi > 1e6) break;
            }
            if (mass(hi) > target) {
                ++r.rejected;
                continue;
            }
        } else {
            hi = lu_max > 0.0 ? lmax / lu_max : 0.0;
            if (mass(hi) < target) {
                ++r.rejected;
                continue;
            }
        }
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            bool above = mass(mid) > target;
            (mx == above ? lo : hi) = mid;
        }
        double a = 0.5 * (lo + hi);
        v.values.resize(segments);
        for (int j = 0; j < segments; ++j) v.values[j] = std::exp(a * lu[j]);
        if (!mx)
            for (double& vj : v.values) vj = std::max(vj, 1.0);
        double xt = trajectory_x(prob, v, t);
        if (std::abs(xt - prob.x) > 1e-9 * prob.x)
            throw NumericError("sample_controls: control misses x(t) by " + fmt(xt - prob.x));
        double pay = payoff(prob, v);
        double margin = mx ? val.q - pay : pay - val.q;
        r.worst_margin = std::min(r.worst_margin, margin);
        ++r.n;
    }
    return r;
}

// ---------------------------------------------------------------- extremality certificate

std::string Certificate::to_json() const {
    nlohmann::json j;
    j["variant"] = side;
    j["model"] = model;
    j["n_samples"] = n_samples;
    j["worst_margin"] = worst_margin;
    j["seed"] = seed;
    j["unit_quadrature_error"] = unit_quadrature_error;
    j["pass"] = pass;
    return j.dump(2);
}

void check_extremality_hypotheses(const SourceFn& s) {
    const int n = 400;
    const double tol = 1e-12;
    double prev_h = kInf, prev_q = kInf;
    for (int i = 0; i < n; ++i) {
        double y = std::exp(std::log(1e-4) + (std::log(1e4) - std::log(1e-4)) * i / (n - 1));
        Jet j = s.jet(y);
        auto fail = [&](const std::string& what) {
            throw ModelError("extremality hypothesis fails: " + what + " at y = " + fmt(y));
        };
        double sc = std::max(1.0, std::abs(j.v));
        if (j.v < -tol) fail("h >= 0");
        if (j.v > prev_h + tol * sc) fail("h decreasing");
        if (j.d2 < -tol * std::max(1.0, std::abs(j.d2))) fail("h'' >= 0");
        if (y * j.d2 + j.d1 < -tol * std::max(1.0, std::abs(j.d1))) fail("y h'' + h' >= 0");
        double q = y * y * j.d2;
        if (q > prev_q + tol * std::max(1.0, std::abs(prev_q))) fail("y^2 h'' decreasing");
        prev_h = j.v;
        prev_q = q;
    }
}

Certificate extremality_certificate(const pde::Model& model, double t, double y, int n,
                                    bool above, std::uint64_t seed, double v_max, double tol) {
    if (!(t > 0.0) || !(y > 0.0)) throw DomainError("extremality_certificate: need t > 0, y > 0");
    if (!(v_max > 1.0)) throw DomainError("extremality_certificate: need v_max > 1");
    check_extremality_hypotheses(model.source);
    const double p = model.p;
    constexpr int kNodes = 16, kSub = 8, kGauss = 4;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double lmax = std::log(v_max);

    auto history = [&](const std::vector<double>& lv) {
        dde::IHistory h(std::exp(p * lv[0]), 0.0, dde::LogInterp::linear);
        for (int k = 0; k + 1 < kNodes; ++k)
            for (int m = 1; m <= kSub; ++m) {
                double w = static_cast<double>(m) / kSub;
                double s = t * (k + w) / (kNodes - 1);
                if (k + 2 == kNodes && m == kSub) s = t;
                h.push(s, std::exp(p * (lv[k] + w * (lv[k + 1] - lv[k]))));
            }
        return h;
    };
    Certificate c;
    c.side = above ? "min" : "max";
    c.model = model.source.describe() + ", p=" + fmt(p) + ", t=" + fmt(t) + ", y=" + fmt(y);
    c.seed = seed;
    const double F1 = dde::F_unit(model, t, y);
    c.unit_quadrature_error =
        std::abs(dde::F_eval(model, history(std::vector<double>(kNodes, 0.0)), t, y, kGauss) - F1);
    c.worst_margin = kInf;
    std::vector<double> lv(kNodes, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k + 1 < kNodes; ++k) lv[k] = (above ? 1.0 : -1.0) * lmax * U(rng);
        lv[kNodes - 1] = 0.0;   // v_t(t) = 1
        double Fv = dde::F_eval(model, history(lv), t, y, kGauss);
        c.worst_margin = std::min(c.worst_margin, above ? Fv - F1 : F1 - Fv);
        ++c.n_samples;
    }
    c.pass = c.worst_margin >= -tol;
    return c;
}

std::string value_sweep_csv(const ControlProblem& prob, int nt, int nx) {
    std::ostringstream os;
    os.precision(17);
    os << "t,x,q,dq_dx\n";
    for (int a = 0; a < nt; ++a) {
        ControlProblem q = prob;
        q.t = prob.t + (prob.T - prob.t) * a / nt;
        double lo = q.lower();
        double hi = is_max(q.variant) ? q.upper() : 3.0 * lo;
        for (int b = 1; b <= nx; ++b) {
            q.x = lo + (hi - lo) * b / (nx + 1);
            Value v = value(q);
            os << q.t << ',' << q.x << ',' << v.q << ',' << v.dq_dx << '\n';
        }
    }
    return os.str();
}

}  // namespace nlt::control
