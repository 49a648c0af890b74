#include "nlt/dde/dde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nlt/core/equilibrium.hpp"
#include "nlt/core/errors.hpp"
#include "nlt/core/quadrature.hpp"
#include "nlt/pde/characteristics.hpp"

namespace nlt::dde {

// ---------------------------------------------------------------- IHistory

IHistory::IHistory(double I0, double dlog0, LogInterp interp) : interp_(interp) {
    if (!(I0 > 0.0) || !std::isfinite(I0)) throw ModelError("IHistory: I(0) must be positive");
    t_.push_back(0.0);
    L_.push_back(std::log(I0));
    d_.push_back(dlog0);
}

IHistory IHistory::from_rho(const pde::RhoHistory& h, double I0, double p) {
    IHistory out(I0, p * h.rho(0) - 1.0, LogInterp::quadratic);
    for (size_t k = 1; k < h.size(); ++k)
        out.push(h.t(k), I0 * std::exp(p * h.R(k) - h.t(k)), p * h.rho(k) - 1.0);
    return out;
}

void IHistory::push(double t, double I, double dlogI) {
    if (!(t > t_.back())) throw DomainError("IHistory::push: times must increase");
    if (!(I > 0.0) || !std::isfinite(I))
        throw ModelError("I(t) lost positivity at t = " + std::to_string(t));
    t_.push_back(t);
    L_.push_back(std::log(I));
    d_.push_back(dlogI);
}

void IHistory::pop() {
    if (t_.size() > 1) {
        t_.pop_back();
        L_.pop_back();
        d_.pop_back();
    }
}

double IHistory::I(size_t k) const { return std::exp(L_[k]); }

size_t IHistory::locate(double s) const {
    if (t_.size() < 2) return 0;
    auto it = std::upper_bound(t_.begin(), t_.end(), s);
    size_t k = (it == t_.begin()) ? 0 : size_t(it - t_.begin()) - 1;
    return std::min(k, t_.size() - 2);
}

double IHistory::log_in(size_t k, double s) const {
    if (k + 1 >= t_.size()) return L_.back();
    double dt = t_[k + 1] - t_[k], sg = s - t_[k];
    double lin = L_[k] + sg * (L_[k + 1] - L_[k]) / dt;
    if (interp_ == LogInterp::linear) return lin;
    return lin + sg * (sg - dt) * (d_[k + 1] - d_[k]) / (2.0 * dt);
}

double IHistory::log_I_at(double s) const {
    if (s < 0.0 || s > t_.back()) throw DomainError("IHistory: time outside the history");
    return log_in(locate(s), s);
}

double IHistory::v(double p, double t, double s) const {
    if (s > t) throw DomainError("v_t(s): s must not exceed t");
    return std::exp((log_I_at(s) - log_I_at(t)) / p);
}

// ---------------------------------------------------------- memory nodes

namespace {

struct Segment {
    double u, w;
    size_t k;
};

// [0, t] cut at history nodes and at `split`
std::vector<Segment> segments(const IHistory& h, double t, double split) {
    if (t < 0.0 || t > h.t_last() * (1.0 + 1e-14) + 1e-300)
        throw DomainError("memory: t outside the history");
    std::vector<Segment> out;
    for (size_t k = 0; k + 1 < h.size() && h.t(k) < t; ++k) {
        double u = h.t(k), w = std::min(h.t(k + 1), t);
        if (split > u && split < w) {
            out.push_back({u, split, k});
            out.push_back({split, w, k});
        } else {
            out.push_back({u, w, k});
        }
    }
    return out;
}

// int_u^w e^{E(s) - Et} ds inside interval k, E = (s + log I)/p
double seg_integral(const IHistory& h, double p, size_t k, double u, double w, double Et) {
    if (w <= u) return 0.0;
    if (h.interp() == LogInterp::linear) {
        double Eu = (u + h.log_in(k, u)) / p - Et;
        double slope = (1.0 + (h.log_I(k + 1) - h.log_I(k)) / (h.t(k + 1) - h.t(k))) / p;
        double x = slope * (w - u);
        double f = std::abs(x) < 1e-12 ? (w - u) * (1.0 + 0.5 * x) : std::expm1(x) / slope;
        return std::exp(Eu) * f;
    }
    const GaussRule& g = gauss_legendre(4);
    double c = 0.5 * (u + w), r = 0.5 * (w - u), s = 0.0;
    for (int i = 0; i < 4; ++i) {
        double x = c + r * g.x[i];
        s += g.w[i] * std::exp((x + h.log_in(k, x)) / p - Et);
    }
    return r * s;
}

double E_at(const IHistory& h, double p, double t) { return (t + h.log_I_at(t)) / p; }

}  // namespace

MemoryNodes memory_nodes(const IHistory& hist, double p, double t, int m, double split,
                         double y_ref) {
    constexpr double kPlanRatio = 0.02;
    constexpr double kPieceRatio = 0.1;
    struct Piece {
        double u, w;
        size_t k;
        int n;
    };
    std::vector<Piece> pieces;
    for (const Segment& sg : segments(hist, t, split)) {
        if (!(y_ref > 0.0) || sg.w - sg.u <= kPlanRatio * (y_ref + t - sg.w)) {
            pieces.push_back({sg.u, sg.w, sg.k, m});
            continue;
        }
        // graded towards s = t, where h' ~ -1/y makes the integrand steep
        std::vector<std::pair<double, double>> stack{{sg.u, sg.w}};
        std::vector<Piece> local;
        while (!stack.empty()) {
            auto [u, w] = stack.back();
            stack.pop_back();
            if (w - u > kPieceRatio * (y_ref + t - w) && w - u > 1e-14 * std::max(1.0, t)) {
                double mid = 0.5 * (u + w);
                stack.emplace_back(u, mid);
                stack.emplace_back(mid, w);
            } else {
                local.push_back({u, w, sg.k, 4});
            }
        }
        std::sort(local.begin(), local.end(), [](const Piece& a, const Piece& b) { return a.u < b.u; });
        pieces.insert(pieces.end(), local.begin(), local.end());
    }
    MemoryNodes mn;
    mn.t = t;
    double Et = E_at(hist, p, t);
    size_t n = 0;
    for (const Piece& pc : pieces) n += pc.n;
    mn.s.resize(n);
    mn.w.resize(n);
    mn.a.resize(n);
    mn.Phi.resize(n);
    double run = 0.0;
    size_t j = n;
    for (size_t q = pieces.size(); q-- > 0;) {
        const Piece& pc = pieces[q];
        const GaussRule& g = gauss_legendre(pc.n);
        double c = 0.5 * (pc.u + pc.w), r = 0.5 * (pc.w - pc.u);
        j -= pc.n;
        for (int i = 0; i < pc.n; ++i) {
            double s = c + r * g.x[i];
            mn.s[j + i] = s;
            mn.w[j + i] = r * g.w[i];
            mn.a[j + i] = std::exp((s + hist.log_in(pc.k, s)) / p - Et);
            mn.Phi[j + i] = run + seg_integral(hist, p, pc.k, s, pc.w, Et);
        }
        run += seg_integral(hist, p, pc.k, pc.u, pc.w, Et);
    }
    mn.Phi0 = run;
    mn.a0 = std::exp(hist.log_I(0) / p - Et);
    return mn;
}

VZ v_and_z(const IHistory& hist, double p, double t, double s, double y) {
    if (!(y > 0.0)) throw DomainError("v_and_z: y must be positive");
    if (s < 0.0) throw DomainError("v_and_z: s must be nonnegative");
    if (s > t) throw DomainError("v_and_z: s must not exceed t");
    double Et = E_at(hist, p, t);
    double phi = 0.0;
    for (const Segment& sg : segments(hist, t, s))
        if (sg.u >= s) phi += seg_integral(hist, p, sg.k, sg.u, sg.w, Et);
    VZ out;
    out.v = hist.v(p, t, s);
    out.z = std::exp((t - s) / p) * (y + phi);
    return out;
}

// ------------------------------------------------------------- functionals

namespace {

double yp0(double p, double t, double y) {
    double e = std::exp(t / p);
    return e * y + p * (e - 1.0);
}

}  // namespace

double F_eval(const pde::Model& model, const IHistory& hist, double t, double y, int m) {
    if (!(y > 0.0)) throw DomainError("F_eval: y must be positive");
    const double p = model.p;
    MemoryNodes mn = memory_nodes(hist, p, t, m, -1.0, y);
    double sa = 0.0, s1 = 0.0;
    for (size_t j = 0; j < mn.s.size(); ++j) {
        double h, h1;
        model.source.eval01((y + mn.Phi[j]) / mn.a[j], h, h1);
        sa += mn.w[j] * mn.a[j] * h;
        s1 += mn.w[j] * h1;
    }
    return sa / p - (1.0 + y / p) * s1;
}

double F_unit(const pde::Model& model, double t, double y) {
    const double p = model.p;
    return model.source.eval(y, 0) - std::exp(-t / p) * model.source.eval(yp0(p, t, y), 0);
}

double G_eval(const pde::Model& model, const IHistory& hist, double t, double y,
              const Profile& xi0, int m) {
    if (!(y > 0.0)) throw DomainError("G_eval: y must be positive");
    const double p = model.p;
    MemoryNodes mn = memory_nodes(hist, p, t, m);
    Jet j0 = xi0((y + mn.Phi0) / mn.a0);
    return mn.a0 * j0.v / p - (1.0 + y / p) * j0.d1 -
           std::exp(-t / p) * model.source.eval(yp0(p, t, y), 0);
}

double dF_gradient(const pde::Model& model, const IHistory& hist, double t, double y, double tau,
                   int m) {
    if (!(tau > 0.0) || !(tau < t)) throw DomainError("dF_gradient: need 0 < tau < t");
    if (!(y > 0.0)) throw DomainError("dF_gradient: y must be positive");
    const double p = model.p;
    const SourceFn& src = model.source;
    MemoryNodes mn = memory_nodes(hist, p, t, m, tau, y);
    double sh1 = 0.0, sh2 = 0.0;
    for (size_t j = 0; j < mn.s.size() && mn.s[j] < tau; ++j) {
        double Y = (y + mn.Phi[j]) / mn.a[j];
        double v = mn.a[j] * std::exp((t - mn.s[j]) / p);
        sh1 += mn.w[j] * src.eval(Y, 1);
        sh2 += mn.w[j] * src.eval(Y, 2) / v * std::exp((tau - mn.s[j]) / p);
    }
    VZ vz = v_and_z(hist, p, t, tau, y);
    double Y = vz.z / vz.v;
    double et = std::exp(-(t - tau) / p);
    Jet hj = src.jet(Y);
    return hj.v * et / p - Y * hj.d1 * et / p + et * sh1 / p +
           (1.0 + y / p) * (Y / vz.v) * hj.d2 - (1.0 + y / p) * sh2;
}

Jet xi_from_history(const pde::Model& model, const IHistory& hist, double t, double y,
                    const Profile& xi0, int m) {
    if (!(y > 0.0)) throw DomainError("xi_from_history: y must be positive");
    MemoryNodes mn = memory_nodes(hist, model.p, t, m, -1.0, y);
    Jet j0 = xi0((y + mn.Phi0) / mn.a0);
    double sa = 0.0, s1 = 0.0;
    for (size_t j = 0; j < mn.s.size(); ++j) {
        double h, h1;
        model.source.eval01((y + mn.Phi[j]) / mn.a[j], h, h1);
        sa += mn.w[j] * mn.a[j] * h;
        s1 += mn.w[j] * h1;
    }
    Jet out;
    out.v = mn.a0 * j0.v + sa;
    out.d1 = j0.d1 + s1;
    return out;
}

// ---------------------------------------------------------------- stepping

DDEState::DDEState(pde::Model model, Profile xi0, Options opt, double I0)
    : model_(std::move(model)), xi0_(std::move(xi0)), opt_(opt),
      rule_(model_.functional, opt.functional_nodes), hist_(1.0, 0.0, opt.interp) {
    h_nodes_.resize(rule_.size());
    for (size_t i = 0; i < rule_.size(); ++i) h_nodes_[i] = model_.source.eval(rule_.y[i], 0);
    DDEValue v0 = evaluate(0.0);
    if (!(I0 > 0.0)) I0 = v0.I_profile;
    hist_ = IHistory(I0, v0.dlogI, opt.interp);
    records_.push_back({0.0, I0, v0, 0});
}

DDEValue DDEState::evaluate(double t) const {
    const double p = model_.p;
    MemoryNodes mn = memory_nodes(hist_, p, t, opt_.nodes_per_interval);
    const double et = std::exp(-t / p);
    const size_t n = mn.s.size();
    double I = 0.0, fn = 0.0, gn = 0.0, gd = 0.0;
    for (size_t i = 0; i < rule_.size(); ++i) {
        const double y = rule_.y[i];
        Jet j0 = xi0_((y + mn.Phi0) / mn.a0);
        double sa = 0.0, s1 = 0.0;
        for (size_t j = 0; j < n; ++j) {
            double h, h1;
            model_.source.eval01((y + mn.Phi[j]) * (1.0 / mn.a[j]), h, h1);
            sa += mn.w[j] * mn.a[j] * h;
            s1 += mn.w[j] * h1;
        }
        double xi = mn.a0 * j0.v + sa;
        double d1 = j0.d1 + s1;
        double hy0 = model_.source.eval(yp0(p, t, y), 0);
        double F = sa / p - (1.0 + y / p) * s1;
        double F1 = h_nodes_[i] - et * hy0;
        double G = mn.a0 * j0.v / p - (1.0 + y / p) * j0.d1 - et * hy0;
        double w = rule_.w[i];
        double dI = rule_.gradient(i, xi);
        I += w * rule_.integrand(i, xi);
        fn += w * dI * (F - F1);
        gn += w * dI * G;
        gd += w * dI * (xi - y * d1);
    }
    DDEValue v;
    v.I_profile = I;
    v.denominator = p * I + gd;
    if (!(v.denominator > kDenFloor * p * I))
        throw ModelError("denominator pI + <dI, A xi> = " + std::to_string(v.denominator) +
                         " fell below the positivity floor at t = " + std::to_string(t));
    v.f = fn / v.denominator;
    v.g = -gn / v.denominator;
    v.dlogI = p * (v.g - v.f);
    return v;
}

double DDEState::log_next(double dt, double chi) const {
    (void)dt;
    return hist_.log_I(hist_.size() - 1) - model_.p * std::log(chi);
}

// Slope at the new node implied by the step rule and L_{n+1}.
double DDEState::node_slope(double dt, double L1) const {
    const size_t n = hist_.size() - 1;
    double inc = L1 - hist_.log_I(n);
    if (n == 0 || opt_.rule == TimeRule::trapezoid) return 2.0 * inc / dt - hist_.dlog_I(n);
    return (12.0 * inc / dt - 8.0 * hist_.dlog_I(n) + hist_.dlog_I(n - 1)) / 5.0;
}

DDEValue DDEState::trial(double dt, double chi) {
    double L1 = log_next(dt, chi);
    hist_.push(hist_.t_last() + dt, std::exp(L1), node_slope(dt, L1));
    DDEValue v;
    try {
        v = evaluate(hist_.t_last());
    } catch (...) {
        hist_.pop();
        throw;
    }
    hist_.pop();
    return v;
}

void DDEState::commit(double dt, double chi, const DDEValue& v, int iterations) {
    double L1 = log_next(dt, chi);
    double d1 = node_slope(dt, L1);
    double t1 = hist_.t_last() + dt;
    hist_.push(t1, std::exp(L1), d1);
    records_.push_back({t1, std::exp(L1), v, iterations});
}

double DDEState::step_increment(double dt, double d_next) const {
    const size_t n = hist_.size() - 1;
    if (n == 0 || opt_.rule == TimeRule::trapezoid)
        return 0.5 * dt * (hist_.dlog_I(n) + d_next);
    return dt / 12.0 * (5.0 * d_next + 8.0 * hist_.dlog_I(n) - hist_.dlog_I(n - 1));
}

void dde_step(DDEState& st, double dt) {
    if (!(dt > 0.0)) throw DomainError("dde_step: dt must be positive");
    const Options& o = st.options();
    const double p = st.model().p;
    const auto& recs = st.records();
    const double d0 = recs.back().value.dlogI;
    double dpred = d0;
    if (recs.size() >= 2) {
        const DDERecord& a = recs[recs.size() - 2];
        dpred = d0 + (d0 - a.value.dlogI) * dt / (recs.back().t - a.t);
    }
    // x = log chi = int_T^{T+dt} (f - g) = -(1/p) int d log I/dt
    auto map = [&](double x, DDEValue& v) {
        v = st.trial(dt, std::exp(x));
        return -st.step_increment(dt, v.dlogI) / p;
    };
    double x = -st.step_increment(dt, dpred) / p;
    DDEValue v;
    double r = map(x, v) - x;
    double x_prev = 0.0, r_prev = 0.0;
    bool have_prev = false;
    for (int it = 1; it <= o.max_iter; ++it) {
        if (std::abs(r) < o.tol) {
            st.commit(dt, std::exp(x + r), v, it);
            return;
        }
        double xn;
        if (it <= o.damp_after) {
            xn = x + r;
            if (have_prev && std::abs(r - r_prev) > 1e-300) {
                double sec = x - r * (x - x_prev) / (r - r_prev);
                if (std::isfinite(sec)) xn = sec;
            }
        } else {
            xn = x + o.damping * r;
        }
        x_prev = x;
        r_prev = r;
        have_prev = true;
        x = xn;
        r = map(x, v) - x;
    }
    throw StepError("fixed point for chi did not converge in " + std::to_string(o.max_iter) +
                    " iterations at t = " + std::to_string(st.t() + dt) + "; reduce dt");
}

std::string DDETrajectory::csv() const {
    std::ostringstream os;
    os << "t,I,dlogIdt,f,g\n";
    for (size_t k = 0; k < traj.t.size(); ++k)
        os << format_double(traj.t[k]) << ',' << format_double(traj.I[k]) << ','
           << format_double(dlogIdt[k]) << ',' << format_double(f[k]) << ','
           << format_double(g[k]) << '\n';
    return os.str();
}

DDETrajectory dde_run(const pde::Model& model, const Profile& xi0, const pde::RunConfig& cfg,
                      const Options& opt) {
    if (!(cfg.T > 0.0) || !(cfg.dt > 0.0)) throw DomainError("dde_run: T and dt must be positive");
    if (cfg.stride < 1) throw DomainError("dde_run: stride must be at least 1");
    const double p = model.p;
    DDEState st(model, xi0, opt);
    DDETrajectory out;
    Trajectory& tr = out.traj;
    tr.p = p;
    tr.label = "dde";
    std::vector<double> grid = cfg.diag.points();
    Equilibrium eq(model.source, p, cfg.monitors);
    const double eps0 = model.functional.eps0;

    // The profile monitors reuse the characteristic engine on the rho history
    // equivalent to the I history (rho = (1 + d log I/dt)/p).
    pde::RhoHistory rh((1.0 + st.records().front().value.dlogI) / p);

    auto sample = [&]() {
        const DDERecord& r = st.records().back();
        tr.t.push_back(r.t);
        tr.rho.push_back((1.0 + r.value.dlogI) / p);
        tr.I.push_back(r.I);
        tr.denom.push_back(r.value.denominator);
        out.dlogIdt.push_back(r.value.dlogI);
        out.f.push_back(r.value.f);
        out.g.push_back(r.value.g);
        out.I_profile.push_back(r.value.I_profile);
        if (!cfg.monitors) return;
        pde::CharPlan plan = pde::build_plan(rh, r.t, opt.nodes_per_interval);
        double dist = 0.0, norm = 0.0, mn = std::numeric_limits<double>::infinity();
        double mx1 = -std::numeric_limits<double>::infinity();
        double sup_hi = 0.0, inf_hi = std::numeric_limits<double>::infinity();
        for (double y : grid) {
            Jet j = pde::eval_refined(rh, plan, model.source, xi0, y);
            if (!std::isfinite(j.d2)) {
                double d = 1e-4 * y;
                j.d2 = (pde::eval_refined(rh, plan, model.source, xi0, y + d).d1 -
                        pde::eval_refined(rh, plan, model.source, xi0, y - d).d1) /
                       (2 * d);
            }
            EquilibriumPoint e = eq.at(y);
            dist = std::max(dist, std::abs(j.v - e.xi) + y * std::abs(j.d1 - e.dxi));
            norm = std::max(norm, std::abs(j.v) + y * std::abs(j.d1) + y * y * std::abs(j.d2));
            mn = std::min(mn, j.v);
            mx1 = std::max(mx1, j.d1);
            if (y >= eps0) {
                sup_hi = std::max(sup_hi, j.v);
                inf_hi = std::min(inf_hi, j.v);
            }
        }
        tr.dist1inf.push_back(dist);
        tr.norm2inf.push_back(norm);
        tr.min_xi.push_back(mn);
        tr.max_dxi.push_back(mx1);
        tr.sup_inf_ratio.push_back(inf_hi > 0.0 ? sup_hi / inf_hi
                                                : std::numeric_limits<double>::infinity());
    };
    auto push_step = [&]() {
        const DDERecord& r = st.records().back();
        tr.step_t.push_back(r.t);
        tr.step_rho.push_back((1.0 + r.value.dlogI) / p);
        tr.step_I.push_back(r.I);
    };

    push_step();
    sample();
    const long nsteps = std::lround(cfg.T / cfg.dt);
    int max_it = 0;
    double l1 = 0.0, gap = 0.0;
    for (long k = 1; k <= nsteps; ++k) {
        dde_step(st, cfg.dt);
        const auto& recs = st.records();
        const DDERecord& r = recs.back();
        max_it = std::max(max_it, r.iterations);
        l1 += 0.5 * cfg.dt * (std::abs(r.value.dlogI) + std::abs(recs[recs.size() - 2].value.dlogI));
        gap = std::max(gap, std::abs(r.I / r.value.I_profile - 1.0));
        rh.push(r.t, (1.0 + st.history().dlog_I(st.history().size() - 1)) / p);
        push_step();
        if (k % cfg.stride == 0 || k == nsteps) sample();
    }
    double Imin = std::numeric_limits<double>::infinity(), Imax = -Imin;
    for (const DDERecord& r : st.records()) {
        Imin = std::min(Imin, r.I);
        Imax = std::max(Imax, r.I);
    }
    tr.summary["I_min"] = Imin;
    tr.summary["I_max"] = Imax;
    tr.summary["max_iterations"] = max_it;
    tr.summary["log_derivative_l1"] = l1;
    tr.summary["profile_I_gap"] = gap;
    return out;
}

// ------------------------------------------------------ constant source ODE

double OdeRun::I(size_t k) const { return I0 * std::pow(I1[k], p); }

void ode_coefficients(const pde::Model& model, const Profile& xi0, const FunctionalRule& rule,
                      const OdePair& x, double t, double& alpha, double& beta) {
    const double p = model.p, hinf = model.source.h_inf();
    const double e = std::exp(t / p), ie = 1.0 / e;
    double I = 0.0, d_one = 0.0, d_gamma = 0.0, d_A = 0.0;
    for (size_t i = 0; i < rule.size(); ++i) {
        const double y = rule.y[i];
        Jet j0 = xi0(e * (x.I1 * y + p * x.I2));
        double xi = ie * j0.v / x.I1 + p * hinf * x.I2 / x.I1;
        double d1 = j0.d1;
        double gam = ie * j0.v / p - (1.0 + y / p) * x.I1 * j0.d1;
        double w = rule.w[i], dI = rule.gradient(i, xi);
        I += w * rule.integrand(i, xi);
        d_one += w * dI;
        d_gamma += w * dI * gam;
        d_A += w * dI * (xi - y * d1);
    }
    double den = p * I + d_A;
    if (!(den > kDenFloor * p * I))
        throw ModelError("denominator fell below the positivity floor at t = " + std::to_string(t));
    alpha = -hinf * d_one / den;
    beta = -d_gamma / den;
}

OdeRun const_h_ode(const pde::Model& model, const Profile& xi0, double T, double dt, int stride,
                   int functional_nodes) {
    if (!model.source.is_constant()) throw DomainError("const_h_ode: source must be constant");
    if (!(T > 0.0) || !(dt > 0.0)) throw DomainError("const_h_ode: T and dt must be positive");
    if (stride < 1) throw DomainError("const_h_ode: stride must be at least 1");
    const double p = model.p;
    FunctionalRule rule(model.functional, functional_nodes);
    OdeRun out;
    out.p = p;
    {
        double I0 = 0.0;
        for (size_t i = 0; i < rule.size(); ++i) I0 += rule.w[i] * rule.integrand(i, xi0(rule.y[i]).v);
        out.I0 = I0;
    }
    auto rhs = [&](double t, const OdePair& x, double* a_out = nullptr, double* b_out = nullptr) {
        double a, b;
        ode_coefficients(model, xi0, rule, x, t, a, b);
        if (a_out) *a_out = a;
        if (b_out) *b_out = b;
        return OdePair{-a * (x.I1 - x.I2) + b, (x.I1 - x.I2) / p};
    };
    auto axpy = [](const OdePair& x, double h, const OdePair& k) {
        return OdePair{x.I1 + h * k.I1, x.I2 + h * k.I2};
    };
    const long n = std::lround(T / dt);
    std::vector<double> ts(n + 1), I1(n + 1), I2(n + 1), al(n + 1), be(n + 1);
    OdePair x;
    for (long k = 0; k <= n; ++k) {
        double t = k * dt;
        OdePair k1 = rhs(t, x, &al[k], &be[k]);
        ts[k] = t;
        I1[k] = x.I1;
        I2[k] = x.I2;
        if (k == n) break;
        OdePair k2 = rhs(t + 0.5 * dt, axpy(x, 0.5 * dt, k1));
        OdePair k3 = rhs(t + 0.5 * dt, axpy(x, 0.5 * dt, k2));
        OdePair k4 = rhs(t + dt, axpy(x, dt, k3));
        x.I1 += dt / 6.0 * (k1.I1 + 2 * k2.I1 + 2 * k3.I1 + k4.I1);
        x.I2 += dt / 6.0 * (k1.I2 + 2 * k2.I2 + 2 * k3.I2 + k4.I2);
        if (!(x.I1 > 0.0) || !std::isfinite(x.I1) || !std::isfinite(x.I2))
            throw NumericError("const_h_ode: step failed at t = " + std::to_string(t + dt));
    }
    out.min_beta = std::numeric_limits<double>::infinity();
    for (long k = 0; k <= n; ++k) {
        out.C1 = std::max(out.C1, be[k] * std::exp(ts[k] / p));
        out.min_beta = std::min(out.min_beta, be[k]);
        if (k > 0 && k < n) {
            double d = (I2[k + 1] - I2[k - 1]) / (2 * dt);
            out.i2_residual = std::max(out.i2_residual, std::abs(d - (I1[k] - I2[k]) / p));
        }
    }
    const double J0 = std::abs(I1[0] - I2[0]);
    out.envelope_excess = -std::numeric_limits<double>::infinity();
    for (long k = 0; k <= n; ++k) {
        double J = I1[k] - I2[k];
        double bound = (J0 + out.C1 * ts[k]) * std::exp(-ts[k] / p);
        out.envelope_excess = std::max(out.envelope_excess, std::abs(J) - bound);
        if (k % stride == 0 || k == n) {
            out.t.push_back(ts[k]);
            out.I1.push_back(I1[k]);
            out.I2.push_back(I2[k]);
            out.J.push_back(J);
            out.alpha.push_back(al[k]);
            out.beta.push_back(be[k]);
        }
    }
    return out;
}

}  // namespace nlt::dde
