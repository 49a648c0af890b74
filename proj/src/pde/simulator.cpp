#include "nlt/pde/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nlt/core/errors.hpp"

namespace nlt::pde {

LagrangianState::LagrangianState(Model model, Profile xi0, StepOptions opt)
    : model_(std::move(model)), xi0_(std::move(xi0)), opt_(opt), hist_(0.0),
      rule_(model_.functional, opt.functional_nodes) {
    h_nodes_.resize(rule_.size());
    for (size_t i = 0; i < rule_.size(); ++i) h_nodes_[i] = model_.source.eval(rule_.y[i], 0);
    RhoValue v0 = rho_from_plan(build_plan(hist_, 0.0, opt_.nodes_per_interval));
    hist_ = RhoHistory(v0.rho);
    records_.push_back({0.0, v0.rho, v0.I, v0.numerator, v0.denominator, 0});
}

RhoValue LagrangianState::rho_from_plan(const CharPlan& plan) const {
    const double p = model_.p;
    double I = 0.0, gn = 0.0, gd = 0.0;
    for (size_t i = 0; i < rule_.size(); ++i) {
        double y = rule_.y[i], xi, d1;
        eval_plan(plan, model_.source, xi0_, y, xi, d1);
        double w = rule_.w[i];
        double g = rule_.gradient(i, xi);
        I += w * rule_.integrand(i, xi);
        gn += w * g * (h_nodes_[i] + d1);
        gd += w * g * (xi - y * d1);
    }
    RhoValue r;
    r.I = I;
    r.numerator = I + gn;
    r.denominator = p * I + gd;
    if (!(r.denominator > kDenFloor * p * I))
        throw ModelError("denominator pI + <dI, A xi> = " + std::to_string(r.denominator) +
                         " fell below the positivity floor at t = " + std::to_string(plan.t));
    r.rho = r.numerator / r.denominator;
    return r;
}

RhoValue LagrangianState::trial_rho(double dt, double trial) {
    double t1 = hist_.t_last() + dt;
    hist_.push(t1, trial);
    RhoValue v;
    try {
        v = rho_from_plan(build_plan(hist_, t1, opt_.nodes_per_interval));
    } catch (...) {
        hist_.pop();
        throw;
    }
    hist_.pop();
    return v;
}

void LagrangianState::commit(double dt, double rho, const RhoValue& at, int iterations) {
    double t1 = hist_.t_last() + dt;
    hist_.push(t1, rho);
    records_.push_back({t1, rho, at.I, at.numerator, at.denominator, iterations});
}

Jet LagrangianState::xi_eval(double y, double t) const {
    if (!(y > 0.0)) throw DomainError("xi_eval: y must be positive");
    if (t < 0.0 || t > hist_.t_last()) throw DomainError("xi_eval: t outside the committed history");
    CharPlan plan = build_plan(hist_, t, opt_.nodes_per_interval);
    return eval_refined(hist_, plan, model_.source, xi0_, y);
}

Profile LagrangianState::profile_at(double t) const {
    if (t < 0.0 || t > hist_.t_last()) throw DomainError("profile_at: t outside the committed history");
    auto hist = std::make_shared<RhoHistory>(hist_);
    auto plan = std::make_shared<CharPlan>(build_plan(hist_, t, opt_.nodes_per_interval));
    Profile prof;
    SourceFn src = model_.source;
    Profile xi0 = xi0_;
    prof.eval = [hist, plan, src, xi0](double y) { return eval_refined(*hist, *plan, src, xi0, y); };
    prof.descriptor = "lagrangian";
    prof.decreasing = xi0_.decreasing;
    return prof;
}

void step(LagrangianState& state, double dt) {
    if (!(dt > 0.0)) throw DomainError("step: dt must be positive");
    const StepOptions& o = state.options();
    const auto& recs = state.records();
    double x = recs.back().rho;
    if (recs.size() >= 2) {
        // linear extrapolation; scaled for a change of step
        const StepRecord& a = recs[recs.size() - 2];
        const StepRecord& b = recs.back();
        x = b.rho + (b.rho - a.rho) * dt / (b.t - a.t);
    }
    RhoValue v = state.trial_rho(dt, x);
    double r = v.rho - x;
    double x_prev = 0.0, r_prev = 0.0;
    bool have_prev = false;
    for (int it = 1; it <= o.max_iter; ++it) {
        if (std::abs(r) < o.tol) {
            state.commit(dt, v.rho, v, it);
            return;
        }
        double xn;
        if (it <= o.damp_after) {
            xn = v.rho;
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
        v = state.trial_rho(dt, x);
        r = v.rho - x;
    }
    throw StepError("fixed point for rho did not converge in " + std::to_string(o.max_iter) +
                    " iterations at t = " + std::to_string(state.t() + dt) + "; reduce dt");
}

Trajectory run(const Model& model, const Profile& xi0, const RunConfig& cfg,
               const StepOptions& opt) {
    if (!(cfg.T > 0.0) || !(cfg.dt > 0.0)) throw DomainError("run: T and dt must be positive");
    if (cfg.stride < 1) throw DomainError("run: stride must be at least 1");
    LagrangianState st(model, xi0, opt);
    Equilibrium eq(model.source, model.p, true);
    Trajectory tr;
    tr.p = model.p;
    tr.label = "pde";
    std::vector<double> grid = cfg.diag.points();
    const double eps0 = model.functional.eps0;

    auto sample = [&]() {
        const StepRecord& r = st.records().back();
        tr.t.push_back(r.t);
        tr.rho.push_back(r.rho);
        tr.I.push_back(r.I);
        tr.denom.push_back(r.denominator);
        if (!cfg.monitors) return;
        CharPlan plan = build_plan(st.history(), r.t, opt.nodes_per_interval);
        double dist = 0.0, norm = 0.0, mn = std::numeric_limits<double>::infinity();
        double mx1 = -std::numeric_limits<double>::infinity();
        double sup_hi = 0.0, inf_hi = std::numeric_limits<double>::infinity();
        for (double y : grid) {
            Jet j = eval_refined(st.history(), plan, model.source, st.xi0(), y);
            if (!std::isfinite(j.d2)) {
                double d = 1e-4 * y;
                j.d2 = (eval_refined(st.history(), plan, model.source, st.xi0(), y + d).d1 -
                        eval_refined(st.history(), plan, model.source, st.xi0(), y - d).d1) /
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
        tr.sup_inf_ratio.push_back(inf_hi > 0.0 ? sup_hi / inf_hi : std::numeric_limits<double>::infinity());
    };

    auto push_step = [&]() {
        const StepRecord& r = st.records().back();
        tr.step_t.push_back(r.t);
        tr.step_rho.push_back(r.rho);
        tr.step_I.push_back(r.I);
    };

    push_step();
    sample();
    const long nsteps = std::lround(cfg.T / cfg.dt);
    int max_it = 0;
    for (long k = 1; k <= nsteps; ++k) {
        step(st, cfg.dt);
        max_it = std::max(max_it, st.records().back().iterations);
        push_step();
        if (k % cfg.stride == 0 || k == nsteps) sample();
    }

    // drift bound: |int_s^t (rho - 1/p)| <= (1/p) log(I_max / I_min)
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    double Imin = lo, Imax = -lo;
    const RhoHistory& h = st.history();
    for (size_t k = 0; k < h.size(); ++k) {
        double q = h.R(k) - h.t(k) / model.p;
        lo = std::min(lo, q);
        hi = std::max(hi, q);
        Imin = std::min(Imin, st.records()[k].I);
        Imax = std::max(Imax, st.records()[k].I);
    }
    tr.summary["drift_lhs"] = hi - lo;
    tr.summary["drift_rhs"] = std::log(Imax / Imin) / model.p;
    tr.summary["I_min"] = Imin;
    tr.summary["I_max"] = Imax;
    tr.summary["max_iterations"] = max_it;
    return tr;
}

}  // namespace nlt::pde
