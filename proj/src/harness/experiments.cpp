#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "internal.hpp"
#include "nlt/control/control.hpp"
#include "nlt/core/equilibrium.hpp"
#include "nlt/core/errors.hpp"
#include "nlt/core/fit.hpp"
#include "nlt/core/trajectory.hpp"
#include "nlt/dde/dde.hpp"
#include "nlt/linstab/linstab.hpp"
#include "nlt/volterra/volterra.hpp"

namespace nlt::harness {

using nlohmann::json;
using detail::flag;
using detail::integer;
using detail::num;

namespace {

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string table(const std::string& header, const std::vector<const std::vector<double>*>& cols) {
    std::ostringstream os;
    os << header << '\n';
    size_t n = cols.empty() ? 0 : cols.front()->size();
    for (size_t i = 0; i < n; ++i) {
        for (size_t c = 0; c < cols.size(); ++c) {
            if (c) os << ',';
            os << (i < cols[c]->size() ? format_double((*cols[c])[i]) : std::string("nan"));
        }
        os << '\n';
    }
    return os.str();
}

std::vector<double> doubles(const Scenario& s, const char* k) { return s.params.at(k).get<std::vector<double>>(); }

pde::RunConfig run_config(const Scenario& s, bool monitors) {
    pde::RunConfig rc;
    rc.T = s.run.T;
    rc.dt = s.run.dt;
    rc.stride = s.run.stride;
    rc.monitors = monitors;
    return rc;
}

// a xi_p e^{-y}
Profile bump(const Equilibrium& eq, double a) {
    Profile prof;
    prof.eval = [eq, a](double y) {
        EquilibriumPoint e = eq.at(y);
        double ex = std::exp(-y);
        return Jet{a * e.xi * ex, a * (e.dxi - e.xi) * ex, a * (e.d2xi - 2 * e.dxi + e.xi) * ex};
    };
    prof.descriptor = "bump";
    return prof;
}

double max_rel_gap(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw NumericError("route comparison: sample counts differ");
    double g = 0.0;
    for (size_t k = 0; k < a.size(); ++k) g = std::max(g, std::abs(a[k] / b[k] - 1.0));
    return g;
}

double tail_oscillation(const std::vector<double>& t, const std::vector<double>& v, double from) {
    double lo = HUGE_VAL, hi = -HUGE_VAL;
    for (size_t k = 0; k < t.size(); ++k)
        if (t[k] >= from) {
            lo = std::min(lo, v[k]);
            hi = std::max(hi, v[k]);
        }
    return hi >= lo ? hi - lo : 0.0;
}

// ------------------------------------------------------------------ equilibrium

void equilibrium(const Scenario& s, Result& r) {
    pde::Model m = build_model(s.model);
    SourceReport sr = check_source(m.source);
    Equilibrium eq(m.source, m.p);
    RhoValue rv = rho(m.functional, m.source, m.p, eq.profile());
    double err = std::abs(rv.rho - 1.0 / m.p);
    r.metrics = {{"rho", rv.rho},
                 {"expected", 1.0 / m.p},
                 {"numerator", rv.numerator},
                 {"denominator", rv.denominator},
                 {"I", rv.I},
                 {"source_ok", sr.ok},
                 {"source_message", sr.message}};
    r.check_le("rho_identity", err, m.source.is_constant() ? num(s, "tol_constant") : num(s, "tol"));
    LogGrid grid{num(s, "y_min"), num(s, "y_max"), integer(s, "n")};
    std::vector<double> y = grid.points(), xi, dxi, Axi, resid;
    for (double yy : y) {
        EquilibriumPoint e = eq.at(yy);
        xi.push_back(e.xi);
        dxi.push_back(e.dxi);
        Axi.push_back(e.Axi);
        resid.push_back(apply_AB(Jet{e.xi, e.dxi, e.d2xi}, m.p, yy).B - m.source.eval(yy, 0));
    }
    r.csv["profile"] = table("y,xi,dxi,Axi,Bxi_minus_h", {&y, &xi, &dxi, &Axi, &resid});
}

// ------------------------------------------------------------------ pde / dde

void simulate_pde(const Scenario& s, Result& r) {
    pde::Model m = build_model(s.model);
    Profile xi0 = build_initial(s, m);
    pde::StepOptions opt;
    opt.nodes_per_interval = integer(s, "nodes_per_interval");
    opt.functional_nodes = integer(s, "functional_nodes");
    pde::RunConfig rc = run_config(s, flag(s, "monitors"));
    Trajectory tr = pde::run(m, xi0, rc, opt);
    double res = log_derivative_residual(tr);
    r.metrics = {{"log_derivative_residual", res}, {"I_end", tr.I.back()}, {"rho_end", tr.rho.back()},
                 {"summary", tr.summary}};
    r.csv["trajectory"] = tr.csv();
    r.check_lt("log_derivative_residual", res, num(s, "residual_tol"));
    if (flag(s, "refine")) {
        rc.dt *= 0.5;
        rc.stride *= 2;
        rc.monitors = false;
        double half = log_derivative_residual(pde::run(m, xi0, rc, opt));
        r.metrics["log_derivative_residual_half_dt"] = half;
        r.check_ge("residual_ratio", res / half, num(s, "ratio_min"));
    }
}

dde::Options dde_options(const Scenario& s) {
    dde::Options o;
    std::string interp = s.params.at("interp"), rule = s.params.at("rule");
    if (interp == "linear")
        o.interp = dde::LogInterp::linear;
    else if (interp == "quadratic")
        o.interp = dde::LogInterp::quadratic;
    else
        throw ConfigError("params.interp: expected linear or quadratic");
    if (rule == "adams")
        o.rule = dde::TimeRule::adams_moulton;
    else if (rule == "trapezoid")
        o.rule = dde::TimeRule::trapezoid;
    else
        throw ConfigError("params.rule: expected adams or trapezoid");
    return o;
}

void simulate_dde(const Scenario& s, Result& r) {
    pde::Model m = build_model(s.model);
    Profile xi0 = build_initial(s, m);
    pde::RunConfig rc = run_config(s, flag(s, "monitors"));
    auto t0 = Clock::now();
    dde::DDETrajectory d = dde::dde_run(m, xi0, rc, dde_options(s));
    r.timings["dde"] = since(t0);
    r.metrics = {{"I_end", d.traj.I.back()}, {"summary", d.traj.summary}};
    r.csv["trajectory"] = d.csv();
    if (flag(s, "compare_pde")) {
        rc.monitors = false;
        t0 = Clock::now();
        Trajectory P = pde::run(m, xi0, rc);
        r.timings["pde"] = since(t0);
        double gap = max_rel_gap(P.I, d.traj.I);
        r.metrics["pde_dde_rel_gap"] = gap;
        r.csv["compare"] = table("t,I_pde,I_dde", {&P.t, &P.I, &d.traj.I});
        r.check_lt("pde_dde_rel_gap", gap, num(s, "rel_tol"));
    }
}

void const_h_ode(const Scenario& s, Result& r) {
    pde::Model m = build_model(s.model);
    if (!m.source.is_constant()) throw ConfigError("const-h-ode: model.source.kind must be constant");
    Profile xi0 = build_initial(s, m);
    dde::OdeRun o = dde::const_h_ode(m, xi0, s.run.T, s.run.dt, s.run.stride);
    Trajectory P = pde::run(m, xi0, run_config(s, false));
    std::vector<double> I(o.t.size());
    for (size_t k = 0; k < I.size(); ++k) I[k] = o.I(k);
    double gap = max_rel_gap(I, P.I);
    r.metrics = {{"C1", o.C1},
                 {"envelope_excess", o.envelope_excess},
                 {"min_beta", o.min_beta},
                 {"i2_residual", o.i2_residual},
                 {"ode_pde_rel_gap", gap}};
    std::vector<double> env(o.t.size());
    for (size_t k = 0; k < env.size(); ++k)
        env[k] = (std::abs(o.J.front()) + o.C1 * o.t[k]) * std::exp(-o.t[k] / m.p);
    r.csv["ode"] = table("t,I1,I2,J,alpha,beta,envelope,I_pde", {&o.t, &o.I1, &o.I2, &o.J, &o.alpha, &o.beta, &env, &P.I});
    r.check_le("envelope_excess", o.envelope_excess, num(s, "envelope_tol"));
    r.check_lt("ode_pde_rel_gap", gap, num(s, "rel_tol"));
}

// Rate of a series that decays to a discretisation floor: samples after the last
// time the series exceeds floor_factor * (final value) are dropped.
RateFit floor_cut_fit(const std::vector<double>& t, const std::vector<double>& v, double floor_factor,
                      double window, double& t_cut) {
    double floor = v.back() * floor_factor;
    size_t last = v.size() - 1;
    if (floor > 0.0)
        while (last > 0 && !(v[last] > floor)) --last;
    t_cut = t[last];
    std::vector<double> tt(t.begin(), t.begin() + static_cast<long>(last) + 1),
        vv(v.begin(), v.begin() + static_cast<long>(last) + 1);
    return fit_rate(tt, vv, window);
}

void convergence(const Scenario& s, Result& r) {
    pde::Model m = build_model(s.model);
    pde::RunConfig rc = run_config(s, true);
    json cases = json::array();
    for (double ratio : doubles(s, "p_prime_ratios")) {
        std::string label = "pp" + format_double(ratio);
        InitialSpec is;
        is.p_prime = ratio * m.p;
        auto t0 = Clock::now();
        Trajectory tr = pde::run(m, make_initial(is, m.source, m.p), rc);
        r.timings[label] = since(t0);
        double t_cut = 0.0;
        RateFit f = floor_cut_fit(tr.t, tr.dist1inf, num(s, "floor_factor"), num(s, "window"), t_cut);
        double osc = tail_oscillation(tr.t, tr.I, (1.0 - num(s, "tail_fraction")) * rc.T);
        cases.push_back({{"p_prime_ratio", ratio},
                         {"rate", f.rate},
                         {"r2", f.r2},
                         {"samples", f.samples},
                         {"t_cut", t_cut},
                         {"dist_end", tr.dist1inf.back()},
                         {"tail_oscillation", osc},
                         {"I_end", tr.I.back()}});
        r.csv[label] = tr.csv();
        r.check_ge("rate_" + label, f.rate, 1.0 / (num(s, "rate_factor") * m.p));
        r.check_lt("tail_osc_" + label, osc, num(s, "tail_tol"));
    }
    r.metrics["cases"] = cases;
}

// ------------------------------------------------------------------ linear stability

void linear_stability(const Scenario& s, Result& r) {
    pde::Model m = build_model(s.model);
    const double p = m.p;
    linstab::LinearKernel lk(m, integer(s, "nodes"));
    r.metrics["Ip"] = lk.Ip();
    r.metrics["denom"] = lk.denom();
    if (flag(s, "certificate")) {
        auto t0 = Clock::now();
        linstab::KernelCertificate c = linstab::certify_kernel(lk, num(s, "t_factor") * p, integer(s, "n"),
                                                               num(s, "margin_tol"));
        r.timings["certificate"] = since(t0);
        double worst = *std::min_element(c.margin.begin(), c.margin.end());
        r.metrics["certificate"] = {{"min_K", c.min_K},
                                    {"max_increase", c.max_increase},
                                    {"max_derivative_margin", c.max_derivative_margin},
                                    {"min_margin", worst}};
        r.csv["kernel"] = c.csv();
        r.check_gt("kernel_min_K", c.min_K, 0.0);
        r.check_ge("kernel_monotone_margin", worst, -num(s, "margin_tol"));
    }
    if (flag(s, "laplace")) {
        auto t0 = Clock::now();
        linstab::LaplaceReport lr = linstab::laplace_condition(lk, -1.0 / (num(s, "laplace_q") * p));
        r.timings["laplace"] = since(t0);
        r.metrics["laplace"] = {{"winding", lr.winding},
                                {"min_abs", lr.min_abs},
                                {"max_tail", lr.max_tail},
                                {"conclusive", lr.conclusive},
                                {"status", lr.status}};
        r.check_in("laplace_winding", lr.winding, 0.0, 0.0);
        r.check_ge("laplace_conclusive", lr.conclusive ? 1.0 : 0.0, 1.0);
    }
    if (flag(s, "decay")) {
        auto t0 = Clock::now();
        linstab::LinearEvolution ev =
            linstab::linear_evolve(lk, bump(lk.equilibrium(), num(s, "amplitude")), s.run.T, s.run.dt, s.run.stride);
        r.timings["decay"] = since(t0);
        r.metrics["decay"] = {{"rate", ev.fit.rate}, {"r2", ev.fit.r2}, {"samples", ev.fit.samples},
                              {"q_over_p", 1.0 / (ev.fit.rate * p)}};
        r.csv["linear_norm"] = table("t,norm1inf", {&ev.t_norm, &ev.norm});
        r.check_in("linear_decay_rate", ev.fit.rate, 1.0 / (num(s, "rate_lo_factor") * p),
                   1.0 / (num(s, "rate_hi_factor") * p));
    }
    if (flag(s, "gap")) {
        auto t0 = Clock::now();
        pde::StepOptions opt;
        opt.functional_nodes = 256;
        std::vector<double> amps = doubles(s, "gap_amplitudes"), gaps;
        if (amps.size() < 2) throw ConfigError("params.gap_amplitudes: need at least two amplitudes");
        for (double a : amps)
            gaps.push_back(linstab::linearization_gap(lk, bump(lk.equilibrium(), a), num(s, "gap_T"), s.run.dt, 25,
                                                      {1e-2, 1e2, 21}, opt)
                               .profile_gap);
        r.timings["gap"] = since(t0);
        // least squares slope of log gap against log amplitude
        double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < amps.size(); ++i) {
            double x = std::log(amps[i]), y = std::log(gaps[i]);
            n += 1, sx += x, sy += y, sxx += x * x, sxy += x * y;
        }
        double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        r.metrics["gap"] = {{"amplitudes", amps}, {"profile_gaps", gaps}, {"slope", slope}};
        r.check_in("gap_slope", slope, 2.0 - num(s, "slope_tol"), 2.0 + num(s, "slope_tol"));
    }
}

// ------------------------------------------------------------------ volterra

void volterra_demo(const Scenario& s, Result& r) {
    if (flag(s, "closed_form")) {
        auto t0 = Clock::now();
        auto prob = volterra::VolterraProblem::invariant([](double x) { return std::exp(-x); },
                                                         [](double) { return 1.0; }, num(s, "cf_T"), num(s, "cf_dt"));
        volterra::Series u = volterra::solve(prob);
        volterra::Resolvent res = volterra::resolvent(prob);
        volterra::Reconstruction rec = volterra::reconstruct(prob, res);
        std::vector<double> ue, rv, re;
        double eu = 0.0, er = 0.0;
        for (size_t n = 0; n < u.t.size(); ++n) {
            double e2 = std::exp(-2.0 * u.t[n]);
            ue.push_back(0.5 * (1.0 + e2));
            rv.push_back(res(n, 0));
            re.push_back(e2);
            eu = std::max(eu, std::abs(u.v[n] - ue.back()));
            er = std::max(er, std::abs(rv.back() - e2));
        }
        r.timings["closed_form"] = since(t0);
        r.metrics["closed_form"] = {{"u_error", eu}, {"resolvent_error", er}, {"reconstruction_residual", rec.residual},
                                    {"plain_reconstruction_residual", rec.plain_residual}};
        r.csv["closed_form"] = table("t,u,u_exact,r,r_exact", {&u.t, &u.v, &ue, &rv, &re});
        r.check_lt("u_error", eu, num(s, "cf_tol"));
        r.check_lt("resolvent_error", er, num(s, "cf_tol"));
        r.check_lt("reconstruction_residual", rec.residual, num(s, "reconstruction_tol"));
    }
    if (flag(s, "gripenberg")) {
        auto t0 = Clock::now();
        double c = num(s, "gr_c");
        auto prob = volterra::VolterraProblem::invariant([c](double x) { return c * std::exp(-x); },
                                                         [](double) { return 1.0; }, num(s, "gr_T"), num(s, "gr_dt"));
        volterra::GripenbergReport g = volterra::gripenberg_check(prob, {1.0, 2.0, 5.0, 10.0});
        double lo = HUGE_VAL, hi = 0.0;
        std::vector<double> t;
        for (size_t n = 0; n < g.r_l1.size(); ++n) {
            t.push_back(prob.time(n));
            if (t.back() >= num(s, "gr_from") - 1e-12) {
                lo = std::min(lo, g.r_l1[n]);
                hi = std::max(hi, g.r_l1[n]);
            }
        }
        double drift = hi > 0.0 ? (hi - lo) / hi : 0.0;
        r.timings["gripenberg"] = since(t0);
        r.metrics["gripenberg"] = {{"r_l1_sup", g.r_l1_sup}, {"relative_drift", drift}, {"tail_condition", g.tail_condition},
                                   {"nonnegative", g.nonnegative}, {"decreasing_in_t", g.decreasing_in_t},
                                   {"flags", g.flags}};
        r.csv["gripenberg"] = table("t,r_l1", {&t, &g.r_l1});
        r.check_lt("gripenberg_l1_drift", drift, num(s, "gr_tol"));
    }
    if (flag(s, "linear_dde")) {
        auto t0 = Clock::now();
        json runs = json::array();
        double a = num(s, "ld_a"), rate = num(s, "ld_rate");
        for (double f0 : doubles(s, "ld_forcings")) {
            volterra::LinearDDEProblem prob{[a](double) { return a; },
                                            [rate](double t, double sv) { return std::exp(-rate * (t - sv)); },
                                            [f0](double t) { return f0 * std::exp(-t); }, num(s, "ld_I0")};
            volterra::LinearDDEReport rep = volterra::linear_dde_solve(prob, num(s, "ld_T"), num(s, "ld_dt"));
            std::string label = "f" + format_double(f0);
            runs.push_back({{"forcing", f0}, {"tail_oscillation", rep.tail_oscillation}, {"route_gap", rep.route_gap},
                            {"sup_abs", rep.sup_abs}, {"I_end", rep.I.v.back()}});
            r.csv["linear_dde_" + label] = table("t,I,I_volterra", {&rep.I.t, &rep.I.v, &rep.I_volterra.v});
            r.check_lt("tail_osc_" + label, rep.tail_oscillation, num(s, "osc_tol"));
        }
        r.timings["linear_dde"] = since(t0);
        r.metrics["linear_dde"] = runs;
    }
}

// ------------------------------------------------------------------ control

control::PiecewiseControl random_control(const control::ControlProblem& pr, int n, std::mt19937_64& rng,
                                         bool linear) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    control::PiecewiseControl v;
    v.linear = linear;
    for (int j = 0; j <= n; ++j) v.breakpoints.push_back(pr.t + (pr.T - pr.t) * j / n);
    for (int j = 0; j < (linear ? n + 1 : n); ++j)
        v.values.push_back(control::is_max(pr.variant) ? std::exp(-3.0 * U(rng)) : std::exp(2.0 * U(rng)));
    return v;
}

// max(|value jump - mean slope * dx|, |slope jump|) across x = edge
double c1_residual(control::ControlProblem pr, double edge) {
    control::ControlProblem lo = pr, hi = pr;
    lo.x = edge * (1 - 1e-8);
    hi.x = edge * (1 + 1e-8);
    control::Value a = control::value(lo), b = control::value(hi);
    double jump = b.q - a.q - (hi.x - lo.x) * 0.5 * (a.dq_dx + b.dq_dx);
    return std::max(std::abs(jump), std::abs(b.dq_dx - a.dq_dx));
}

void control_verify(const Scenario& s, Result& r) {
    using namespace control;
    pde::Model m = build_model(s.model);
    const double p = m.p, y = num(s, "y"), T = num(s, "T"), t = num(s, "t");
    std::vector<Variant> vs;
    for (const auto& name : s.params.at("variants")) vs.push_back(parse_variant(name.get<std::string>()));
    auto problem = [&](Variant v, const Payoff& g, double frac) {
        ControlProblem pr{v, g, p, y, T, t, 0.0};
        pr.x = pr.interior_point(frac);
        pr.validate();
        return pr;
    };
    std::mt19937_64 rng(s.seed);

    if (flag(s, "constant")) {
        auto t0 = Clock::now();
        const double g0 = num(s, "g0");
        double worst = 0.0;
        for (Variant v : vs) {
            Payoff g = Payoff::constant(g0);
            auto expected = [&](const ControlProblem& pr, double x) {
                return is_weighted(v) ? g0 * (std::exp(-(pr.T - pr.t) / pr.p) * x - pr.y) : (pr.T - pr.t) * g0;
            };
            for (double f : {0.1, 0.5, 0.9}) {
                ControlProblem pr = problem(v, g, f);
                worst = std::max(worst, std::abs(value(pr).q - expected(pr, pr.x)));
            }
            ControlProblem pr = problem(v, g, 0.4);
            for (int k = 0; k < 20; ++k) {
                PiecewiseControl c = random_control(pr, 12, rng, k % 2 == 1);
                worst = std::max(worst, std::abs(payoff(pr, c) - expected(pr, trajectory_x(pr, c, pr.t))));
            }
            DPResult dp = brute_force(pr, 32, 128, 5);
            if (!dp.feasible) throw NumericError("constant payoff DP infeasible for " + to_string(v));
            worst = std::max(worst, std::abs(dp.value - expected(pr, pr.x)));
        }
        r.timings["constant"] = since(t0);
        r.metrics["constant_payoff_error"] = worst;
        r.check_le("constant_payoff_exact", worst, num(s, "exact_tol"));
    }

    if (flag(s, "sample")) {
        auto t0 = Clock::now();
        json out = json::object();
        std::vector<double> fracs = doubles(s, "sample_fracs");
        int per = std::max(1, integer(s, "samples") / static_cast<int>(fracs.size()));
        std::uint64_t seed = s.seed;
        for (Variant v : vs) {
            Payoff g = source_payoff(v, m.source, p, y);
            HypothesisReport h = check_hypotheses(v, g);
            r.check_ge("hypotheses_" + to_string(v), h.ok ? 1.0 : 0.0, 1.0);
            if (!h.ok) r.message += to_string(v) + ": hypothesis fails: " + h.failed + "; ";
            double worst = HUGE_VAL;
            int n = 0;
            for (double f : fracs) {
                SampleReport sr = sample_controls(problem(v, g, f), per, ++seed);
                worst = std::min(worst, sr.worst_margin);
                n += sr.n;
            }
            out[to_string(v)] = {{"samples", n}, {"worst_margin", worst}};
            r.check_ge("sampled_margin_" + to_string(v), worst, -num(s, "margin_tol"));
        }
        r.timings["sample"] = since(t0);
        r.metrics["sampling"] = out;
    }

    if (flag(s, "dp")) {
        auto t0 = Clock::now();
        std::vector<double> steps = doubles(s, "dp_steps");
        int shrinking = 0, total = 0;
        double wrong_side = -HUGE_VAL;
        std::vector<double> cv, cf, cn, cval, cq;
        json scen = json::array();
        for (Variant v : vs) {
            Payoff g = source_payoff(v, m.source, p, y);
            for (double f : doubles(s, is_max(v) ? "dp_fracs_max" : "dp_fracs_min")) {
                ControlProblem pr = problem(v, g, f);
                double q = value(pr).q, prev = HUGE_VAL;
                bool mono = true;
                json gaps = json::array();
                DPResult last;
                for (double n : steps) {
                    int ns = static_cast<int>(n);
                    last = brute_force(pr, ns, ns * integer(s, "dp_nodes_per_step"), integer(s, "dp_v_levels"));
                    double gap = std::abs(last.value - q);
                    mono = mono && last.feasible && gap < prev;
                    prev = gap;
                    gaps.push_back(last.value - q);
                    cv.push_back(static_cast<double>(v));
                    cf.push_back(f);
                    cn.push_back(n);
                    cval.push_back(last.value);
                    cq.push_back(q);
                }
                wrong_side = std::max(wrong_side, is_max(v) ? last.value - q : q - last.value);
                ++total;
                shrinking += mono;
                scen.push_back({{"variant", to_string(v)}, {"frac", f}, {"closed_form", q}, {"signed_gaps", gaps},
                                {"monotone", mono}, {"saturated", last.saturated},
                                {"bang_bang_fraction", last.bang_bang_fraction}});
            }
        }
        r.timings["dp"] = since(t0);
        r.metrics["dp"] = {{"scenarios", scen}, {"monotone", shrinking}, {"total", total}};
        r.csv["dp"] = table("variant,frac,steps,dp_value,closed_form", {&cv, &cf, &cn, &cval, &cq});
        if (total > 0) {
            r.check_ge("dp_monotone_fraction", static_cast<double>(shrinking) / total, num(s, "dp_required"));
            r.check_le("dp_wrong_side", wrong_side, num(s, "dp_side_tol"));
        }
    }

    if (flag(s, "certificate")) {
        auto t0 = Clock::now();
        int n = integer(s, "cert_samples");
        double ct = num(s, "cert_t"), cy = num(s, "cert_y"), vmax = num(s, "cert_vmax"), tol = num(s, "cert_tol");
        Certificate below = extremality_certificate(m, ct, cy, n, false, s.seed, vmax, tol);
        Certificate above = extremality_certificate(m, ct, cy, n, true, s.seed + 1, vmax, tol);
        r.timings["certificate"] = since(t0);
        r.metrics["certificates"] = {json::parse(below.to_json()), json::parse(above.to_json())};
        r.check_ge("certificate_below", below.worst_margin, -tol);
        r.check_ge("certificate_above", above.worst_margin, -tol);
    }

    if (flag(s, "gradient")) {
        auto t0 = Clock::now();
        double c1 = 0.0;
        bool any_min = false;
        json stat = json::object();
        for (Variant v : vs) {
            Payoff g = source_payoff(v, m.source, p, y);
            double lo = HUGE_VAL;
            for (int k = 1; k < 20; ++k) lo = std::min(lo, value(problem(v, g, 0.05 * k)).dq_dx);
            r.check_ge("dq_dx_min_" + to_string(v), lo, 0.0);
            StationarityReport st = stationarity_check(problem(v, g, 0.5));
            stat[to_string(v)] = st.min_grad;
            r.check_ge("stationarity_" + to_string(v), st.min_grad, 0.0);
            ControlProblem pr = problem(v, g, 0.5);
            if (v == Variant::min1inf) {
                any_min = true;
                c1 = std::max(c1, c1_residual(pr, min_unweighted_lambda_path(pr, pr.y, pr.t)));
            } else if (v == Variant::min1infw) {
                any_min = true;
                CharMap F(g);
                WeightedMinGeometry geo = weighted_min_geometry(pr, F);
                c1 = std::max(c1, c1_residual(pr, geo.lambda_boundary));
                if (geo.flat_boundary > pr.lower()) c1 = std::max(c1, c1_residual(pr, geo.flat_boundary));
            }
            if (flag(s, "sweep")) r.csv["sweep_" + to_string(v)] = value_sweep_csv(pr, 8, 16);
        }
        r.timings["gradient"] = since(t0);
        r.metrics["stationarity_min_grad"] = stat;
        if (any_min) {
            r.metrics["c1_residual"] = c1;
            r.check_lt("c1_patching", c1, num(s, "c1_tol"));
        }
    }
}

// ------------------------------------------------------------------ gradients

void gradients(const Scenario& s, Result& r) {
    pde::Model m = build_model(s.model);
    const double p = m.p, eps = num(s, "eps");
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);

    // dI against central differences along random directions
    std::vector<Profile> profiles = {Equilibrium(m.source, p, true).profile(),
                                     make_initial(InitialSpec{"equilibrium", 1.5 * p}, m.source, p)};
    double worst_I = 0.0;
    for (int k = 0; k < integer(s, "dI_trials"); ++k) {
        double a = 0.2 + U(rng), b = 0.3 + 3.0 * U(rng), c = U(rng), d = 1.0 + U(rng);
        auto phi = [=](double yy) { return a * std::exp(-yy / b) + c / std::pow(1.0 + yy, d); };
        const Profile& z = profiles[static_cast<size_t>(k) % profiles.size()];
        auto shifted = [&](double e) {
            Profile zp = z;
            zp.eval = [&z, phi, e](double yy) {
                Jet j = z(yy);
                j.v += e * phi(yy);
                return j;
            };
            return functional_I(m.functional, zp);
        };
        double fd = (shifted(eps) - shifted(-eps)) / (2 * eps);
        double an = inner_dI(m.functional, z, phi);
        worst_I = std::max(worst_I, std::abs(fd / an - 1.0));
    }
    r.metrics["dI_rel_error"] = worst_I;
    r.check_lt("dI_rel_error", worst_I, num(s, "dI_tol"));

    // dF against differences of a log I node
    const double dt = 0.01, Tm = 4.0;
    auto Ifn = [](double sv) { return 0.25 * (1.0 + 0.3 * std::sin(1.3 * sv) * std::exp(-0.3 * sv)); };
    dde::IHistory base(Ifn(0.0), 0.0, dde::LogInterp::linear);
    long nsteps = std::lround(Tm / dt);
    for (long k = 1; k <= nsteps; ++k) base.push(k * dt, Ifn(k * dt));
    double worst_F = 0.0;
    for (int trial = 0; trial < integer(s, "dF_trials"); ++trial) {
        long nt = std::lround((1.0 + (Tm - 1.0) * U(rng)) / dt);
        double tt = nt * dt;
        long k = std::max<long>(1, std::lround((0.05 + 0.9 * U(rng)) * nt));
        double tau = k * dt;
        double yy = std::exp(std::log(0.05) + U(rng) * std::log(2000.0));
        double vk = base.v(p, tt, tau);
        auto shifted = [&](double e) {
            dde::IHistory h(base.I(0), 0.0, dde::LogInterp::linear);
            for (size_t j = 1; j < base.size(); ++j) {
                double Ij = base.I(j);
                if (static_cast<long>(j) == k) Ij *= std::pow(1.0 + e / vk, p);
                h.push(base.t(j), Ij);
            }
            return dde::F_eval(m, h, tt, yy);
        };
        double fd = (shifted(eps) - shifted(-eps)) / (2 * eps * dt);
        double an = dde::dF_gradient(m, base, tt, yy, tau);
        worst_F = std::max(worst_F, std::abs(fd - an) / std::abs(an));
    }
    r.metrics["dF_rel_error"] = worst_F;
    r.check_lt("dF_rel_error", worst_F, num(s, "dF_tol"));
}

}  // namespace

namespace detail {

void register_builtin() {
    add("equilibrium", equilibrium, {{"tol", 1e-6}, {"tol_constant", 1e-10}, {"y_min", 1e-3}, {"y_max", 1e3}, {"n", 61}});
    add("simulate-pde", simulate_pde,
        {{"monitors", true}, {"refine", false}, {"residual_tol", 1e-3}, {"ratio_min", 3.6}, {"nodes_per_interval", 2},
         {"functional_nodes", 128}});
    add("simulate-dde", simulate_dde,
        {{"monitors", false}, {"compare_pde", false}, {"rel_tol", 1e-6}, {"interp", "linear"}, {"rule", "adams"}});
    add("const-h-ode", const_h_ode, {{"rel_tol", 1e-5}, {"envelope_tol", 1e-12}});
    add("convergence", convergence,
        {{"p_prime_ratios", {0.5, 1.5, 2.0}}, {"rate_factor", 1.2}, {"tail_tol", 1e-5}, {"tail_fraction", 0.1},
         {"floor_factor", 1e3}, {"window", 0.5}});
    add("linear-stability", linear_stability,
        {{"nodes", 256}, {"certificate", true}, {"t_factor", 10.0}, {"n", 400}, {"margin_tol", 1e-10},
         {"laplace", true}, {"laplace_q", 1.2}, {"decay", true}, {"amplitude", 1e-3}, {"rate_lo_factor", 1.3},
         {"rate_hi_factor", 0.9}, {"gap", true}, {"gap_amplitudes", {1e-2, 5e-3}}, {"gap_T", 8.0}, {"slope_tol", 0.2}});
    add("volterra-demo", volterra_demo,
        {{"closed_form", true}, {"cf_T", 5.0}, {"cf_dt", 1e-3}, {"cf_tol", 1e-5}, {"reconstruction_tol", 1e-8},
         {"gripenberg", true}, {"gr_c", 0.5}, {"gr_T", 200.0}, {"gr_dt", 0.05}, {"gr_from", 100.0}, {"gr_tol", 0.01},
         {"linear_dde", true}, {"ld_a", 0.0}, {"ld_rate", 1.0}, {"ld_forcings", {0.0, 1.0}}, {"ld_I0", 1.0},
         {"ld_T", 100.0}, {"ld_dt", 0.05}, {"osc_tol", 1e-4}});
    add("control-verify", control_verify,
        {{"variants", {"max01", "min1inf", "max01w", "min1infw"}},
         {"y", 1.0}, {"T", 3.0}, {"t", 0.0},
         {"constant", true}, {"g0", 0.7}, {"exact_tol", 1e-9},
         {"sample", true}, {"samples", 500}, {"sample_fracs", {0.2, 0.5}}, {"margin_tol", 1e-6},
         {"dp", true}, {"dp_steps", {16.0, 32.0, 64.0, 128.0}}, {"dp_nodes_per_step", 8}, {"dp_v_levels", 9},
         {"dp_fracs_max", {0.2, 0.5, 0.8}}, {"dp_fracs_min", {0.05, 0.125}}, {"dp_required", 0.9},
         {"dp_side_tol", 1e-3},
         {"certificate", true}, {"cert_t", 5.0}, {"cert_y", 1.0}, {"cert_samples", 200}, {"cert_vmax", 4.0},
         {"cert_tol", 1e-8},
         {"gradient", true}, {"c1_tol", 1e-6}, {"sweep", true}});
    add("gradients", gradients, {{"eps", 1e-6}, {"dI_trials", 10}, {"dI_tol", 1e-5}, {"dF_trials", 20}, {"dF_tol", 1e-4}});
}

}  // namespace detail

std::string default_suite_json() {
    return R"({
  "workers": 1,
  "seed": 1,
  "output": {"dir": "out"},
  "scenarios": [
    {"id": "equilibrium-constant", "experiment": "equilibrium",
     "model": {"source": {"kind": "constant", "h_inf": 1.0}, "p": 2.0}},
    {"id": "equilibrium-log", "experiment": "equilibrium",
     "model": {"source": {"kind": "log", "h_inf": 1.0}, "p": 2.0}},
    {"id": "pde-dde", "experiment": "simulate-dde",
     "initial": {"family": "equilibrium", "p_prime": 3.0},
     "run": {"T": 20.0, "dt": 0.01, "stride": 10},
     "params": {"compare_pde": true}},
    {"id": "pde-consistency", "experiment": "simulate-pde",
     "initial": {"family": "equilibrium", "p_prime": 3.0},
     "run": {"T": 4.0, "dt": 0.01, "stride": 10},
     "params": {"refine": true, "monitors": false}},
    {"id": "linear-stability", "experiment": "linear-stability",
     "run": {"T": 20.0, "dt": 0.02, "stride": 10}},
    {"id": "volterra-demo", "experiment": "volterra-demo"},
    {"id": "convergence", "experiment": "convergence",
     "run": {"T": 60.0, "dt": 0.05, "stride": 5}},
    {"id": "const-h-ode", "experiment": "const-h-ode",
     "model": {"source": {"kind": "constant", "h_inf": 1.0}, "p": 2.0},
     "initial": {"family": "perturbed", "amplitude": 0.5},
     "run": {"T": 6.0, "dt": 0.01, "stride": 10}},
    {"id": "control", "experiment": "control-verify"},
    {"id": "control-compact", "experiment": "control-verify",
     "model": {"source": {"kind": "compact", "h_inf": 1.0}, "p": 2.0},
     "params": {"variants": ["min1infw"], "y": 0.5, "constant": false, "sample": true, "samples": 200,
                "dp": false, "certificate": false}},
    {"id": "gradients", "experiment": "gradients"}
  ]
}
)";
}

}  // namespace nlt::harness
