// Acceptance run: the default suite, one PASS/FAIL line per criterion.
// Usage: acceptance [output_dir]
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "nlt/core/trajectory.hpp"
#include "nlt/harness/harness.hpp"

using namespace nlt;
using namespace nlt::harness;

namespace {

const Result* by_id(const std::vector<Result>& rs, const std::string& id) {
    for (const Result& r : rs)
        if (r.id == id) return &r;
    return nullptr;
}

struct Line {
    bool ok = true;
    std::string detail;

    void check(const Result* r, const std::string& name) {
        if (!r) {
            fail("missing scenario");
            return;
        }
        const Check* c = r->find(name);
        if (!c) {
            fail(r->id + ": missing " + name + (r->message.empty() ? "" : " (" + r->message + ")"));
            return;
        }
        std::string lim = c->relation == "in" ? "[" + format_double(c->limit) + ", " + format_double(c->limit_hi) + "]"
                                              : c->relation + " " + format_double(c->limit);
        add(c->pass, r->id + "." + name + " = " + format_double(c->value) + " " + lim);
    }
    void prefix(const Result* r, const std::string& start) {
        int n = 0;
        if (r)
            for (const Check& c : r->checks)
                if (c.name.rfind(start, 0) == 0) {
                    check(r, c.name);
                    ++n;
                }
        if (n == 0) fail((r ? r->id : std::string("?")) + ": no " + start + "* checks");
    }
    void status(const Result* r) {
        if (r && r->status != "pass" && r->status != "fail") fail(r->id + ": " + r->status + ": " + r->message);
    }
    void runtime(double seconds, double limit, const std::string& what) {
        add(seconds < limit, what + " " + format_double(std::round(seconds * 1e3) / 1e3) + " s < " +
                                 format_double(limit) + " s");
    }
    void add(bool pass, const std::string& text) {
        ok = ok && pass;
        detail += (detail.empty() ? "" : "; ") + text + (pass ? "" : " [x]");
    }
    void fail(const std::string& text) { add(false, text); }
};

}  // namespace

int main(int argc, char** argv) {
    Config cfg = parse_config(default_suite_json(), "<default suite>");
    std::vector<Result> rs = run_all(cfg.scenarios, 1);
    if (argc > 1) write_outputs(rs, argv[1]);

    auto R = [&](const char* id) { return by_id(rs, id); };
    struct Criterion {
        const char* title;
        std::function<void(Line&)> body;
    };
    const std::vector<Criterion> criteria = {
        {"equilibrium identity",
         [&](Line& l) {
             for (const char* id : {"equilibrium-constant", "equilibrium-log"}) {
                 l.status(R(id));
                 l.check(R(id), "rho_identity");
                 if (R(id)) l.runtime(R(id)->wall_time, 1.0, std::string(id) + " runtime");
             }
         }},
        {"pde/dde equivalence",
         [&](Line& l) {
             l.status(R("pde-dde"));
             l.check(R("pde-dde"), "pde_dde_rel_gap");
             if (R("pde-dde")) l.runtime(R("pde-dde")->wall_time, 120.0, "runtime");
         }},
        {"log-derivative consistency",
         [&](Line& l) {
             l.status(R("pde-consistency"));
             l.check(R("pde-consistency"), "log_derivative_residual");
             l.check(R("pde-consistency"), "residual_ratio");
         }},
        {"kernel positivity certificate",
         [&](Line& l) {
             l.status(R("linear-stability"));
             l.check(R("linear-stability"), "kernel_min_K");
             l.check(R("linear-stability"), "kernel_monotone_margin");
         }},
        {"volterra closed forms",
         [&](Line& l) {
             const Result* r = R("volterra-demo");
             l.status(r);
             l.check(r, "u_error");
             l.check(r, "resolvent_error");
             l.check(r, "reconstruction_residual");
             if (r && r->timings.count("closed_form")) l.runtime(r->timings.at("closed_form"), 10.0, "runtime");
         }},
        {"linear decay",
         [&](Line& l) {
             l.status(R("linear-stability"));
             l.check(R("linear-stability"), "linear_decay_rate");
             l.check(R("linear-stability"), "gap_slope");
         }},
        {"global convergence",
         [&](Line& l) {
             const Result* r = R("convergence");
             l.status(r);
             l.prefix(r, "rate_");
             l.prefix(r, "tail_osc_");
             if (r)
                 for (const auto& [k, v] : r->timings) l.runtime(v, 300.0, k + " runtime");
         }},
        {"constant-source ode",
         [&](Line& l) {
             l.status(R("const-h-ode"));
             l.check(R("const-h-ode"), "envelope_excess");
             l.check(R("const-h-ode"), "ode_pde_rel_gap");
         }},
        {"control certificates",
         [&](Line& l) {
             const Result* r = R("control");
             l.status(r);
             l.check(r, "constant_payoff_exact");
             l.prefix(r, "sampled_margin_");
             l.check(r, "dp_monotone_fraction");
             l.check(r, "certificate_below");
             l.check(r, "certificate_above");
             if (r) l.runtime(r->wall_time, 180.0, "runtime");
         }},
        {"gradient suite",
         [&](Line& l) {
             l.status(R("gradients"));
             l.check(R("gradients"), "dI_rel_error");
             l.check(R("gradients"), "dF_rel_error");
             for (const char* id : {"control", "control-compact"}) {
                 l.status(R(id));
                 l.prefix(R(id), "dq_dx_min_");
                 l.check(R(id), "c1_patching");
             }
         }},
        {"resolvent and delay demos",
         [&](Line& l) {
             const Result* r = R("volterra-demo");
             l.status(r);
             l.check(r, "gripenberg_l1_drift");
             l.prefix(r, "tail_osc_f");
         }},
    };

    int failed = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        Line l;
        criteria[i].body(l);
        failed += !l.ok;
        std::printf("%s %2zu %s: %s\n", l.ok ? "PASS" : "FAIL", i + 1, criteria[i].title, l.detail.c_str());
    }
    std::printf("%d/%zu criteria pass\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
