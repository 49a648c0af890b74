#include "nlt/pde/characteristics.hpp"

#include <algorithm>
#include <cmath>

#include "nlt/core/errors.hpp"
#include "nlt/core/quadrature.hpp"

namespace nlt::pde {

namespace {

// int_u^v e^{R(s) - Rt} ds inside history interval k, 4-point Gauss.
double exp_integral(const RhoHistory& h, size_t k, double u, double v, double Rt) {
    if (v <= u) return 0.0;
    const GaussRule& g = gauss_legendre(4);
    double c = 0.5 * (u + v), r = 0.5 * (v - u), s = 0.0;
    for (int i = 0; i < 4; ++i) s += g.w[i] * std::exp(h.R_in(k, c + r * g.x[i]) - Rt);
    return r * s;
}

double R_local(const RhoHistory& h, size_t k, double s) {
    return h.size() == 1 ? h.rho(0) * s : h.R_in(k, s);
}

}  // namespace

CharPlan build_plan(const RhoHistory& h, double t, int m) {
    CharPlan plan;
    plan.t = t;
    plan.m = m;
    plan.Rt = h.R_at(t);
    size_t K = 0;
    while (K + 1 < h.size() && h.t(K) < t) ++K;
    const GaussRule& g = gauss_legendre(m);
    plan.first.resize(K + 1);
    plan.Phi_right.resize(K);
    plan.t_left.resize(K);
    plan.t_right.resize(K);
    plan.hist_index.resize(K);
    size_t n = K * m;
    plan.s.resize(n);
    plan.w.resize(n);
    plan.inv_a.resize(n);
    plan.wa.resize(n);
    plan.Phi.resize(n);
    for (size_t k = 0; k <= K; ++k) plan.first[k] = k * m;
    double run = 0.0;
    for (size_t k = K; k-- > 0;) {
        double tl = h.t(k), tr = std::min(h.t(k + 1), t);
        plan.t_left[k] = tl;
        plan.t_right[k] = tr;
        plan.hist_index[k] = k;
        plan.Phi_right[k] = run;
        double c = 0.5 * (tl + tr), r = 0.5 * (tr - tl);
        for (int i = 0; i < m; ++i) {
            size_t j = k * m + i;
            double s = c + r * g.x[i];
            double a = std::exp(h.R_in(k, s) - plan.Rt);
            plan.s[j] = s;
            plan.w[j] = r * g.w[i];
            plan.inv_a[j] = 1.0 / a;
            plan.wa[j] = plan.w[j] * a;
            plan.Phi[j] = run + exp_integral(h, k, s, tr, plan.Rt);
        }
        run += exp_integral(h, k, tl, tr, plan.Rt);
    }
    plan.Phi0 = run;
    plan.a0 = std::exp(-plan.Rt);
    return plan;
}

double characteristic(const RhoHistory& h, double t, double y, double s) {
    if (s > t) throw DomainError("characteristic: s must not exceed t");
    if (s < 0.0) throw DomainError("characteristic: s must be nonnegative");
    if (!(y > 0.0)) throw DomainError("characteristic: y must be positive");
    if (s == t) return y;
    double Rt = h.R_at(t);
    double phi = 0.0;
    size_t k0 = h.locate(s), k1 = h.locate(t);
    for (size_t k = k0; k <= k1; ++k) {
        double u = std::max(s, h.t(k));
        double v = (k + 1 < h.size()) ? std::min(t, h.t(k + 1)) : t;
        phi += exp_integral(h, k, u, v, Rt);
    }
    double a = std::exp(R_local(h, k0, s) - Rt);
    return (y + phi) / a;
}

void eval_plan(const CharPlan& plan, const SourceFn& src, const Profile& xi0, double y,
               double& xi, double& d1) {
    Jet j0 = xi0((y + plan.Phi0) / plan.a0);
    double sh = 0.0, sh1 = 0.0;
    const size_t n = plan.s.size();
    const double* Phi = plan.Phi.data();
    const double* ia = plan.inv_a.data();
    const double* wa = plan.wa.data();
    const double* w = plan.w.data();
    for (size_t j = 0; j < n; ++j) {
        double yj = (y + Phi[j]) * ia[j];
        double hv, h1;
        src.eval01(yj, hv, h1);
        sh += wa[j] * hv;
        sh1 += w[j] * h1;
    }
    xi = plan.a0 * j0.v + sh;
    d1 = j0.d1 + sh1;
}

Jet eval_refined(const RhoHistory& h, const CharPlan& plan, const SourceFn& src,
                 const Profile& xi0, double y, bool second) {
    constexpr double kPlanRatio = 0.05;
    constexpr double kPieceRatio = 0.25;
    Jet j0 = xi0((y + plan.Phi0) / plan.a0);
    bool want2 = second && std::isfinite(j0.d2);
    double sh = 0.0, sh1 = 0.0, sh2 = 0.0;
    auto add = [&](double w, double a, double Phi) {
        double yj = (y + Phi) / a;
        if (want2) {
            Jet hj = src.jet(yj);
            sh += w * a * hj.v;
            sh1 += w * hj.d1;
            sh2 += w * hj.d2 / a;
        } else {
            double hv, h1;
            src.eval01(yj, hv, h1);
            sh += w * a * hv;
            sh1 += w * h1;
        }
    };
    const GaussRule& g4 = gauss_legendre(4);
    std::vector<std::pair<double, double>> stack;
    for (size_t k = 0; k < plan.intervals(); ++k) {
        double tl = plan.t_left[k], tr = plan.t_right[k];
        double sig_a = plan.t - tr;
        if (tr - tl <= kPlanRatio * (y + sig_a)) {
            for (size_t j = plan.first[k]; j < plan.first[k + 1]; ++j)
                add(plan.w[j], 1.0 / plan.inv_a[j], plan.Phi[j]);
            continue;
        }
        size_t hk = plan.hist_index[k];
        stack.clear();
        stack.emplace_back(tl, tr);
        while (!stack.empty()) {
            auto [u, v] = stack.back();
            stack.pop_back();
            if (v - u > kPieceRatio * (y + plan.t - v) && v - u > 1e-14 * std::max(1.0, plan.t)) {
                double mid = 0.5 * (u + v);
                stack.emplace_back(u, mid);
                stack.emplace_back(mid, v);
                continue;
            }
            double c = 0.5 * (u + v), r = 0.5 * (v - u);
            for (int i = 0; i < 4; ++i) {
                double s = c + r * g4.x[i];
                double a = std::exp(R_local(h, hk, s) - plan.Rt);
                double Phi = plan.Phi_right[k] + exp_integral(h, hk, s, tr, plan.Rt);
                add(r * g4.w[i], a, Phi);
            }
        }
    }
    Jet out;
    out.v = plan.a0 * j0.v + sh;
    out.d1 = j0.d1 + sh1;
    out.d2 = want2 ? j0.d2 / plan.a0 + sh2 : std::numeric_limits<double>::quiet_NaN();
    return out;
}

}  // namespace nlt::pde
