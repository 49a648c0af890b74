#pragma once

#include <functional>
#include <string>
#include <vector>

namespace nlt::volterra {

// u(t) + int_0^t K(t,s) u(s) ds = g(t) on [0, T].
struct VolterraProblem {
    std::function<double(double, double)> K;  // general kernel
    std::function<double(double)> Kdiff;      // K(t - s) when translation invariant
    bool translation_invariant = false;
    std::function<double(double)> g;
    double T = 1.0;
    double dt = 1e-2;

    static VolterraProblem invariant(std::function<double(double)> k, std::function<double(double)> g,
                                     double T, double dt);
    static VolterraProblem general(std::function<double(double, double)> k,
                                   std::function<double(double)> g, double T, double dt);

    double kernel(double t, double s) const { return translation_invariant ? Kdiff(t - s) : K(t, s); }
    size_t steps() const;
    double time(size_t n) const { return dt * static_cast<double>(n); }
};

struct Series {
    std::vector<double> t, v;
    std::string csv(const std::string& name) const;
};

/// Product trapezoidal rule. Throws NumericError when 1 + dt K(t,t)/2 is near zero.
Series solve(const VolterraProblem& prob);

// Discrete resolvent r(t_n, t_j) from the trapezoid rule applied to
// r(t,s) + int_s^t K(t,sigma) r(sigma,s) dsigma = K(t,s), with r(t,t) = K(t,t).
class Resolvent {
public:
    bool invariant = false;
    double dt = 0.0;
    std::vector<double> diff;               // r(t_n - t_0), invariant case
    std::vector<std::vector<double>> rows;  // rows[n][j], general case

    double operator()(size_t n, size_t j) const { return invariant ? diff[n - j] : rows[n][j]; }
    size_t size() const { return invariant ? diff.size() : rows.size(); }
};

Resolvent resolvent(const VolterraProblem& prob);

struct Reconstruction {
    Series u;                    // g - r*g with the discrete start correction
    double residual = 0.0;       // max |u - solve(prob)|
    double plain_residual = 0.0; // same without the correction (O(dt^2))
};

/// u = g - r*g. The trapezoid rule with u(0) = g(0) makes the exact discrete
/// inverse differ from the natural r by diagonal factors; applying them makes the
/// reconstruction agree with solve() to rounding.
Reconstruction reconstruct(const VolterraProblem& prob, const Resolvent& r);

/// sup over t_n of dt-trapezoid int_0^{t_n} |r(t_n, s)| ds, running (one value per n).
std::vector<double> resolvent_l1(const Resolvent& r);

struct GripenbergReport {
    bool nonnegative = true;
    bool decreasing_in_t = true;     // t -> K(t,s) on [s, T]
    std::vector<double> w;           // w(t_n) = int_0^t K(t,s) ds
    double w_drift = 0.0;            // |w(T) - w(0.9T)|
    std::vector<double> T0_scan;
    std::vector<double> tail_mass;   // sup_t int_0^{max(t-T0,0)} K ds for each T0
    bool tail_condition = true;      // some scanned T0 gives tail_mass < 1
    std::vector<double> r_l1;        // running sup of int_0^t |r(t,s)| ds
    double r_l1_sup = 0.0;
    std::vector<std::string> flags;
};

GripenbergReport gripenberg_check(const VolterraProblem& prob, const std::vector<double>& T0_scan);

// dI/dt + a(t) I + int_0^t k(t,s) (I(t) - I(s)) ds = f(t), I(0) = I0.
struct LinearDDEProblem {
    std::function<double(double)> a;
    std::function<double(double, double)> k;
    std::function<double(double)> f;
    double I0 = 1.0;
};

struct LinearDDEReport {
    Series I;                        // direct trapezoid integration
    Series I_volterra;               // I0 + int u, u from the Volterra reduction
    double route_gap = 0.0;          // max |I - I_volterra|
    double sup_abs = 0.0;
    double tail_oscillation = 0.0;   // max - min of I on [0.9T, T]
    double sup_column_mass = 0.0;    // sup_s int_s^{10T} k(t,s) dt
    double truncation_tail = 0.0;    // sup_s int_{10T}^{20T} k(t,s) dt, mass dropped by the truncation
    double a_minus_l1 = 0.0;         // int_0^T max(-a, 0)
    std::vector<double> gamma_scan;
    std::vector<double> window_mass; // sup_T' int_0^{T'-gamma} ds int_{T'}^{10T} k dt
    bool volterra_route = true;
};

/// monitors = false skips the hypothesis integrals (they sample k off the grid).
LinearDDEReport linear_dde_solve(const LinearDDEProblem& prob, double T, double dt,
                                 bool volterra_route = true, bool monitors = true);

// Measured constants in sup|I| <= C1 |I0| + C2 ||f||_1 over a family of problems.
struct BoundConstants {
    double C1 = 0.0;
    double C2 = 0.0;
};

BoundConstants measure_bound_constants(const std::vector<LinearDDEProblem>& family, double T,
                                       double dt);

/// int_0^T |u| for each n, for the stabilisation check in the invariant case.
std::vector<double> running_l1(const Series& u);

}  // namespace nlt::volterra
