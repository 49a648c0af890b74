#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "nlt/core/source.hpp"
#include "nlt/pde/simulator.hpp"

namespace nlt::control {

// max01:    sup over 0 < v <= 1 of int g(x/v) ds
// min1inf:  inf over v >= 1     of int g(x/v) ds
// max01w:   sup over 0 < v <= 1 of int g(x/v) e^{-(T-s)/p} v ds
// min1infw: inf over v >= 1     of int g(x/v) e^{-(T-s)/p} v ds
// with dx/ds = -x/p - v, x(T) = y, x(t) = x.
enum class Variant { max01, min1inf, max01w, min1infw };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);
inline bool is_max(Variant v) { return v == Variant::max01 || v == Variant::max01w; }
inline bool is_weighted(Variant v) { return v == Variant::max01w || v == Variant::min1infw; }

// Payoff integrand with derivatives. d2g may be empty.
struct Payoff {
    std::string name;
    std::function<double(double)> g, dg, d2g;
    double g_inf = 0.0;   // lim g at infinity
    double z_inf = std::numeric_limits<double>::infinity();   // sup{z : g'(z) < 0}

    static Payoff constant(double g0);
    /// g = scale * h^{(order)}, order 0 or 1.
    static Payoff from_source(const SourceFn& s, double scale, int order);
};

/// Payoff of the extremality decomposition of the delay functional:
/// -(1 + y/p) h' for unweighted variants, h/p for weighted ones.
Payoff source_payoff(Variant v, const SourceFn& s, double p, double y);

struct HypothesisReport {
    bool ok = true;
    std::string failed;       // inequality that failed, empty when ok
    double worst = 0.0;       // largest violation on the grid
};

/// Grid check of the variant's hypotheses on g.
HypothesisReport check_hypotheses(Variant v, const Payoff& g, double z_min = 1e-4,
                                  double z_max = 1e4, int n = 400);

struct ControlProblem {
    Variant variant = Variant::max01;
    Payoff g;
    double p = 2.0, y = 1.0, T = 1.0, t = 0.0, x = 0.0;

    /// Constant-control curve e^{(T-s)/p}(y + p) - p.
    double x_p(double s) const;
    /// Reachable interval of x(t): (e^{(T-t)/p} y, x_p(t)) or (x_p(t), inf).
    double lower() const;
    double upper() const;
    bool reachable() const;
    /// Throws DomainError outside the reachable set or for t >= T.
    void validate() const;
    /// lower() + frac (top - lower()), top = upper() for max variants and the reach
    /// of v = v_max for min variants.
    double interior_point(double frac, double v_max = 8.0) const;
};

// Piecewise-constant (values.size() == breakpoints.size() - 1) or piecewise-linear
// (values at the breakpoints) control on [t, T].
struct PiecewiseControl {
    std::vector<double> breakpoints, values;
    bool linear = false;

    size_t segments() const { return breakpoints.size() - 1; }
    double at(double s) const;
};

/// Throws DomainError when v violates the variant's bounds or does not span [t, T].
void check_admissible(const ControlProblem& prob, const PiecewiseControl& v);
/// x(s) from x(T) = y, exact per segment.
double trajectory_x(const ControlProblem& prob, const PiecewiseControl& v, double s);
/// Payoff of v with `gauss` points per segment. Ignores prob.x.
double payoff(const ControlProblem& prob, const PiecewiseControl& v, int gauss = 16);

// Closed-form value q(x, y, t, T) and its x-derivative.
struct Value {
    double q = 0.0;
    double dq_dx = 0.0;
    double tau = std::numeric_limits<double>::quiet_NaN();
    double lambda = std::numeric_limits<double>::quiet_NaN();
    std::string region;   // bang_bang, lambda, tau, flat
};

Value value_max_unweighted(const ControlProblem& prob);
Value value_min_unweighted(const ControlProblem& prob);
Value value_max_weighted(const ControlProblem& prob);
Value value_min_weighted(const ControlProblem& prob);
Value value(const ControlProblem& prob);

/// Switching time of the bang-bang control: e^{tau/p} = e^{T/p}(1 + y/p) - (x/p) e^{t/p}.
double switching_time(const ControlProblem& prob);

// F(z) = -z log(-g'(z)) + int_{z0}^z log(-g'), strictly increasing on (0, z_inf).
class CharMap {
public:
    /// z0 = 1 unless z_inf <= 1, then z_inf / 2. Requires g'' for derivative().
    explicit CharMap(Payoff g);

    double z0() const { return z0_; }
    double z_inf() const { return g_.z_inf; }
    double L(double z) const;            // log(-g'(z))
    double F(double z) const;
    double derivative(double z) const;   // -z g''/g'
    /// F(b) - F(a), integrated over [a, b] only.
    double diff(double a, double b) const;
    /// z > a with F(z) = F(a) + delta, delta >= 0; bisection.
    double solve_forward(double a, double delta) const;

private:
    double integral(double a, double b) const;   // int_a^b L
    Payoff g_;
    double z0_ = 1.0;
};

// Boundary curves of the weighted minimisation.
struct WeightedMinGeometry {
    double T_inf = 0.0;            // x_p(T_inf) = z_inf, or T
    double lambda_inf = 0.0;       // min(z_inf, y)
    double lambda_boundary = 0.0;  // y_p(t, lambda_inf)
    double flat_boundary = 0.0;    // upper edge of the flat region at t (0 if empty)
};

WeightedMinGeometry weighted_min_geometry(const ControlProblem& prob, const CharMap& F);

/// y_p(t, lambda) along the lambda characteristic ending at y.
double lambda_trajectory(const ControlProblem& prob, const CharMap& F, double lambda, double s);
/// x_p(s, tau) along the characteristic leaving the constant-control curve at tau.
double tau_trajectory(const ControlProblem& prob, const CharMap& F, double tau, double s);
/// Unweighted minimisation: y_p(s, lambda) = y e^{(1/p + 1/lambda)(T - s)} and
/// x_p(s, tau) = x_p(tau) e^{(1/p + 1/x_p(tau))(tau - s)}.
double min_unweighted_lambda_path(const ControlProblem& prob, double lambda, double s);
double min_unweighted_tau_path(const ControlProblem& prob, double tau, double s);

struct DPResult {
    double value = 0.0;
    bool feasible = true;
    bool clipped = false;     // query x clamped onto the grid at t
    bool saturated = false;   // greedy policy used the top level for a min variant
    int n_steps = 0;
    std::vector<double> times, grid, levels;
    std::vector<std::vector<int>> policy;   // [step][node], -1 infeasible
    double bang_bang_fraction = 1.0;        // max variants: switch >= 4 steps from s and T
};

/// Backward induction over n_steps <= 256 time steps, x_nodes log-spaced nodes and
/// v_levels control levels (0..1 for max, 1..v_max for min).
DPResult brute_force(const ControlProblem& prob, int n_steps, int x_nodes, int v_levels,
                     double v_max = 8.0);

struct StationarityReport {
    std::vector<double> tau, grad;
    double min_grad = 0.0;
    bool ok = true;
};

/// Gradient of the payoff in v at v = 1 on a tau grid; nonnegative when v = 1 is
/// stationary on the correct side.
StationarityReport stationarity_check(const ControlProblem& prob, int n = 64);

struct SampleReport {
    int n = 0;
    double worst_margin = 0.0;   // min of (value - payoff) for max, (payoff - value) for min
    int rejected = 0;
    std::uint64_t seed = 0;
};

/// Random admissible piecewise-constant controls with x(t) = x, log-uniform values.
SampleReport sample_controls(const ControlProblem& prob, int n, std::uint64_t seed,
                             int segments = 20, double v_max = 8.0);

struct Certificate {
    std::string side;    // "max" (v <= 1) or "min" (v >= 1)
    std::string model;
    int n_samples = 0;
    double worst_margin = 0.0;   // F(1) - F(v) for max, F(v) - F(1) for min
    std::uint64_t seed = 0;
    double unit_quadrature_error = 0.0;   // |F(1) on the sample rule - closed form|
    bool pass = false;

    std::string to_json() const;
};

/// Grid check of the source hypotheses (h >= 0 decreasing convex, y h'' + h' >= 0,
/// y^2 h'' decreasing). Throws ModelError naming the failed inequality.
void check_extremality_hypotheses(const SourceFn& s);

/// Samples n random histories v_t(.) on [0, t], piecewise linear in log v with 16
/// nodes and v(t) = 1, below 1 (max side) or in [1, v_max] (min side), and compares
/// the delay functional F(t, y, v) with F(t, y, 1).
Certificate extremality_certificate(const pde::Model& model, double t, double y, int n,
                                    bool above, std::uint64_t seed, double v_max = 4.0,
                                    double tol = 1e-8);

/// CSV t,x,q,dq_dx over an nt x nx sweep of the reachable set.
std::string value_sweep_csv(const ControlProblem& prob, int nt, int nx);

}  // namespace nlt::control
