#pragma once

#include <string>
#include <vector>

#include "nlt/core/profile.hpp"
#include "nlt/core/trajectory.hpp"
#include "nlt/pde/history.hpp"
#include "nlt/pde/simulator.hpp"

namespace nlt::dde {

// Interpolation of log I between history nodes.
//   linear:    log I piecewise linear.
//   quadratic: log I piecewise quadratic through the node values with the node
//              slopes d log I/dt (C^1 when the slopes are trapezoid-consistent,
//              as for histories built from a rho history).
enum class LogInterp { linear, quadratic };

class IHistory {
public:
    explicit IHistory(double I0, double dlog0 = 0.0, LogInterp interp = LogInterp::quadratic);
    /// History implied by a rho history: log I = log I0 + p R - t, d log I/dt = p rho - 1.
    static IHistory from_rho(const pde::RhoHistory& h, double I0, double p);

    /// Appends (t, I, d log I/dt). Throws ModelError when I is not positive.
    void push(double t, double I, double dlogI = 0.0);
    void pop();

    LogInterp interp() const { return interp_; }
    size_t size() const { return t_.size(); }
    double t(size_t k) const { return t_[k]; }
    double t_last() const { return t_.back(); }
    double I(size_t k) const;
    double log_I(size_t k) const { return L_[k]; }
    double dlog_I(size_t k) const { return d_[k]; }
    const std::vector<double>& times() const { return t_; }

    size_t locate(double s) const;
    double log_I_at(double s) const;
    // same, inside interval k
    double log_in(size_t k, double s) const;
    /// v_t(s) = (I(s) / I(t))^{1/p}
    double v(double p, double t, double s) const;

private:
    LogInterp interp_;
    std::vector<double> t_, L_, d_;
};

struct VZ {
    double v = 1.0;
    double z = 0.0;
};

/// v_t(s) and z(s) = e^{(t-s)/p} y + int_s^t e^{(s'-s)/p} v_t(s') ds'.
VZ v_and_z(const IHistory& hist, double p, double t, double s, double y);

// Quadrature nodes over [0, t] (m Gauss points per history interval, intervals
// optionally split at `split`). a = e^{-(t-s)/p} v_t(s), Phi = int_s^t a, so that
// z(s)/v_t(s) = (y + Phi(s)) / a(s). With y_ref > 0, intervals long compared with
// y_ref + t - s are bisected towards s = t and get 4 points per piece.
struct MemoryNodes {
    double t = 0.0;
    double a0 = 1.0, Phi0 = 0.0;
    std::vector<double> s, w, a, Phi;
};

MemoryNodes memory_nodes(const IHistory& hist, double p, double t, int m = 2, double split = -1.0,
                         double y_ref = 0.0);

/// F(t, y, v_t) = (1/p) int_0^t h(z/v) e^{-(t-s)/p} v ds - (1 + y/p) int_0^t h'(z/v) ds.
double F_eval(const pde::Model& model, const IHistory& hist, double t, double y, int m = 2);
/// F(t, y, 1) = h(y) - e^{-t/p} h(y_p(0)).
double F_unit(const pde::Model& model, double t, double y);
/// Initial-data part of B xi(y, t) minus e^{-t/p} h(y_p(0)).
double G_eval(const pde::Model& model, const IHistory& hist, double t, double y,
              const Profile& xi0, int m = 2);
/// Gradient of F in v_t(.) at tau, 0 < tau < t.
double dF_gradient(const pde::Model& model, const IHistory& hist, double t, double y, double tau,
                   int m = 2);
/// xi(y, t) and xi'(y, t) rebuilt from the I history.
Jet xi_from_history(const pde::Model& model, const IHistory& hist, double t, double y,
                    const Profile& xi0, int m = 2);

// Quadrature of d log I/dt over a step: trapezoid, or the 3-point implicit
// Adams rule (5 d_{n+1} + 8 d_n - d_{n-1}) dt/12 after the first step.
enum class TimeRule { trapezoid, adams_moulton };

struct Options {
    double tol = 1e-12;          // |K chi - chi| on exit, in log chi
    int max_iter = 50;
    int damp_after = 10;
    double damping = 0.5;
    int nodes_per_interval = 2;
    int functional_nodes = 128;
    LogInterp interp = LogInterp::linear;
    TimeRule rule = TimeRule::adams_moulton;
};

struct DDEValue {
    double dlogI = 0.0;   // d log I/dt = p (g - f)
    double f = 0.0;
    double g = 0.0;
    double I_profile = 0.0;   // I(xi(., t)) on the functional rule
    double denominator = 0.0;
};

struct DDERecord {
    double t = 0.0;
    double I = 0.0;
    DDEValue value;
    int iterations = 0;
};

class DDEState {
public:
    DDEState(pde::Model model, Profile xi0, Options opt = {}, double I0 = 0.0);

    const pde::Model& model() const { return model_; }
    const Profile& xi0() const { return xi0_; }
    const IHistory& history() const { return hist_; }
    const std::vector<DDERecord>& records() const { return records_; }
    const Options& options() const { return opt_; }
    double t() const { return hist_.t_last(); }

    /// f, g and d log I/dt at t_last + dt when I(t_last + dt) = I_last chi^{-p}.
    DDEValue trial(double dt, double chi);
    void commit(double dt, double chi, const DDEValue& v, int iterations);
    /// log I(t_last + dt) - log I(t_last) from the step rule, given the new slope.
    double step_increment(double dt, double d_next) const;

private:
    DDEValue evaluate(double t) const;
    double log_next(double dt, double chi) const;
    double node_slope(double dt, double L1) const;

    pde::Model model_;
    Profile xi0_;
    Options opt_;
    FunctionalRule rule_;
    std::vector<double> h_nodes_;
    IHistory hist_;
    std::vector<DDERecord> records_;
};

/// One step of the chi fixed point; throws StepError on divergence.
void dde_step(DDEState& state, double dt);

struct DDETrajectory {
    Trajectory traj;   // pde-sim columns; rho = (1 + d log I/dt) / p
    std::vector<double> dlogIdt, f, g, I_profile;   // sampled like traj.t

    /// Columns t,I,dlogIdt,f,g.
    std::string csv() const;
};

DDETrajectory dde_run(const pde::Model& model, const Profile& xi0, const pde::RunConfig& cfg,
                      const Options& opt = {});

struct OdePair {
    double I1 = 1.0;
    double I2 = 0.0;
};

struct OdeRun {
    std::vector<double> t, I1, I2, J, alpha, beta;
    double I0 = 0.0;
    double C1 = 0.0;               // sup beta e^{t/p}
    double envelope_excess = 0.0;  // max |J| - (|J(0)| + C1 t) e^{-t/p}
    double i2_residual = 0.0;      // max centred residual of dI2/dt = (I1 - I2)/p
    double min_beta = 0.0;
    double p = 0.0;

    double I(size_t k) const;
};

/// alpha and beta of the constant-source reduction at (I1, I2, t).
void ode_coefficients(const pde::Model& model, const Profile& xi0, const FunctionalRule& rule,
                      const OdePair& x, double t, double& alpha, double& beta);

/// Classical RK4 for the (I1, I2) system. Requires a constant source.
OdeRun const_h_ode(const pde::Model& model, const Profile& xi0, double T, double dt,
                   int stride = 1, int functional_nodes = 128);

}  // namespace nlt::dde
