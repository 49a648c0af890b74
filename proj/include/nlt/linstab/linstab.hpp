#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "nlt/core/equilibrium.hpp"
#include "nlt/core/fit.hpp"
#include "nlt/core/functional.hpp"
#include "nlt/pde/simulator.hpp"
#include "nlt/volterra/volterra.hpp"

namespace nlt::linstab {

/// Y with e^{-Bt} z(y) = e^{-t/p} z(Y).
inline double semigroup_point(double p, double t, double y) {
    double e = std::exp(t / p);
    return e * y + p * (e - 1.0);
}

/// e^{-Bt} z(y).
double semigroup(const Profile& z, double p, double t, double y);

// Linearisation about xi_p. The gradient dI(xi_p) is frozen on a mapped rule.
class LinearKernel {
public:
    explicit LinearKernel(const pde::Model& model, int nodes = 256);

    const pde::Model& model() const { return model_; }
    const Equilibrium& equilibrium() const { return eq_; }
    double p() const { return model_.p; }
    double Ip() const { return Ip_; }
    /// p I(xi_p) + <dI(xi_p), A xi_p>
    double denom() const { return denom_; }

    /// <dI(xi_p), phi>
    double pair(const std::function<double(double)>& phi) const;
    /// <dI(xi_p), e^{-Bt} phi>
    double pair_evolved(const std::function<double(double)>& phi, double t) const;

    double K(double t) const;
    double Kprime(double t) const;
    double K0() const { return K0_; }
    /// K' + K/p; nonpositive for conforming models.
    double monotone_margin(double t) const;

    /// <dI(xi_p), e^{-Bt} B xi0~>
    double g(const Profile& xi0, double t) const;

    // y |-> BA xi_p, B^2 A xi_p, (B - 1/p) B A xi_p
    double BA(double y) const;
    double B2A(double y) const;

    const std::vector<double>& nodes() const { return y_; }
    const std::vector<double>& weights() const { return W_; }  // w_i dI(xi_p)(y_i)

private:
    pde::Model model_;
    Equilibrium eq_;
    std::vector<double> y_, W_;
    double Ip_ = 0.0, denom_ = 0.0, K0_ = 0.0;
};

struct KernelCertificate {
    std::vector<double> t, K, margin;  // margin: increase of e^{t/p}K between grid points, scaled
    double min_K = 0.0;
    double max_increase = 0.0;         // max_i e^{t_{i+1}/p}K(t_{i+1}) - e^{t_i/p}K(t_i)
    double max_derivative_margin = 0.0;// max_i K' + K/p
    bool positive = false;
    bool nonincreasing = false;
    std::string csv() const;           // t,K,expK_monotone_margin
};

/// Positivity of K and monotonicity of e^{t/p}K on n points over [0, t_max].
KernelCertificate certify_kernel(const LinearKernel& lk, double t_max, int n, double tol = 1e-10);

// K^(z) = int_0^{TL} K e^{-zt} dt + tail, TL = tl_factor p.
class LaplaceTransform {
public:
    LaplaceTransform(const LinearKernel& lk, double tl_factor = 40.0, double panel = 0.05);
    std::complex<double> operator()(std::complex<double> z) const;
    /// Bound on the dropped tail from e^{t/p}K decreasing. Requires Re z > -1/p.
    double tail_bound(std::complex<double> z) const;
    double horizon() const { return TL_; }

private:
    double p_, TL_, KTL_;
    std::vector<double> t_, wK_;
};

struct LaplaceReport {
    double re_left = 0.0, re_right = 2.0, im_max = 50.0;
    size_t samples = 0;
    double min_abs = 0.0;     // min |1 + K^| on the contour
    int winding = 0;
    double max_tail = 0.0;
    bool conclusive = false;  // tail bound below half of min |1 + K^|
    std::string status;       // "holds" | "violated" | "inconclusive"
};

/// Argument principle for 1 + K^ on [re_left, re_right] x [-im_max, im_max].
LaplaceReport laplace_condition(const LinearKernel& lk, double re_left, double re_right = 2.0,
                                double im_max = 50.0, size_t n = 4000);

// Solution of the linearised flow.
struct LinearEvolution {
    volterra::Series u;             // u = <dI(xi_p), B xi~(t)>
    volterra::Series I_tilde;       // I~ with dI~/dt = -u / denom
    std::vector<double> t_norm, norm;  // ||xi~(t)||_{1,inf} on sampled times
    RateFit fit;
    double I0_tilde = 0.0;

    /// xi~ and its y-derivative at grid time index n.
    Jet xi(size_t n, double y) const;
    /// I(t_n) = I_p (1 + p I~(t_n))
    double I(size_t n) const;

    // state for xi()
    const LinearKernel* lk = nullptr;
    Profile xi0;
    double dt = 0.0;
};

LinearEvolution linear_evolve(const LinearKernel& lk, const Profile& xi0, double T, double dt,
                              int stride = 10, const LogGrid& grid = {1e-3, 1e3, 61});

// Nonlinear run from xi_p + zeta against the linear flow from zeta.
struct LinearizationGap {
    double amplitude = 0.0;
    double profile_gap = 0.0;  // max over sampled t and grid of |xi - xi_p - xi~|
    double I_rel_gap = 0.0;    // max_t |I_pde / I_lin - 1|
};

LinearizationGap linearization_gap(const LinearKernel& lk, const Profile& zeta, double T, double dt,
                                   int stride = 25, const LogGrid& grid = {1e-2, 1e2, 21},
                                   const pde::StepOptions& opt = {});

struct Deltas {
    double d1 = 0.0;
    double d2 = 0.0;
};

/// Perturbation functionals of the nonlinear remainder. Throws ModelError when
/// the perturbed denominator leaves the positivity floor.
Deltas perturbation_deltas(const LinearKernel& lk, const Profile& zeta);

struct LipschitzReport {
    double delta1 = 0.0;  // max |d1(a) - d1(b)| / ||a - b||
    double delta2 = 0.0;  // max |d2(a) - d2(b)| / ((||a|| + ||b||) ||a - b||)
    size_t pairs = 0;
};

LipschitzReport lipschitz_ratios(const LinearKernel& lk, const std::vector<Profile>& family,
                                 const LogGrid& grid = {1e-3, 1e3, 61});

// Coefficients of the linear delay equation dI~/dt + M I~ - int m I~ ds = g.
struct DDECoefficients {
    double M = 0.0;
    double m = 0.0;
};

DDECoefficients lin_dde_coeffs(const LinearKernel& lk, double t, double s);
/// Coefficient of -I~(t) in B xi~ as a function of y; closed form after integration by parts.
double coefficient_closed(const LinearKernel& lk, double t, double y);
/// Same coefficient as a sum of integrals along y_p(.), before integration by parts.
double coefficient_integrals(const LinearKernel& lk, double t, double y);

struct LinearDDERun {
    volterra::Series I_coeff;     // coefficient route, coefficients as printed
    volterra::Series I_completed; // coefficient route with the initial-displacement term restored
    volterra::Series I_kernel;    // kernel route, I~' + K(0) I~ + int K'(t-s) I~(s) ds = K(t) I~(0) - g/denom
    double weighted_gap = 0.0;    // sup_t e^{t/(2p)} |I_coeff - I_kernel|
    double end_gap = 0.0;         // |I_coeff - I_kernel| at T
    double completed_gap = 0.0;   // sup_t |I_completed - I_kernel|
    double sup_abs = 0.0;         // sup |I_coeff|
    double M_residual_rate = 0.0; // fitted decay rate of |M(t) - K(0)|
    double m_residual = 0.0;      // sup |m(t,s) + K'(t-s)| e^{(t-s)/p + t/p}
    std::vector<double> dI;       // |dI~/dt| (coefficient route)
    RateFit dI_fit;
};

// Terms of B xi~ from the displacement e^{-t/p} xi_p'(y_p(0)) (y(0) - y_p(0)) of the
// initial datum: alpha multiplies I~(t), gamma I~(s), delta I~(0).
struct DisplacementTerms {
    double alpha = 0.0;
    double gamma = 0.0;
    double delta = 0.0;
};
DisplacementTerms displacement_terms(const LinearKernel& lk, double t, double s, double y);

LinearDDERun lin_dde_solve(const LinearKernel& lk, double I0_tilde, const Profile& xi0, double T,
                           double dt);

}  // namespace nlt::linstab
