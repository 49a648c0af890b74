#pragma once

#include <functional>
#include <vector>

namespace nlt {

struct GaussRule {
    std::vector<double> x;  // nodes on [-1, 1]
    std::vector<double> w;
};

/// Gauss-Legendre rule with n nodes. Cached, thread safe.
const GaussRule& gauss_legendre(int n);

/// Integral of f over [a, b] with an n-point rule.
double gauss_integrate(const std::function<double(double)>& f, double a, double b, int n);

// Nodes and weights for the map y = y0 + scale*u/(1-u), u in [0,1).
struct MappedRule {
    std::vector<double> y;
    std::vector<double> w;
};

MappedRule semi_infinite_rule(double y0, int n, double scale = 1.0);

struct QuadResult {
    double value = 0.0;
    int nodes = 0;
    double rel_change = 0.0;
};

/// Integral of f over [y0, inf) with node doubling from n0 until the relative
/// change drops below rel_tol. Throws NumericError past n_max.
QuadResult integrate_semi_infinite(const std::function<double(double)>& f, double y0,
                                   double rel_tol = 1e-10, int n0 = 128, int n_max = 1024,
                                   double scale = 1.0);

/// Same doubling loop for a finite interval.
QuadResult integrate_finite(const std::function<double(double)>& f, double a, double b,
                            double rel_tol = 1e-12, int n0 = 16, int n_max = 1024);

/// Adaptive Gauss-Kronrod (boost) on [a, b]; b may be +inf.
double adaptive_integrate(const std::function<double(double)>& f, double a, double b,
                          double rel_tol = 1e-12, int max_depth = 30);

}  // namespace nlt
