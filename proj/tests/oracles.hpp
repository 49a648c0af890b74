#pragma once

#include <cmath>
#include <vector>

#include "nlt/core/quadrature.hpp"
#include "nlt/linstab/linstab.hpp"

namespace oracle {

// Decay exponent of the linearised flow: the largest real zero below -1/p of the
// continuation of 1 + K^(z) = 1 + c/(z + 1/p) + int (e^{t/p} K(t) - c) e^{-(z+1/p) t} dt,
// with c = lim e^{t/p} K(t) = -h_inf <dI, 1> / denom.
inline double linear_decay_rate(const nlt::linstab::LinearKernel& lk, double horizon = 150.0) {
    const double p = lk.p();
    const double c = -lk.model().source.h_inf() * lk.pair([](double) { return 1.0; }) / lk.denom();
    std::vector<double> t, R;
    const auto& gl = nlt::gauss_legendre(8);
    const double h = 0.25;
    for (int k = 0; k * h < horizon; ++k)
        for (size_t i = 0; i < gl.x.size(); ++i) {
            double s = h * k + 0.5 * h * (gl.x[i] + 1.0);
            t.push_back(s);
            R.push_back(0.5 * h * gl.w[i] * (std::exp(s / p) * lk.K(s) - c));
        }
    auto F = [&](double z) {
        double v = 1.0 + c / (z + 1.0 / p);
        for (size_t i = 0; i < t.size(); ++i) v += R[i] * std::exp(-(z + 1.0 / p) * t[i]);
        return v;
    };
    // scan down from -1/p (where F -> -inf) to the first sign change
    double hi = -1.0 / p - 1e-6, step = 0.005 / p, lo = hi - step;
    while (F(lo) < 0.0) {
        hi = lo;
        lo -= step;
        if (lo < -2.0 / p) return std::nan("");
    }
    for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        (F(mid) < 0.0 ? hi : lo) = mid;
    }
    return -0.5 * (lo + hi);
}

}  // namespace oracle
