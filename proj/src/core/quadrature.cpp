#include "nlt/core/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/legendre.hpp>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "nlt/core/errors.hpp"

namespace nlt {

namespace {

GaussRule build_rule(int n) {
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    // boost returns the nonnegative zeros in increasing order
    auto zeros = boost::math::legendre_p_zeros<double>(n);
    int m = static_cast<int>(zeros.size());
    for (int i = 0; i < m; ++i) {
        double x = zeros[i];
        double dp = boost::math::legendre_p_prime<double>(n, x);
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        int hi = n / 2 + i;
        int lo = (n - 1) / 2 - i;
        r.x[hi] = x;
        r.w[hi] = w;
        r.x[lo] = -x;
        r.w[lo] = w;
    }
    return r;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
    if (n < 1) throw DomainError("gauss_legendre: n must be positive");
    static std::mutex mu;
    static std::map<int, std::unique_ptr<GaussRule>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<GaussRule>(build_rule(n));
    return *slot;
}

double gauss_integrate(const std::function<double(double)>& f, double a, double b, int n) {
    const GaussRule& g = gauss_legendre(n);
    double c = 0.5 * (a + b), h = 0.5 * (b - a), s = 0.0;
    for (int i = 0; i < n; ++i) s += g.w[i] * f(c + h * g.x[i]);
    return s * h;
}

MappedRule semi_infinite_rule(double y0, int n, double scale) {
    const GaussRule& g = gauss_legendre(n);
    MappedRule r;
    r.y.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        double u = 0.5 * (g.x[i] + 1.0);
        double om = 1.0 - u;
        r.y[i] = y0 + scale * u / om;
        r.w[i] = 0.5 * scale * g.w[i] / (om * om);
    }
    return r;
}

namespace {

template <class Run>
QuadResult doubling(Run run, double rel_tol, int n0, int n_max, const char* what) {
    QuadResult out;
    double prev = run(n0);
    for (int n = 2 * n0; n <= n_max; n *= 2) {
        double cur = run(n);
        double scale = std::max(std::abs(cur), 1e-300);
        double rc = std::abs(cur - prev) / scale;
        if (rc < rel_tol || std::abs(cur - prev) < 1e-15) {
            out.value = cur;
            out.nodes = n;
            out.rel_change = rc;
            return out;
        }
        prev = cur;
    }
    throw NumericError(std::string(what) + " quadrature did not converge: last value " +
                       std::to_string(prev) + " at " + std::to_string(n_max) + " nodes");
}

}  // namespace

QuadResult integrate_semi_infinite(const std::function<double(double)>& f, double y0,
                                   double rel_tol, int n0, int n_max, double scale) {
    auto run = [&](int n) {
        MappedRule r = semi_infinite_rule(y0, n, scale);
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += r.w[i] * f(r.y[i]);
        return s;
    };
    return doubling(run, rel_tol, n0, n_max, "semi-infinite");
}

QuadResult integrate_finite(const std::function<double(double)>& f, double a, double b,
                            double rel_tol, int n0, int n_max) {
    auto run = [&](int n) { return gauss_integrate(f, a, b, n); };
    return doubling(run, rel_tol, n0, n_max, "finite-interval");
}

double adaptive_integrate(const std::function<double(double)>& f, double a, double b,
                          double rel_tol, int max_depth) {
    double err = 0.0;
    double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, max_depth,
                                                                            rel_tol, &err);
    if (!std::isfinite(v)) throw NumericError("adaptive quadrature produced a non-finite value");
    return v;
}

}  // namespace nlt
