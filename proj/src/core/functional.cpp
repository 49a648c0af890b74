#include "nlt/core/functional.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nlt/core/errors.hpp"
#include "nlt/core/quadrature.hpp"

namespace nlt {

double FunctionalSpec::integrand(double y, double z) const {
    double base = b(y) + z;
    if (q == 1.0) return a(y) / base;
    return a(y) * std::pow(base, -q);
}

double FunctionalSpec::gradient(double y, double z) const {
    if (y < eps0) return 0.0;
    double base = b(y) + z;
    if (q == 1.0) return -a(y) / (base * base);
    return -q * a(y) * std::pow(base, -q - 1.0);
}

FunctionalSpec canonical_functional(const SourceFn& s) {
    FunctionalSpec F;
    F.q = 1.0;
    F.eps0 = 1.0;
    F.a = [](double y) { return 1.0 / (y * y); };
    double b = s.eval(1.0, 0);
    F.b = [b](double) { return b; };
    F.b_name = "h(1)";
    return F;
}

namespace {

// Runs the mapped rule at n nodes, accumulating several integrals at once.
template <int K, class Fn>
void mapped_sums(const FunctionalSpec& F, int n, Fn fn, double* out) {
    MappedRule r = semi_infinite_rule(F.eps0, n);
    for (int k = 0; k < K; ++k) out[k] = 0.0;
    double vals[K];
    for (int i = 0; i < n; ++i) {
        fn(r.y[i], vals);
        for (int k = 0; k < K; ++k) out[k] += r.w[i] * vals[k];
    }
}

template <int K, class Fn>
void doubling_sums(const FunctionalSpec& F, Fn fn, double* out, const char* what) {
    double prev[K], cur[K];
    mapped_sums<K>(F, 128, fn, prev);
    for (int n = 256; n <= 1024; n *= 2) {
        mapped_sums<K>(F, n, fn, cur);
        bool done = true;
        for (int k = 0; k < K; ++k) {
            double d = std::abs(cur[k] - prev[k]);
            if (d > 1e-10 * std::abs(cur[k]) && d > 1e-15) done = false;
        }
        if (done) {
            for (int k = 0; k < K; ++k) out[k] = cur[k];
            return;
        }
        for (int k = 0; k < K; ++k) prev[k] = cur[k];
    }
    throw NumericError(std::string(what) + ": quadrature did not converge at 1024 nodes");
}

}  // namespace

double functional_I(const FunctionalSpec& F, const Profile& prof) {
    double I;
    doubling_sums<1>(F, [&](double y, double* v) { v[0] = F.integrand(y, prof(y).v); }, &I,
                     "functional I");
    if (!(I > 0.0) || !std::isfinite(I)) throw NumericError("functional I is not positive");
    return I;
}

double functional_dI(const FunctionalSpec& F, const Profile& prof, double y) {
    if (!(y > 0.0)) throw DomainError("functional_dI: y must be positive");
    if (y < F.eps0) return 0.0;
    return F.gradient(y, prof(y).v);
}

double inner_dI(const FunctionalSpec& F, const Profile& prof,
                const std::function<double(double)>& phi) {
    double s;
    doubling_sums<1>(F, [&](double y, double* v) { v[0] = F.gradient(y, prof(y).v) * phi(y); },
                     &s, "inner product with dI");
    return s;
}

RhoValue rho(const FunctionalSpec& F, const SourceFn& S, double p, const Profile& prof) {
    double s[3];
    doubling_sums<3>(
        F,
        [&](double y, double* v) {
            Jet z = prof(y);
            double g = F.gradient(y, z.v);
            v[0] = F.integrand(y, z.v);
            v[1] = g * (S.eval(y, 0) + z.d1);
            v[2] = g * (z.v - y * z.d1);
        },
        s, "rho");
    RhoValue r;
    r.I = s[0];
    r.numerator = s[0] + s[1];
    r.denominator = p * s[0] + s[2];
    if (!(r.denominator > kDenFloor * p * r.I))
        throw ModelError("rho: denominator pI + <dI, A z> = " + std::to_string(r.denominator) +
                         " is below the positivity floor");
    r.rho = r.numerator / r.denominator;
    return r;
}

FunctionalRule::FunctionalRule(const FunctionalSpec& F, int n) : q(F.q) {
    MappedRule r = semi_infinite_rule(F.eps0, n);
    y = r.y;
    w = r.w;
    a.resize(n);
    b.resize(n);
    for (int i = 0; i < n; ++i) {
        a[i] = F.a(y[i]);
        b[i] = F.b(y[i]);
    }
}

double FunctionalRule::integrand(size_t i, double z) const {
    double base = b[i] + z;
    return q == 1.0 ? a[i] / base : a[i] * std::pow(base, -q);
}

double FunctionalRule::gradient(size_t i, double z) const {
    double base = b[i] + z;
    return q == 1.0 ? -a[i] / (base * base) : -q * a[i] * std::pow(base, -q - 1.0);
}

double sampled_positivity(const FunctionalSpec& F, const SourceFn& S,
                          const std::vector<Profile>& family) {
    double inf = std::numeric_limits<double>::infinity();
    for (const Profile& z : family) {
        double I = functional_I(F, z);
        double g = inner_dI(F, z, [&](double y) { return S.eval(y, 0); });
        inf = std::min(inf, I + g);
    }
    return inf;
}

}  // namespace nlt
