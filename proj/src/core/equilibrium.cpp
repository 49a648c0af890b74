#include "nlt/core/equilibrium.hpp"

#include <cmath>

#include "nlt/core/errors.hpp"
#include "nlt/core/quadrature.hpp"

namespace nlt {

namespace {

constexpr double kTabMin = 1e-10;
constexpr double kTabMax = 1e40;
constexpr int kPerDecade = 256;

}  // namespace

Equilibrium::Equilibrium(SourceFn s, double p, bool tabulate) : s_(std::move(s)), p_(p) {
    if (!(p > 0.0)) throw DomainError("equilibrium: p must be positive");
    if (!tabulate || s_.is_constant()) return;
    auto t = std::make_shared<Table>();
    t->x0 = std::log(kTabMin);
    int n = static_cast<int>(std::round(std::log10(kTabMax / kTabMin) * kPerDecade)) + 1;
    t->dx = (std::log(kTabMax) - t->x0) / (n - 1);
    t->P.resize(n);
    t->dP.resize(n);
    // integrate panel by panel from the top so each node costs one short rule
    double top = std::exp(t->x0 + t->dx * (n - 1));
    t->P[n - 1] = P_exact(top);
    auto f = [&](double x) {
        double y = std::exp(x);
        return p_ * s_.eval(y, 0) * y / ((p_ + y) * (p_ + y));
    };
    for (int i = n - 1; i >= 0; --i) {
        double x = t->x0 + t->dx * i;
        if (i < n - 1) t->P[i] = t->P[i + 1] + gauss_integrate(f, x, x + t->dx, 12);
        t->dP[i] = -f(x);
    }
    table_ = std::move(t);
}

double Equilibrium::P_exact(double y) const {
    if (!(y > 0.0)) throw DomainError("equilibrium: y must be positive");
    if (s_.is_constant()) return p_ * s_.h_inf() / (p_ + y);
    auto f = [&](double t) { return p_ * s_.eval(t, 0) / ((p_ + t) * (p_ + t)); };
    if (y >= 1.0) return integrate_semi_infinite(f, y, 1e-14, 32, 4096, p_ + y).value;
    // log variable on [y, 1], mapped rule above
    auto g = [&](double x) {
        double t = std::exp(x);
        return f(t) * t;
    };
    double upper = integrate_semi_infinite(f, 1.0, 1e-14, 32, 4096, p_ + 1.0).value;
    return upper + integrate_finite(g, std::log(y), 0.0, 1e-14, 16, 4096).value;
}

double Equilibrium::P(double y) const {
    if (!table_ || y < kTabMin || y >= kTabMax) return P_exact(y);
    const Table& t = *table_;
    double x = std::log(y);
    double r = (x - t.x0) / t.dx;
    size_t i = static_cast<size_t>(r);
    if (i + 1 >= t.P.size()) i = t.P.size() - 2;
    double u = r - static_cast<double>(i);
    double u2 = u * u, u3 = u2 * u;
    double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u;
    double h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
    return h00 * t.P[i] + h10 * t.dx * t.dP[i] + h01 * t.P[i + 1] + h11 * t.dx * t.dP[i + 1];
}

EquilibriumPoint Equilibrium::at(double y) const {
    if (!(y > 0.0)) throw DomainError("equilibrium: y must be positive");
    EquilibriumPoint e;
    double h = s_.eval(y, 0), h1 = s_.eval(y, 1);
    e.P = P(y);
    double py = p_ + y;
    e.xi = py * e.P;
    e.dxi = e.P - p_ * h / py;
    e.d2xi = -p_ * h1 / py;
    e.Axi = p_ * e.P + y * p_ * h / py;
    e.dAxi = y * p_ * h1 / py;
    return e;
}

Profile Equilibrium::profile(double scale) const {
    Profile prof;
    Equilibrium self = *this;
    prof.eval = [self, scale](double y) {
        EquilibriumPoint e = self.at(y);
        return Jet{scale * e.xi, scale * e.dxi, scale * e.d2xi};
    };
    prof.descriptor = scale == 1.0 ? "equilibrium" : "scaled equilibrium";
    prof.decreasing = true;
    return prof;
}

EquilibriumPoint equilibrium_xi_p(const SourceFn& s, double p, double y) {
    return Equilibrium(s, p).at(y);
}

}  // namespace nlt
