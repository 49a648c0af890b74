#include "nlt/core/source.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nlt/core/errors.hpp"
#include "nlt/core/quadrature.hpp"

namespace nlt {

Kernel Kernel::log() {
    Kernel k;
    k.id = Id::log;
    k.name = "log";
    k.convex = true;
    return k;
}

Kernel Kernel::exp() {
    Kernel k;
    k.id = Id::exp;
    k.name = "exp";
    k.convex = true;
    return k;
}

Kernel Kernel::compact() {
    Kernel k;
    k.id = Id::compact;
    k.name = "compact";
    k.convex = true;
    k.support = 1.0;
    return k;
}

Kernel Kernel::custom(std::string name, std::function<double(double)> kf,
                      std::function<double(double)> dkf, bool convex, double support) {
    Kernel k;
    k.id = Id::custom;
    k.name = std::move(name);
    k.k = std::move(kf);
    k.dk = std::move(dkf);
    k.convex = convex;
    k.support = support;
    return k;
}

double Kernel::value(double y) const {
    switch (id) {
        case Id::log: return 1.0 / (1.0 + y);
        case Id::exp: return std::exp(-y);
        case Id::compact: return y < 1.0 ? (1.0 - y) * (1.0 - y) : 0.0;
        case Id::custom: return y < support ? k(y) : 0.0;
    }
    return 0.0;
}

double Kernel::deriv(double y) const {
    switch (id) {
        case Id::log: return -1.0 / ((1.0 + y) * (1.0 + y));
        case Id::exp: return -std::exp(-y);
        case Id::compact: return y < 1.0 ? -2.0 * (1.0 - y) : 0.0;
        case Id::custom: return y < support ? dk(y) : 0.0;
    }
    return 0.0;
}

SourceFn SourceFn::constant(double h_inf) {
    if (!(h_inf > 0.0)) throw ConfigError("source: h_inf must be positive");
    SourceFn s;
    s.kind_ = Kind::constant;
    s.h_inf_ = h_inf;
    return s;
}

SourceFn SourceFn::kernel_inf(double h_inf, Kernel k) {
    if (!(h_inf > 0.0)) throw ConfigError("source: h_inf must be positive");
    if (k.id == Kernel::Id::custom && (!k.k || !k.dk))
        throw ConfigError("source: custom kernel needs k and k'");
    SourceFn s;
    s.kind_ = Kind::kernel_inf;
    s.h_inf_ = h_inf;
    s.kernel_ = std::move(k);
    return s;
}

SourceFn SourceFn::kernel_p(double h_inf, double p, Kernel k) {
    if (!(h_inf > 0.0)) throw ConfigError("source: h_inf must be positive");
    if (!(p > 0.0)) throw ConfigError("source: kernel_p needs p > 0");
    if (k.id == Kernel::Id::log)
        throw ConfigError("source: kernel_p with k = 1/(1+y) has a divergent tail integral");
    if (k.id == Kernel::Id::custom && (!k.k || !k.dk))
        throw ConfigError("source: custom kernel needs k and k'");
    SourceFn s;
    s.kind_ = Kind::kernel_p;
    s.h_inf_ = h_inf;
    s.p_ = p;
    s.kernel_ = std::move(k);
    return s;
}

SourceFn SourceFn::tabulated(std::vector<double> y, std::vector<double> h, double h_inf) {
    const size_t n = y.size();
    if (n < 3 || h.size() != n) throw ConfigError("source: table needs at least 3 matching points");
    for (size_t i = 1; i < n; ++i)
        if (!(y[i] > y[i - 1])) throw ConfigError("source: table abscissae must increase");
    if (!(y[0] > 0.0)) throw ConfigError("source: table must start at y > 0");
    if (std::abs(h.back() - h_inf) > 1e-8 * std::max(1.0, h_inf))
        throw ConfigError("source: last table value must equal h_inf");
    auto sp = std::make_shared<Spline>();
    sp->x = std::move(y);
    sp->f = std::move(h);
    sp->m.assign(n, 0.0);
    // natural spline: tridiagonal system for interior second derivatives
    std::vector<double> a(n, 0.0), b(n, 1.0), c(n, 0.0), d(n, 0.0);
    for (size_t i = 1; i + 1 < n; ++i) {
        double h0 = sp->x[i] - sp->x[i - 1], h1 = sp->x[i + 1] - sp->x[i];
        a[i] = h0 / 6.0;
        b[i] = (h0 + h1) / 3.0;
        c[i] = h1 / 6.0;
        d[i] = (sp->f[i + 1] - sp->f[i]) / h1 - (sp->f[i] - sp->f[i - 1]) / h0;
    }
    for (size_t i = 1; i < n; ++i) {
        double w = a[i] / b[i - 1];
        b[i] -= w * c[i - 1];
        d[i] -= w * d[i - 1];
    }
    sp->m[n - 1] = d[n - 1] / b[n - 1];
    for (size_t i = n - 1; i-- > 0;) sp->m[i] = (d[i] - c[i] * sp->m[i + 1]) / b[i];
    SourceFn s;
    s.kind_ = Kind::tabulated;
    s.h_inf_ = h_inf;
    s.table_ = std::move(sp);
    return s;
}

double SourceFn::tail(double y) const {
    const Kernel& k = kernel_;
    if (kind_ == Kind::kernel_inf) {
        switch (k.id) {
            case Kernel::Id::log: return std::log1p(1.0 / y);
            case Kernel::Id::exp: return -std::expint(-y);
            case Kernel::Id::compact:
                return y < 1.0 ? -std::log(y) - 1.5 + 2.0 * y - 0.5 * y * y : 0.0;
            case Kernel::Id::custom:
                if (y >= k.support) return 0.0;
                return adaptive_integrate([&](double t) { return k.value(t) / t; }, y, k.support);
        }
    } else {
        switch (k.id) {
            case Kernel::Id::log: break;
            case Kernel::Id::exp: return std::exp(-y) - p_ * std::expint(-y);
            case Kernel::Id::compact: {
                if (y >= 1.0) return 0.0;
                double u = 1.0 - y;
                return u * u * u / 3.0 + p_ * (-std::log(y) - 1.5 + 2.0 * y - 0.5 * y * y);
            }
            case Kernel::Id::custom:
                if (y >= k.support) return 0.0;
                return adaptive_integrate([&](double t) { return (1.0 + p_ / t) * k.value(t); }, y,
                                          k.support);
        }
    }
    throw DomainError("source: tail integral unavailable");
}

double SourceFn::table_eval(double y, int order) const {
    const Spline& s = *table_;
    if (y < s.x.front()) throw DomainError("source: y below table range");
    if (y >= s.x.back()) return order == 0 ? h_inf_ : 0.0;
    size_t i = std::upper_bound(s.x.begin(), s.x.end(), y) - s.x.begin() - 1;
    double h = s.x[i + 1] - s.x[i];
    double A = (s.x[i + 1] - y) / h, B = (y - s.x[i]) / h;
    switch (order) {
        case 0:
            return A * s.f[i] + B * s.f[i + 1] +
                   ((A * A * A - A) * s.m[i] + (B * B * B - B) * s.m[i + 1]) * h * h / 6.0;
        case 1:
            return (s.f[i + 1] - s.f[i]) / h - (3 * A * A - 1) / 6.0 * h * s.m[i] +
                   (3 * B * B - 1) / 6.0 * h * s.m[i + 1];
        default: return A * s.m[i] + B * s.m[i + 1];
    }
}

double SourceFn::eval(double y, int order) const {
    if (!(y > 0.0)) throw DomainError("source: y must be positive");
    if (order < 0 || order > 2) throw DomainError("source: derivative order above 2 unsupported");
    switch (kind_) {
        case Kind::constant: return order == 0 ? h_inf_ : 0.0;
        case Kind::tabulated: return table_eval(y, order);
        case Kind::kernel_inf: {
            if (order == 0) return h_inf_ + tail(y);
            double k = kernel_.value(y);
            if (order == 1) return -k / y;
            return k / (y * y) - kernel_.deriv(y) / y;
        }
        case Kind::kernel_p: {
            if (order == 0) return h_inf_ + tail(y);
            double k = kernel_.value(y);
            if (order == 1) return -(1.0 + p_ / y) * k;
            return p_ / (y * y) * k - (1.0 + p_ / y) * kernel_.deriv(y);
        }
    }
    return 0.0;
}

Jet SourceFn::jet(double y) const {
    return Jet{eval(y, 0), eval(y, 1), eval(y, 2)};
}

std::string SourceFn::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::constant: os << "constant(h_inf=" << h_inf_ << ")"; break;
        case Kind::kernel_inf: os << "kernel_inf(h_inf=" << h_inf_ << ", k=" << kernel_.name << ")"; break;
        case Kind::kernel_p:
            os << "kernel_p(h_inf=" << h_inf_ << ", p=" << p_ << ", k=" << kernel_.name << ")";
            break;
        case Kind::tabulated: os << "tabulated(" << table_->x.size() << " points)"; break;
    }
    return os.str();
}

SourceReport check_source(const SourceFn& s, double y_min, double y_max, int n, double tol,
                          double cap) {
    SourceReport r;
    std::vector<double> ys(n);
    double lmin = std::log(y_min), lmax = std::log(y_max);
    for (int i = 0; i < n; ++i) ys[i] = std::exp(lmin + (lmax - lmin) * i / (n - 1));
    double prev_h = std::numeric_limits<double>::infinity();
    double prev_q = std::numeric_limits<double>::infinity();
    r.min_yh2_plus_h1 = std::numeric_limits<double>::infinity();
    for (double y : ys) {
        Jet j = s.jet(y);
        if (!(j.v > 0.0)) r.positive = false;
        if (j.v > prev_h + tol * std::max(1.0, std::abs(prev_h))) r.nonincreasing = false;
        prev_h = j.v;
        r.sup_y_h1 = std::max(r.sup_y_h1, y * std::abs(j.d1));
        r.sup_y2_h2 = std::max(r.sup_y2_h2, y * y * std::abs(j.d2));
        r.min_yh2_plus_h1 = std::min(r.min_yh2_plus_h1, y * j.d2 + j.d1);
        double q = y * y * j.d2;
        if (std::isfinite(prev_q)) r.max_y2h2_increase = std::max(r.max_y2h2_increase, q - prev_q);
        prev_q = q;
    }
    r.tail_gap = std::abs(s.eval(1e6, 0) - s.h_inf());
    r.yh_at_small = ys[0] * s.eval(ys[0], 0);
    std::ostringstream msg;
    if (!r.positive) msg << "h not positive; ";
    if (!r.nonincreasing) msg << "h increases; ";
    if (r.tail_gap > 1e-4 * s.h_inf()) msg << "h(1e6) far from h_inf; ";
    if (r.sup_y_h1 > cap || r.sup_y2_h2 > cap) msg << "derivative bounds above cap; ";
    if (s.kind() == SourceFn::Kind::kernel_inf && s.kernel().convex) {
        r.convexity_conditions = r.min_yh2_plus_h1 >= -tol && r.max_y2h2_increase <= tol;
        if (!r.convexity_conditions) msg << "convexity conditions fail; ";
    }
    r.message = msg.str();
    r.ok = r.message.empty();
    return r;
}

}  // namespace nlt
