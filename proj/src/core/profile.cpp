#include "nlt/core/profile.hpp"

#include <algorithm>
#include <cmath>

#include "nlt/core/errors.hpp"

namespace nlt {

Profile constant_profile(double c) {
    Profile p;
    p.eval = [c](double) { return Jet{c, 0.0, 0.0}; };
    p.descriptor = "constant";
    p.decreasing = true;
    return p;
}

std::vector<double> LogGrid::points() const {
    if (!(y_min > 0.0) || !(y_max > y_min) || n < 2) throw DomainError("log grid: bad bounds");
    std::vector<double> out(n);
    double a = std::log(y_min), b = std::log(y_max);
    for (int i = 0; i < n; ++i) out[i] = std::exp(a + (b - a) * i / (n - 1));
    return out;
}

ABValue apply_AB(const Profile& prof, double p, double y) {
    return apply_AB(prof(y), p, y);
}

double weighted_norm(const Profile& prof, int m, const LogGrid& grid) {
    if (m < 0 || m > 2) throw DomainError("weighted_norm: m must be 0, 1 or 2");
    double sup = 0.0;
    for (double y : grid.points()) {
        Jet j = prof(y);
        double s = std::abs(j.v);
        if (m >= 1) s += y * std::abs(j.d1);
        if (m >= 2) {
            double d2 = j.d2;
            if (!std::isfinite(d2)) {
                double h = 1e-4 * y;
                d2 = (prof(y + h).d1 - prof(y - h).d1) / (2.0 * h);
            }
            s += y * y * std::abs(d2);
        }
        sup = std::max(sup, s);
    }
    return sup;
}

}  // namespace nlt
