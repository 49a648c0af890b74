#include "nlt/core/fit.hpp"

#include <algorithm>
#include <cmath>

#include "nlt/core/errors.hpp"

namespace nlt {

RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& v, double window) {
    if (t.size() != v.size() || t.empty()) throw DomainError("fit_rate: series size mismatch or empty");
    if (!(window > 0.0) || window > 1.0) throw DomainError("fit_rate: window must lie in (0, 1]");
    const double t0 = t.front(), t1 = t.back();
    const double start = t1 - window * (t1 - t0);
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::vector<std::pair<double, double>> pts;
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] < start - 1e-12 * std::max(1.0, std::abs(start))) continue;
        if (!(v[i] > 0.0))
            throw DomainError("fit_rate: nonpositive value " + std::to_string(v[i]) + " at t = " + std::to_string(t[i]));
        pts.emplace_back(t[i], std::log(v[i]));
    }
    if (pts.size() < 10) throw DomainError("fit_rate: fewer than 10 samples in window");
    // centre t for conditioning
    double tm = 0.0;
    for (auto& p : pts) tm += p.first;
    tm /= static_cast<double>(pts.size());
    for (auto& [x, y] : pts) {
        double xc = x - tm;
        n += 1;
        sx += xc;
        sy += y;
        sxx += xc * xc;
        sxy += xc * y;
    }
    RateFit f;
    f.window = window;
    f.samples = pts.size();
    double det = n * sxx - sx * sx;
    if (!(det > 0.0)) throw DomainError("fit_rate: degenerate time window");
    double slope = (n * sxy - sx * sy) / det;
    double icpt = (sy - slope * sx) / n;
    f.rate = -slope;
    f.intercept = icpt - slope * tm;
    double ym = sy / n, ss_tot = 0.0, ss_res = 0.0;
    for (auto& [x, y] : pts) {
        double r = y - (icpt + slope * (x - tm));
        ss_res += r * r;
        ss_tot += (y - ym) * (y - ym);
    }
    f.r2 = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
    return f;
}

}  // namespace nlt
