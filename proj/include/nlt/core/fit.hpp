#pragma once

#include <vector>

namespace nlt {

struct RateFit {
    double window = 0.5;     // trailing fraction of the time span
    double rate = 0.0;       // decay positive: v ~ exp(intercept - rate t)
    double intercept = 0.0;
    double r2 = 1.0;
    size_t samples = 0;
};

/// Least squares on log v over t >= t_end - window (t_end - t_0). Throws
/// DomainError on nonpositive values in the window or fewer than 10 samples.
RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& v, double window = 0.5);

}  // namespace nlt
