#pragma once

#include <map>
#include <string>
#include <vector>

namespace nlt {

// Sampled observables of a run.
struct Trajectory {
    std::string label;
    double p = 0.0;
    std::vector<double> t, rho, I, dist1inf, norm2inf, denom;
    // monitors
    std::vector<double> min_xi;         // inf of xi over the diagnostic grid
    std::vector<double> max_dxi;        // sup of xi' (<= 0 for decreasing profiles)
    std::vector<double> sup_inf_ratio;  // sup xi / inf xi over y >= eps0
    // every committed step (the sampled columns above use the run stride)
    std::vector<double> step_t, step_rho, step_I;
    std::map<std::string, double> summary;

    size_t size() const { return t.size(); }
    /// Columns t,rho,I,dist1inf,norm2inf,denomL1.
    std::string csv() const;
};

/// Shortest round-trip decimal (at most 17 significant digits).
std::string format_double(double x);

/// Writes through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& content);

/// max over interior samples of |d/dt log I - (p rho - 1)| / p, centred differences.
/// Uses the per-step series when present.
double log_derivative_residual(const Trajectory& traj);

}  // namespace nlt
