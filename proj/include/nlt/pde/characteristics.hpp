#pragma once

#include <vector>

#include "nlt/core/profile.hpp"
#include "nlt/core/source.hpp"
#include "nlt/pde/history.hpp"

namespace nlt::pde {

// Quadrature plan for the characteristic integrals at one evaluation time t.
// With a(s) = e^{R(s)-R(t)} and Phi(s) = int_s^t a, the characteristic through
// (y, t) is y(s) = (y + Phi(s)) / a(s).
struct CharPlan {
    double t = 0.0;
    double Rt = 0.0;
    double a0 = 1.0;     // a(0)
    double Phi0 = 0.0;   // Phi(0)
    std::vector<double> s, w, inv_a, wa, Phi;   // per node; wa = w * a
    std::vector<size_t> first;                  // node offset of each interval
    std::vector<double> Phi_right;              // Phi at the right end of each interval
    std::vector<double> t_left, t_right;        // interval bounds (clipped to t)
    std::vector<size_t> hist_index;             // history interval of each plan interval
    int m = 2;

    size_t intervals() const { return t_left.size(); }
};

/// Gauss nodes (m per history interval) over [0, t].
CharPlan build_plan(const RhoHistory& h, double t, int m);

/// y(s) for the characteristic ending at (y, t).
double characteristic(const RhoHistory& h, double t, double y, double s);

// xi, xi', xi'' at (y, t) from the plan nodes only. Accurate when y is large
// compared with the step (the stepping grid lives on y >= eps0).
void eval_plan(const CharPlan& plan, const SourceFn& src, const Profile& xi0, double y,
               double& xi, double& d1);

/// Per-y evaluation with panels graded towards s = t where y is small compared with
/// the step; second derivative included when xi0 has one.
Jet eval_refined(const RhoHistory& h, const CharPlan& plan, const SourceFn& src,
                 const Profile& xi0, double y, bool second = true);

}  // namespace nlt::pde
