#pragma once

#include <memory>
#include <vector>

#include "nlt/core/profile.hpp"
#include "nlt/core/source.hpp"

namespace nlt {

struct EquilibriumPoint {
    double xi = 0.0;    // xi_p
    double dxi = 0.0;   // xi_p'
    double d2xi = 0.0;  // xi_p''
    double Axi = 0.0;   // A xi_p
    double dAxi = 0.0;  // (A xi_p)'
    double P = 0.0;     // int_y^inf p h / (p + y')^2 dy'
};

// Stationary profile xi_p(y) = (p + y) P(y). Derivatives use B xi_p = h in
// closed form, so B xi_p - h vanishes identically whatever the error in P.
class Equilibrium {
public:
    /// tabulate: cache P on a log grid with Hermite interpolation (relative
    /// error below 5e-11), falling back to quadrature outside [1e-10, 1e40].
    Equilibrium(SourceFn s, double p, bool tabulate = false);

    double p() const { return p_; }
    const SourceFn& source() const { return s_; }
    double P(double y) const;
    double P_exact(double y) const;
    EquilibriumPoint at(double y) const;
    Profile profile(double scale = 1.0) const;

private:
    SourceFn s_;
    double p_;
    struct Table {
        double x0, dx;
        std::vector<double> P, dP;  // dP is dP/dx with x = ln y
    };
    std::shared_ptr<const Table> table_;
};

/// (xi_p(y), xi_p'(y), A xi_p(y)) by quadrature.
EquilibriumPoint equilibrium_xi_p(const SourceFn& s, double p, double y);

}  // namespace nlt
