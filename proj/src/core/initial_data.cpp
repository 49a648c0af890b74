#include "nlt/core/initial_data.hpp"

#include <cmath>

#include "nlt/core/errors.hpp"

namespace nlt {

Profile make_initial(const InitialSpec& spec, const SourceFn& s, double p) {
    if (spec.family == "equilibrium") {
        double pp = spec.p_prime > 0.0 ? spec.p_prime : p;
        Profile prof = Equilibrium(s, pp, true).profile();
        prof.descriptor = "initial: equilibrium p'=" + std::to_string(pp);
        return prof;
    }
    if (spec.family == "scaled") {
        if (!(spec.c > 0.0)) throw ConfigError("initial data: scale c must be positive");
        Profile prof = Equilibrium(s, p, true).profile(spec.c);
        prof.descriptor = "initial: scaled c=" + std::to_string(spec.c);
        return prof;
    }
    if (spec.family == "perturbed") {
        if (!(spec.amplitude > -1.0)) throw ConfigError("initial data: amplitude must exceed -1");
        Equilibrium eq(s, p, true);
        double a = spec.amplitude;
        Profile prof;
        prof.eval = [eq, a](double y) {
            EquilibriumPoint e = eq.at(y);
            double ey = a * std::exp(-y);
            return Jet{e.xi * (1.0 + ey), e.dxi * (1.0 + ey) - e.xi * ey,
                       e.d2xi * (1.0 + ey) - 2.0 * e.dxi * ey + e.xi * ey};
        };
        prof.descriptor = "initial: perturbed a=" + std::to_string(a);
        prof.decreasing = a >= 0.0;
        return prof;
    }
    throw ConfigError("initial data: unknown family '" + spec.family + "'");
}

}  // namespace nlt
