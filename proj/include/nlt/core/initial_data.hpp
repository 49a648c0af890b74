#pragma once

#include <string>

#include "nlt/core/equilibrium.hpp"
#include "nlt/core/profile.hpp"

namespace nlt {

// Initial-data families. All are C^2 and decreasing for admissible parameters.
struct InitialSpec {
    std::string family = "equilibrium";  // equilibrium | scaled | perturbed
    double p_prime = 0.0;                // equilibrium of a different p
    double c = 1.0;                      // scaled: c * xi_p
    double amplitude = 0.0;              // perturbed: xi_p (1 + amplitude e^{-y})
};

Profile make_initial(const InitialSpec& spec, const SourceFn& s, double p);

}  // namespace nlt
