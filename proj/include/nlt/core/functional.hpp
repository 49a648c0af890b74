#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nlt/core/profile.hpp"
#include "nlt/core/source.hpp"

namespace nlt {

// I(z) = int_{eps0}^inf a(y) / (b(y) + z(y))^q dy
struct FunctionalSpec {
    double q = 1.0;
    double eps0 = 1.0;
    std::function<double(double)> a;
    std::function<double(double)> b;
    std::string a_name = "y^-2";
    std::string b_name;

    double integrand(double y, double z) const;
    /// -q a / (b + z)^(q+1) for y >= eps0, zero below.
    double gradient(double y, double z) const;
};

/// q = 1, eps0 = 1, a = y^-2, b = h(1).
FunctionalSpec canonical_functional(const SourceFn& s);

double functional_I(const FunctionalSpec& F, const Profile& prof);
double functional_dI(const FunctionalSpec& F, const Profile& prof, double y);
/// <dI(z), phi> on the same rule as functional_I.
double inner_dI(const FunctionalSpec& F, const Profile& prof,
                const std::function<double(double)>& phi);

struct RhoValue {
    double rho = 0.0;
    double numerator = 0.0;    // I + <dI, h + z'>
    double denominator = 0.0;  // p I + <dI, A z>
    double I = 0.0;
};

// Relative floor on the denominator: den >= kDenFloor * p I.
inline constexpr double kDenFloor = 1e-8;

/// Nonlocal coefficient rho(z). Throws ModelError when the denominator falls
/// below the positivity floor.
RhoValue rho(const FunctionalSpec& F, const SourceFn& S, double p, const Profile& prof);

// Fixed mapped rule with the weights a, b folded in; used inside time stepping.
struct FunctionalRule {
    std::vector<double> y, w, a, b;
    double q = 1.0;

    FunctionalRule() = default;
    FunctionalRule(const FunctionalSpec& F, int n);
    size_t size() const { return y.size(); }
    double integrand(size_t i, double z) const;
    double gradient(size_t i, double z) const;
};

/// Sampled inf of I(z) + <dI(z), h> over a set of profiles (reported, not certified).
double sampled_positivity(const FunctionalSpec& F, const SourceFn& S,
                          const std::vector<Profile>& family);

}  // namespace nlt
