#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nlt/core/source.hpp"

namespace nlt {

struct Profile {
    std::function<Jet(double)> eval;
    std::string descriptor;   // equilibrium | initial-data family | lagrangian
    bool decreasing = false;

    Jet operator()(double y) const { return eval(y); }
};

Profile constant_profile(double c);

struct LogGrid {
    double y_min = 1e-4;
    double y_max = 1e4;
    int n = 200;

    std::vector<double> points() const;
};

struct ABValue {
    double A = 0.0;
    double B = 0.0;
};

/// A z = z - y z',  B z = z/p - (1 + y/p) z'.
ABValue apply_AB(const Profile& prof, double p, double y);
inline ABValue apply_AB(const Jet& j, double p, double y) {
    return {j.v - y * j.d1, j.v / p - (1.0 + y / p) * j.d1};
}

/// sup over the grid of sum_{k<=m} y^k |z^(k)|. Uses central differences of z'
/// (step 1e-4 y) when the profile has no second derivative.
double weighted_norm(const Profile& prof, int m, const LogGrid& grid);

}  // namespace nlt
