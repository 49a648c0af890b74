#pragma once

#include <cstddef>
#include <vector>

namespace nlt::pde {

// rho samples on a time grid; rho is piecewise linear in t and R = int_0^t rho is
// the exact (piecewise quadratic) integral of that interpolant.
class RhoHistory {
public:
    explicit RhoHistory(double rho0 = 0.0);

    void push(double t, double rho);
    void pop();

    size_t size() const { return t_.size(); }
    double t(size_t k) const { return t_[k]; }
    double rho(size_t k) const { return rho_[k]; }
    double R(size_t k) const { return R_[k]; }
    double t_last() const { return t_.back(); }
    const std::vector<double>& times() const { return t_; }

    /// Index k with t_k <= s < t_{k+1} (last interval for s = t_last).
    size_t locate(double s) const;
    double rho_at(double s) const;
    double R_at(double s) const;
    // same, inside a known interval
    double R_in(size_t k, double s) const {
        double d = s - t_[k];
        return R_[k] + d * (rho_[k] + 0.5 * d * slope_[k]);
    }

private:
    std::vector<double> t_, rho_, R_, slope_;
};

}  // namespace nlt::pde
