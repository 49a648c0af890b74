#include "nlt/pde/history.hpp"

#include <algorithm>

#include "nlt/core/errors.hpp"

namespace nlt::pde {

RhoHistory::RhoHistory(double rho0) : t_{0.0}, rho_{rho0}, R_{0.0}, slope_{0.0} {}

void RhoHistory::push(double t, double rho) {
    double dt = t - t_.back();
    if (!(dt > 0.0)) throw DomainError("history: times must increase");
    slope_.back() = (rho - rho_.back()) / dt;
    R_.push_back(R_.back() + 0.5 * dt * (rho_.back() + rho));
    t_.push_back(t);
    rho_.push_back(rho);
    slope_.push_back(0.0);
}

void RhoHistory::pop() {
    if (t_.size() <= 1) throw DomainError("history: cannot pop the initial sample");
    t_.pop_back();
    rho_.pop_back();
    R_.pop_back();
    slope_.pop_back();
    slope_.back() = 0.0;
}

size_t RhoHistory::locate(double s) const {
    if (s < 0.0 || s > t_.back() * (1 + 1e-14) + 1e-300)
        throw DomainError("history: time outside the committed grid");
    if (t_.size() == 1) return 0;
    size_t k = std::upper_bound(t_.begin(), t_.end(), s) - t_.begin();
    if (k == 0) return 0;
    return std::min(k - 1, t_.size() - 2);
}

double RhoHistory::rho_at(double s) const {
    size_t k = locate(s);
    if (t_.size() == 1) return rho_[0];
    return rho_[k] + slope_[k] * (s - t_[k]);
}

double RhoHistory::R_at(double s) const {
    size_t k = locate(s);
    if (t_.size() == 1) return rho_[0] * s;
    return R_in(k, s);
}

}  // namespace nlt::pde
