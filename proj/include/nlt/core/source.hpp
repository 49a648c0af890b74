#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace nlt {

// Value with first and second derivative. d2 is NaN when not available.
struct Jet {
    double v = 0.0;
    double d1 = 0.0;
    double d2 = std::numeric_limits<double>::quiet_NaN();
};

struct Kernel {
    enum class Id { log, exp, compact, custom };
    Id id = Id::custom;
    std::string name;
    std::function<double(double)> k;
    std::function<double(double)> dk;
    double support = std::numeric_limits<double>::infinity();  // k = 0 beyond
    bool convex = false;

    static Kernel log();      // 1/(1+y)
    static Kernel exp();      // e^{-y}
    static Kernel compact();  // (1-y)_+^2
    static Kernel custom(std::string name, std::function<double(double)> k,
                         std::function<double(double)> dk, bool convex,
                         double support = std::numeric_limits<double>::infinity());

    double value(double y) const;
    double deriv(double y) const;
};

class SourceFn {
public:
    enum class Kind { constant, kernel_p, kernel_inf, tabulated };

    static SourceFn constant(double h_inf);
    // h = h_inf + int_y^inf k(y')/y' dy'
    static SourceFn kernel_inf(double h_inf, Kernel k);
    // h = h_inf + int_y^inf (1 + p/y') k(y') dy'
    static SourceFn kernel_p(double h_inf, double p, Kernel k);
    // Natural cubic spline through (y_i, h_i); h = h_inf past the last node, which
    // must already equal h_inf.
    static SourceFn tabulated(std::vector<double> y, std::vector<double> h, double h_inf);

    /// h, h' or h'' at y > 0.
    double eval(double y, int order) const;
    Jet jet(double y) const;
    // h and h' only; the hot path of the characteristic sums
    void eval01(double y, double& h, double& h1) const {
        if (kind_ == Kind::kernel_inf && kernel_.id == Kernel::Id::log) {
            h = h_inf_ + std::log1p(1.0 / y);
            h1 = -1.0 / (y * (1.0 + y));
        } else if (kind_ == Kind::constant) {
            h = h_inf_;
            h1 = 0.0;
        } else {
            h = eval(y, 0);
            h1 = eval(y, 1);
        }
    }

    Kind kind() const { return kind_; }
    double h_inf() const { return h_inf_; }
    double p() const { return p_; }
    const Kernel& kernel() const { return kernel_; }
    std::string describe() const;
    bool is_constant() const { return kind_ == Kind::constant; }

private:
    double tail(double y) const;
    double table_eval(double y, int order) const;

    Kind kind_ = Kind::constant;
    double h_inf_ = 1.0;
    double p_ = 0.0;
    Kernel kernel_;
    struct Spline {
        std::vector<double> x, f, m;  // m = second derivatives at the nodes
    };
    std::shared_ptr<const Spline> table_;
};

struct SourceReport {
    bool positive = true;
    bool nonincreasing = true;
    double tail_gap = 0.0;        // |h(1e6) - h_inf|
    double sup_y_h1 = 0.0;        // sup y|h'|
    double sup_y2_h2 = 0.0;       // sup y^2|h''|
    double min_yh2_plus_h1 = 0.0; // inf of y h'' + h'
    double max_y2h2_increase = 0.0;  // largest rise of y^2 h'' between neighbours
    double yh_at_small = 0.0;     // y h(y) at the smallest grid point
    bool convexity_conditions = true;
    bool ok = true;
    std::string message;
};

/// Checks the structural invariants of a source on a log grid [y_min, y_max].
SourceReport check_source(const SourceFn& s, double y_min = 1e-6, double y_max = 1e6, int n = 400,
                          double tol = 1e-12, double cap = 1e6);

}  // namespace nlt
