#include <gtest/gtest.h>

#include <cmath>

#include "nlt/core/errors.hpp"
#include "nlt/core/fit.hpp"

using nlt::fit_rate;

namespace {

void series(double (*f)(double), std::vector<double>& t, std::vector<double>& v) {
    for (int i = 0; i <= 2000; ++i) {
        t.push_back(0.01 * i);
        v.push_back(f(t.back()));
    }
}

}  // namespace

TEST(FitRate, ExactExponential) {
    std::vector<double> t, v;
    series([](double x) { return std::exp(-x / 2); }, t, v);
    auto f = fit_rate(t, v, 1.0);
    EXPECT_NEAR(f.rate, 0.5, 1e-6);
    EXPECT_NEAR(f.intercept, 0.0, 1e-9);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
    EXPECT_EQ(f.samples, 2001u);
}

TEST(FitRate, PolynomialPrefactorTrailingWindow) {
    std::vector<double> t, v;
    series([](double x) { return (1 + x) * std::exp(-x / 2); }, t, v);
    double prev = 1e9;
    for (double w : {0.5, 0.2, 0.05}) {
        double err = std::abs(fit_rate(t, v, w).rate - 0.5);
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 0.05);
    EXPECT_NEAR(fit_rate(t, v, 0.05).rate, 0.5, 0.05);
    // trailing-window estimate tends to 0.5 - 1/(1 + t)
    EXPECT_NEAR(fit_rate(t, v, 0.05).rate, 0.5 - 1.0 / (1.0 + 19.5), 1e-3);
}

TEST(FitRate, ConstantSeries) {
    std::vector<double> t, v;
    series([](double) { return 3.0; }, t, v);
    auto f = fit_rate(t, v);
    EXPECT_NEAR(f.rate, 0.0, 1e-9);
    EXPECT_GE(f.r2, 0.0);
    EXPECT_LE(f.r2, 1.0);
}

TEST(FitRate, Errors) {
    std::vector<double> t{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, v(11, 1.0);
    v[10] = 0.0;
    EXPECT_THROW(fit_rate(t, v, 1.0), nlt::DomainError);
    v[10] = 1.0;
    EXPECT_THROW(fit_rate(t, v, 0.3), nlt::DomainError);  // fewer than 10 samples
    EXPECT_NO_THROW(fit_rate(t, v, 1.0));
}
