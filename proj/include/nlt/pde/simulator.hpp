#pragma once

#include <memory>
#include <vector>

#include "nlt/core/equilibrium.hpp"
#include "nlt/core/functional.hpp"
#include "nlt/core/profile.hpp"
#include "nlt/core/source.hpp"
#include "nlt/core/trajectory.hpp"
#include "nlt/pde/characteristics.hpp"
#include "nlt/pde/history.hpp"

namespace nlt::pde {

struct Model {
    SourceFn source;
    FunctionalSpec functional;
    double p = 2.0;
};

struct StepOptions {
    double tol = 1e-12;          // |G(rho) - rho| on exit
    int max_iter = 50;
    int damp_after = 10;         // plain/secant iterations before damping
    double damping = 0.5;
    int nodes_per_interval = 2;  // Gauss nodes per history interval
    int functional_nodes = 128;  // fixed mapped rule inside stepping
};

struct StepRecord {
    double t = 0.0;
    double rho = 0.0;
    double I = 0.0;
    double numerator = 0.0;
    double denominator = 0.0;
    int iterations = 0;
};

class LagrangianState {
public:
    LagrangianState(Model model, Profile xi0, StepOptions opt = {});

    const Model& model() const { return model_; }
    const Profile& xi0() const { return xi0_; }
    const RhoHistory& history() const { return hist_; }
    const std::vector<StepRecord>& records() const { return records_; }
    const StepOptions& options() const { return opt_; }
    double t() const { return hist_.t_last(); }

    /// xi, xi', xi'' at (y, t) for any t in the committed history.
    Jet xi_eval(double y, double t) const;
    /// Profile of xi(., t).
    Profile profile_at(double t) const;

    /// rho(xi(., t_last + dt)) when rho(t_last + dt) = trial.
    RhoValue trial_rho(double dt, double trial);

    void commit(double dt, double rho, const RhoValue& at, int iterations);

private:
    RhoValue rho_from_plan(const CharPlan& plan) const;

    Model model_;
    Profile xi0_;
    StepOptions opt_;
    RhoHistory hist_;
    FunctionalRule rule_;
    std::vector<double> h_nodes_;
    std::vector<StepRecord> records_;
};

/// One time step: solves rho(t+dt) = rho(xi(., t+dt)) and commits it.
void step(LagrangianState& state, double dt);

struct RunConfig {
    double T = 10.0;
    double dt = 0.02;
    int stride = 10;             // steps between samples
    bool monitors = true;        // distance and norm columns
    LogGrid diag{1e-3, 1e3, 61};
};

Trajectory run(const Model& model, const Profile& xi0, const RunConfig& cfg,
               const StepOptions& opt = {});

}  // namespace nlt::pde
