// nltbench: runs experiment scenarios from JSON configs.
#include <iostream>

#include "CLI11.hpp"
#include "nlt/harness/harness.hpp"

namespace h = nlt::harness;

namespace {

struct Common {
    std::string config;
    h::Overrides o;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("-c,--config", c.config, "JSON config (single scenario or suite)")->check(CLI::ExistingFile);
    sub->add_option("-o,--out", c.o.out, "output directory (overrides NLTBENCH_OUT and the config)");
    sub->add_option("--seed", c.o.seed, "random seed");
    sub->add_option("--dt", c.o.dt, "time step")->check(CLI::PositiveNumber);
    sub->add_option("--T", c.o.T, "final time")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Benchmarks for the nonlinear transport model"};
    app.set_version_flag("--version", std::string(h::kToolName) + " " + h::kVersion);
    app.require_subcommand(1);

    Common c;
    bool print_config = false;
    const std::vector<std::pair<std::string, std::string>> subs = {
        {"equilibrium", "equilibrium profile and rho identity"},
        {"simulate-pde", "characteristic PDE solver with residual monitors"},
        {"simulate-dde", "delay formulation, optionally against the PDE"},
        {"linear-stability", "kernel certificate, Laplace winding and decay rates"},
        {"volterra-demo", "closed-form resolvent and asymptotic demos"},
        {"control-verify", "optimal-control value functions against sampling and DP"},
        {"convergence", "convergence rates for several initial data"},
        {"const-h-ode", "constant-source ODE reduction"},
        {"gradients", "functional derivatives against finite differences"},
        {"suite", "run a multi-scenario config, or the default suite"},
    };
    for (const auto& [name, help] : subs) {
        CLI::App* sub = app.add_subcommand(name, help);
        add_common(sub, c);
        if (name == "suite")
            sub->add_option("-j,--workers", c.o.workers, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--print-config", print_config,
                      name == "suite" ? "print the default suite config and exit"
                                      : "print the default scenario with every parameter and exit");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : h::kConfig;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    if (print_config) {
        if (name == "suite")
            std::cout << h::default_suite_json();
        else
            std::cout << h::parse_scenario(nlohmann::json::object(), name).canonical().dump(2) << "\n";
        return h::kPass;
    }
    return h::run_config(c.config, c.o, name, std::cerr);
}
