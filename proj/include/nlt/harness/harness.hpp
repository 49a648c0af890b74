#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlt/core/initial_data.hpp"
#include "nlt/pde/simulator.hpp"

namespace nlt::harness {

inline constexpr const char* kToolName = "nltbench";
inline constexpr const char* kVersion = "1.0.0";

// Exit codes of run_scenario and the CLI.
enum Exit : int { kPass = 0, kConfig = 1, kAssert = 2, kNumeric = 3 };

struct SourceConfig {
    std::string kind = "log";   // constant | log | exp | compact | tabulated
    double h_inf = 1.0;
    bool p_form = false;        // kernel_p instead of kernel_inf (exp, compact)
    std::vector<double> y, h;   // tabulated nodes
};

struct ModelConfig {
    SourceConfig source;
    double p = 2.0;
    double q = 1.0;      // functional exponent
    double eps0 = 1.0;   // functional cutoff
};

struct RunBlock {
    double T = 20.0;
    double dt = 0.02;
    int stride = 10;
};

struct Scenario {
    std::string id;
    std::string experiment;
    ModelConfig model;
    InitialSpec initial;
    RunBlock run;
    nlohmann::json params = nlohmann::json::object();
    std::string out_dir = "out";
    bool write_csv = true;
    std::uint64_t seed = 1;

    /// Normalised form with every default filled in; input of the config hash.
    nlohmann::json canonical() const;
};

struct Config {
    std::vector<Scenario> scenarios;
    int workers = 1;
    std::string out_dir = "out";
};

struct Overrides {
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<double> dt, T;
    std::optional<int> workers;
};

/// Parses a config text: a single scenario object or {"scenarios": [...], ...}.
/// `experiment` fills scenarios that do not name one. Throws ConfigError with
/// "origin:line: field: message" diagnostics.
Config parse_config(const std::string& text, const std::string& origin = "<config>",
                    const std::string& experiment = "");
Config load_config(const std::string& path, const std::string& experiment = "");
/// Scenario from a JSON object; `experiment` fills a missing experiment field.
Scenario parse_scenario(const nlohmann::json& j, const std::string& experiment = "");
/// Flags first, then NLTBENCH_OUT for the output directory, then the config.
void apply_overrides(Config& cfg, const Overrides& o);

pde::Model build_model(const ModelConfig& m);
Profile build_initial(const Scenario& s, const pde::Model& m);

/// 64-bit FNV-1a of canonical().dump().
std::uint64_t config_hash(const Scenario& s);
std::string hex(std::uint64_t h);

struct Check {
    std::string name;
    double value = 0.0;
    std::string relation;   // "<", "<=", ">", ">=", "in"
    double limit = 0.0;
    double limit_hi = 0.0;  // upper edge for "in"
    bool pass = false;
};

struct Result {
    std::string id, experiment;
    std::string status = "pass";   // pass | fail | numeric_error | error
    std::string message;
    std::vector<Check> checks;
    nlohmann::json metrics = nlohmann::json::object();
    std::map<std::string, std::string> csv;   // file suffix -> content
    double wall_time = 0.0;
    std::map<std::string, double> timings;   // per-part wall times, seconds
    std::uint64_t hash = 0;

    void check_gt(const std::string& name, double value, double limit);
    void check_lt(const std::string& name, double value, double limit);
    void check_le(const std::string& name, double value, double limit);
    void check_ge(const std::string& name, double value, double limit);
    void check_in(const std::string& name, double value, double lo, double hi);
    const Check* find(const std::string& name) const;
    bool passed() const { return status == "pass"; }
    nlohmann::json to_json(bool timing = true) const;
};

using Experiment = std::function<void(const Scenario&, Result&)>;

/// Built-in experiments are registered on first use; tests may add their own.
/// `defaults` lists every accepted parameter with its default value.
void register_experiment(const std::string& name, Experiment fn,
                         nlohmann::json defaults = nlohmann::json::object());
bool has_experiment(const std::string& name);
std::vector<std::string> experiment_names();

/// Runs one scenario; exceptions become status numeric_error (NumericError,
/// ModelError, DomainError) or error (anything else).
Result run_one(const Scenario& s);
/// Bounded worker pool; results come back in scenario order.
std::vector<Result> run_all(const std::vector<Scenario>& scenarios, int workers);

/// {"tool", "version", "experiments": {id: ...}, "wall_time"}; timing = false drops
/// every wall-time field.
nlohmann::json report(const std::vector<Result>& results, bool timing = true);
/// <dir>/<id>.json, <dir>/<id>_<name>.csv and <dir>/report.json, all atomic.
void write_outputs(const std::vector<Result>& results, const std::string& dir);
int exit_code(const std::vector<Result>& results);

/// Loads, runs and writes a config. `experiment`, when set, must match every scenario
/// that names one and fills the rest. Diagnostics go to `log`.
int run_config(const std::string& path, const Overrides& o, const std::string& experiment,
               std::ostream& log);
/// Same for an in-memory config (a missing path runs the experiment's defaults).
int run_parsed(Config cfg, const Overrides& o, const std::string& experiment, std::ostream& log);

/// Default suite: one scenario per acceptance experiment.
std::string default_suite_json();

}  // namespace nlt::harness
