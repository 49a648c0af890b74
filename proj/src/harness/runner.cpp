#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "internal.hpp"
#include "nlt/core/errors.hpp"
#include "nlt/core/trajectory.hpp"

namespace nlt::harness {

using nlohmann::json;

namespace detail {

namespace {
std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}
std::map<std::string, Entry>& registry() {
    static std::map<std::string, Entry> r;
    return r;
}
void ensure_builtin() {
    static std::once_flag once;
    std::call_once(once, register_builtin);
}
}  // namespace

const Entry* find_experiment(const std::string& name) {
    ensure_builtin();
    std::lock_guard<std::mutex> lock(registry_mutex());
    auto it = registry().find(name);
    return it == registry().end() ? nullptr : &it->second;
}

void add(const std::string& name, Experiment fn, json defaults) {
    std::lock_guard<std::mutex> lock(registry_mutex());
    registry()[name] = Entry{std::move(fn), std::move(defaults)};
}

}  // namespace detail

void register_experiment(const std::string& name, Experiment fn, json defaults) {
    detail::find_experiment(name);   // builtins first, so a test can replace one
    if (!defaults.is_object()) throw ConfigError("register_experiment: defaults must be an object");
    detail::add(name, std::move(fn), std::move(defaults));
}

bool has_experiment(const std::string& name) { return detail::find_experiment(name) != nullptr; }

std::vector<std::string> experiment_names() {
    detail::find_experiment("");
    std::lock_guard<std::mutex> lock(detail::registry_mutex());
    std::vector<std::string> out;
    for (const auto& [k, v] : detail::registry()) out.push_back(k);
    return out;
}

// ------------------------------------------------------------------ checks

namespace {
void add_check(Result& r, Check c) {
    if (!c.pass && r.status == "pass") r.status = "fail";
    r.checks.push_back(std::move(c));
}
}  // namespace

void Result::check_gt(const std::string& name, double value, double limit) {
    add_check(*this, {name, value, ">", limit, 0.0, value > limit});
}
void Result::check_lt(const std::string& name, double value, double limit) {
    add_check(*this, {name, value, "<", limit, 0.0, value < limit});
}
void Result::check_le(const std::string& name, double value, double limit) {
    add_check(*this, {name, value, "<=", limit, 0.0, value <= limit});
}
void Result::check_ge(const std::string& name, double value, double limit) {
    add_check(*this, {name, value, ">=", limit, 0.0, value >= limit});
}
void Result::check_in(const std::string& name, double value, double lo, double hi) {
    add_check(*this, {name, value, "in", lo, hi, value >= lo && value <= hi});
}

const Check* Result::find(const std::string& name) const {
    for (const Check& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

json Result::to_json(bool timing) const {
    json j;
    j["id"] = id;
    j["experiment"] = experiment;
    j["status"] = status;
    j["config_hash"] = hex(hash);
    if (!message.empty()) j["message"] = message;
    json cs = json::array();
    for (const Check& c : checks) {
        json e = {{"name", c.name}, {"value", c.value}, {"relation", c.relation}, {"limit", c.limit}, {"pass", c.pass}};
        if (c.relation == "in") e["limit_hi"] = c.limit_hi;
        cs.push_back(e);
    }
    j["checks"] = cs;
    j["metrics"] = metrics;
    json files = json::array();
    for (const auto& [k, v] : csv) files.push_back(id + "_" + k + ".csv");
    j["csv"] = files;
    if (timing) {
        j["wall_time"] = wall_time;
        if (!timings.empty()) j["timings"] = timings;
    }
    return j;
}

// ------------------------------------------------------------------ running

Result run_one(const Scenario& s) {
    Result r;
    r.id = s.id;
    r.experiment = s.experiment;
    r.hash = config_hash(s);
    auto t0 = std::chrono::steady_clock::now();
    const detail::Entry* e = detail::find_experiment(s.experiment);
    try {
        if (!e) throw ConfigError("unknown experiment '" + s.experiment + "'");
        e->fn(s, r);
    } catch (const ConfigError& ex) {
        r.status = "config_error";
        r.message = ex.what();
    } catch (const NumericError& ex) {
        r.status = "numeric_error";
        r.message = std::string("numeric: ") + ex.what();
    } catch (const ModelError& ex) {
        r.status = "numeric_error";
        r.message = std::string("model: ") + ex.what();
    } catch (const DomainError& ex) {
        r.status = "numeric_error";
        r.message = std::string("domain: ") + ex.what();
    } catch (const std::exception& ex) {
        r.status = "error";
        r.message = ex.what();
    }
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<Result> run_all(const std::vector<Scenario>& scenarios, int workers) {
    std::vector<Result> out(scenarios.size());
    size_t n = std::min<size_t>(std::max(1, workers), scenarios.size());
    std::atomic<size_t> next{0};
    auto work = [&] {
        for (size_t i = next++; i < scenarios.size(); i = next++) out[i] = run_one(scenarios[i]);
    };
    if (n <= 1) {
        work();
        return out;
    }
    std::vector<std::thread> pool;
    for (size_t k = 0; k < n; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    return out;
}

json report(const std::vector<Result>& results, bool timing) {
    json j;
    j["tool"] = kToolName;
    j["version"] = kVersion;
    json ex = json::object();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    double total = 0.0;
    for (const Result& r : results) {
        ex[r.id] = r.to_json(timing);
        for (unsigned char c : hex(r.hash)) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        total += r.wall_time;
    }
    j["config_hash"] = hex(h);
    j["experiments"] = ex;
    j["exit_code"] = exit_code(results);
    if (timing) j["wall_time"] = total;
    return j;
}

void write_outputs(const std::vector<Result>& results, const std::string& dir) {
    for (const Result& r : results) {
        write_file_atomic(dir + "/" + r.id + ".json", r.to_json().dump(2) + "\n");
        for (const auto& [k, v] : r.csv) write_file_atomic(dir + "/" + r.id + "_" + k + ".csv", v);
    }
    write_file_atomic(dir + "/report.json", report(results).dump(2) + "\n");
}

int exit_code(const std::vector<Result>& results) {
    int code = kPass;
    auto rank = [](int c) { return c == kConfig ? 3 : c == kNumeric ? 2 : c == kAssert ? 1 : 0; };
    for (const Result& r : results) {
        int c = r.status == "pass"           ? kPass
                : r.status == "fail"         ? kAssert
                : r.status == "config_error" ? kConfig
                                             : kNumeric;
        if (rank(c) > rank(code)) code = c;
    }
    return code;
}

int run_parsed(Config cfg, const Overrides& o, const std::string& experiment, std::ostream& log) {
    try {
        for (const Scenario& s : cfg.scenarios)
            if (!experiment.empty() && s.experiment != experiment)
                throw ConfigError(s.id + ": experiment '" + s.experiment + "' does not match subcommand '" +
                                  experiment + "'");
        apply_overrides(cfg, o);
    } catch (const ConfigError& e) {
        log << "error: " << e.what() << "\n";
        return kConfig;
    }
    std::vector<Result> results = run_all(cfg.scenarios, cfg.workers);
    for (const Result& r : results) {
        log << r.id << " [" << r.experiment << "] " << r.status << " (" << format_double(std::round(r.wall_time * 1e3) / 1e3)
            << " s)";
        if (!r.message.empty()) log << ": " << r.message;
        log << "\n";
        for (const Check& c : r.checks)
            if (!c.pass) log << "  failed " << c.name << " = " << format_double(c.value) << " " << c.relation << " "
                             << format_double(c.limit) << (c.relation == "in" ? " .. " + format_double(c.limit_hi) : "")
                             << "\n";
    }
    // one output directory per scenario group
    std::map<std::string, std::vector<Result>> by_dir;
    for (size_t i = 0; i < results.size(); ++i) {
        Result r = results[i];
        if (!cfg.scenarios[i].write_csv) r.csv.clear();
        by_dir[cfg.scenarios[i].out_dir].push_back(std::move(r));
    }
    try {
        for (const auto& [dir, rs] : by_dir) write_outputs(rs, dir);
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return kConfig;
    }
    return exit_code(results);
}

int run_config(const std::string& path, const Overrides& o, const std::string& experiment, std::ostream& log) {
    const std::string fill = experiment == "suite" ? "" : experiment;
    Config cfg;
    try {
        if (!path.empty())
            cfg = load_config(path, fill);
        else if (fill.empty())
            cfg = parse_config(default_suite_json(), "<default suite>");
        else
            cfg.scenarios.push_back(parse_scenario(json::object(), fill));
    } catch (const ConfigError& e) {
        log << "error: " << e.what() << "\n";
        return kConfig;
    }
    return run_parsed(std::move(cfg), o, fill, log);
}

}  // namespace nlt::harness
