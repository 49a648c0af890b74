#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "internal.hpp"
#include "nlt/core/errors.hpp"

namespace nlt::harness {

using nlohmann::json;

namespace {

struct SchemaError {
    std::string path, msg;
};

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

// Line of every value in a JSON text, keyed by the same paths as SchemaError.
std::map<std::string, int> value_lines(const std::string& text) {
    std::map<std::string, int> lines;
    struct Frame {
        bool array;
        std::string path, key;
        int index;
    };
    std::vector<Frame> stack;
    int line = 1;
    auto here = [&]() -> std::string {
        if (stack.empty()) return "";
        const Frame& f = stack.back();
        return f.array ? f.path + "[" + std::to_string(f.index) + "]" : join(f.path, f.key);
    };
    bool expect_key = false;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\n') ++line;
        if (std::isspace(static_cast<unsigned char>(c)) || c == ':') continue;
        if (c == ',') {
            if (!stack.empty() && stack.back().array) ++stack.back().index;
            expect_key = !stack.empty() && !stack.back().array;
            continue;
        }
        if (c == '}' || c == ']') {
            if (!stack.empty()) stack.pop_back();
            continue;
        }
        if (c == '"') {
            size_t j = i + 1;
            std::string s;
            for (; j < text.size() && text[j] != '"'; ++j) {
                if (text[j] == '\\') ++j;
                if (j < text.size()) s += text[j];
            }
            if (expect_key) {
                stack.back().key = s;
                expect_key = false;
            } else {
                lines.emplace(here(), line);
            }
            i = j;
            continue;
        }
        std::string p = here();
        lines.emplace(p, line);
        if (c == '{' || c == '[') {
            stack.push_back({c == '[', p, "", 0});
            expect_key = c == '{';
            continue;
        }
        while (i + 1 < text.size() && !std::strchr(",}] \t\r\n", text[i + 1])) ++i;
    }
    return lines;
}

// Strict object reader: every key must be consumed.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw SchemaError{path_, "expected an object"};
    }
    const json* get(const char* k) {
        seen_.insert(k);
        auto it = j_.find(k);
        return it == j_.end() ? nullptr : &*it;
    }
    double number(const char* k, double def) {
        const json* v = get(k);
        if (!v) return def;
        if (!v->is_number()) throw SchemaError{join(path_, k), "expected a number"};
        return v->get<double>();
    }
    double positive(const char* k, double def) {
        double v = number(k, def);
        if (!(v > 0.0)) throw SchemaError{join(path_, k), "must be > 0"};
        return v;
    }
    std::string string(const char* k, const std::string& def) {
        const json* v = get(k);
        if (!v) return def;
        if (!v->is_string()) throw SchemaError{join(path_, k), "expected a string"};
        return v->get<std::string>();
    }
    bool boolean(const char* k, bool def) {
        const json* v = get(k);
        if (!v) return def;
        if (!v->is_boolean()) throw SchemaError{join(path_, k), "expected true or false"};
        return v->get<bool>();
    }
    std::int64_t integer(const char* k, std::int64_t def) {
        const json* v = get(k);
        if (!v) return def;
        if (!v->is_number_integer()) throw SchemaError{join(path_, k), "expected an integer"};
        return v->get<std::int64_t>();
    }
    std::vector<double> numbers(const char* k) {
        const json* v = get(k);
        if (!v) return {};
        if (!v->is_array()) throw SchemaError{join(path_, k), "expected an array of numbers"};
        std::vector<double> out;
        for (const auto& e : *v) {
            if (!e.is_number()) throw SchemaError{join(path_, k), "expected an array of numbers"};
            out.push_back(e.get<double>());
        }
        return out;
    }
    std::string path(const char* k) const { return join(path_, k); }
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw SchemaError{join(path_, it.key()), "unknown key"};
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

bool same_type(const json& def, const json& v) {
    if (def.is_boolean()) return v.is_boolean();
    if (def.is_number_integer()) return v.is_number_integer();
    if (def.is_number()) return v.is_number();
    if (def.is_string()) return v.is_string();
    if (def.is_array()) {
        if (!v.is_array()) return false;
        if (def.empty()) return true;
        for (const auto& e : v)
            if (!same_type(def.front(), e)) return false;
        return true;
    }
    return def.type() == v.type();
}

json merge_params(const json& defaults, const json* given, const std::string& path) {
    json out = defaults;
    if (!given) return out;
    if (!given->is_object()) throw SchemaError{path, "expected an object"};
    for (auto it = given->begin(); it != given->end(); ++it) {
        if (!defaults.contains(it.key())) throw SchemaError{join(path, it.key()), "unknown parameter"};
        if (!same_type(defaults[it.key()], it.value()))
            throw SchemaError{join(path, it.key()),
                              std::string("expected ") + defaults[it.key()].type_name() + " like the default " +
                                  defaults[it.key()].dump()};
        out[it.key()] = it.value();
    }
    return out;
}

const std::set<std::string> kSources = {"constant", "log", "exp", "compact", "tabulated"};
const std::set<std::string> kFamilies = {"equilibrium", "scaled", "perturbed"};

Scenario scenario_from(const json& j, const std::string& path, const std::string& experiment,
                       const std::string& out_dir, std::uint64_t seed) {
    Obj o(j, path);
    Scenario s;
    s.out_dir = out_dir;
    s.seed = seed;
    s.experiment = o.string("experiment", experiment);
    if (s.experiment.empty()) throw SchemaError{o.path("experiment"), "missing"};
    const detail::Entry* e = detail::find_experiment(s.experiment);
    if (!e) throw SchemaError{o.path("experiment"), "unknown experiment '" + s.experiment + "'"};
    s.id = o.string("id", s.experiment);
    if (s.id.empty() || s.id.find_first_of("/\\ ") != std::string::npos)
        throw SchemaError{o.path("id"), "must be non-empty without spaces or slashes"};
    std::int64_t sd = o.integer("seed", static_cast<std::int64_t>(seed));
    if (sd < 0) throw SchemaError{o.path("seed"), "must be >= 0"};
    s.seed = static_cast<std::uint64_t>(sd);

    if (const json* m = o.get("model")) {
        Obj mo(*m, o.path("model"));
        s.model.p = mo.positive("p", s.model.p);
        s.model.q = mo.positive("q", s.model.q);
        s.model.eps0 = mo.positive("eps0", s.model.eps0);
        if (const json* src = mo.get("source")) {
            Obj so(*src, mo.path("source"));
            auto& sc = s.model.source;
            sc.kind = so.string("kind", sc.kind);
            if (!kSources.count(sc.kind)) throw SchemaError{so.path("kind"), "unknown source kind '" + sc.kind + "'"};
            sc.h_inf = so.number("h_inf", sc.h_inf);
            if (sc.h_inf < 0.0) throw SchemaError{so.path("h_inf"), "must be >= 0"};
            sc.p_form = so.boolean("p_form", false);
            if (sc.p_form && sc.kind != "exp" && sc.kind != "compact")
                throw SchemaError{so.path("p_form"), "only for exp and compact kernels"};
            sc.y = so.numbers("y");
            sc.h = so.numbers("h");
            if (sc.kind == "tabulated") {
                if (sc.y.size() < 3 || sc.y.size() != sc.h.size())
                    throw SchemaError{so.path("y"), "tabulated source needs matching y and h arrays of length >= 3"};
            } else if (!sc.y.empty() || !sc.h.empty()) {
                throw SchemaError{so.path("y"), "only for tabulated sources"};
            }
            so.finish();
        }
        mo.finish();
    }
    if (const json* in = o.get("initial")) {
        Obj io(*in, o.path("initial"));
        s.initial.family = io.string("family", s.initial.family);
        if (!kFamilies.count(s.initial.family))
            throw SchemaError{io.path("family"), "unknown family '" + s.initial.family + "'"};
        s.initial.p_prime = io.number("p_prime", 0.0);
        if (s.initial.p_prime < 0.0) throw SchemaError{io.path("p_prime"), "must be >= 0 (0 means p)"};
        s.initial.c = io.positive("c", 1.0);
        s.initial.amplitude = io.number("amplitude", 0.0);
        if (!(s.initial.amplitude > -1.0)) throw SchemaError{io.path("amplitude"), "must exceed -1"};
        io.finish();
    }
    if (const json* r = o.get("run")) {
        Obj ro(*r, o.path("run"));
        s.run.T = ro.positive("T", s.run.T);
        s.run.dt = ro.positive("dt", s.run.dt);
        std::int64_t st = ro.integer("stride", s.run.stride);
        if (st < 1) throw SchemaError{ro.path("stride"), "must be >= 1"};
        s.run.stride = static_cast<int>(st);
        ro.finish();
    }
    if (s.run.dt > s.run.T) throw SchemaError{o.path("run"), "dt exceeds T"};
    s.params = merge_params(e->defaults, o.get("params"), o.path("params"));
    if (const json* out = o.get("output")) {
        Obj oo(*out, o.path("output"));
        s.out_dir = oo.string("dir", s.out_dir);
        s.write_csv = oo.boolean("csv", true);
        oo.finish();
    }
    o.finish();
    return s;
}

Config config_from(const json& j, const std::string& experiment) {
    Config cfg;
    if (!j.is_object()) throw SchemaError{"", "expected an object"};
    if (!j.contains("scenarios")) {
        cfg.scenarios.push_back(scenario_from(j, "", experiment, cfg.out_dir, 1));
        cfg.out_dir = cfg.scenarios.front().out_dir;
        return cfg;
    }
    Obj o(j, "");
    std::int64_t w = o.integer("workers", 1);
    if (w < 1) throw SchemaError{"workers", "must be >= 1"};
    cfg.workers = static_cast<int>(w);
    std::int64_t seed = o.integer("seed", 1);
    if (seed < 0) throw SchemaError{"seed", "must be >= 0"};
    if (const json* out = o.get("output")) {
        Obj oo(*out, "output");
        cfg.out_dir = oo.string("dir", cfg.out_dir);
        oo.finish();
    }
    const json* list = o.get("scenarios");
    if (!list->is_array()) throw SchemaError{"scenarios", "expected an array"};
    std::set<std::string> ids;
    for (size_t i = 0; i < list->size(); ++i) {
        std::string path = "scenarios[" + std::to_string(i) + "]";
        Scenario s = scenario_from((*list)[i], path, experiment, cfg.out_dir, static_cast<std::uint64_t>(seed));
        if (!ids.insert(s.id).second) throw SchemaError{join(path, "id"), "duplicate id '" + s.id + "'"};
        cfg.scenarios.push_back(std::move(s));
    }
    o.finish();
    return cfg;
}

}  // namespace

json Scenario::canonical() const {
    json j;
    j["id"] = id;
    j["experiment"] = experiment;
    j["seed"] = seed;
    j["model"] = {{"p", model.p},
                  {"q", model.q},
                  {"eps0", model.eps0},
                  {"source",
                   {{"kind", model.source.kind},
                    {"h_inf", model.source.h_inf},
                    {"p_form", model.source.p_form},
                    {"y", model.source.y},
                    {"h", model.source.h}}}};
    j["initial"] = {{"family", initial.family},
                    {"p_prime", initial.p_prime},
                    {"c", initial.c},
                    {"amplitude", initial.amplitude}};
    j["run"] = {{"T", run.T}, {"dt", run.dt}, {"stride", run.stride}};
    j["params"] = params;
    return j;
}

Config parse_config(const std::string& text, const std::string& origin, const std::string& experiment) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        // byte offset to line
        size_t byte = std::min(e.byte, text.size());
        int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
        throw ConfigError(origin + ":" + std::to_string(line) + ": syntax: " + e.what());
    }
    try {
        return config_from(j, experiment);
    } catch (const SchemaError& e) {
        auto lines = value_lines(text);
        std::string where = origin;
        // nearest enclosing path with a known line
        for (std::string p = e.path;; ) {
            auto it = lines.find(p);
            if (it != lines.end()) {
                where += ":" + std::to_string(it->second);
                break;
            }
            size_t cut = p.find_last_of(".[");
            if (cut == std::string::npos) break;
            p = p.substr(0, cut);
        }
        throw ConfigError(where + ": " + (e.path.empty() ? "<root>" : e.path) + ": " + e.msg);
    }
}

Config load_config(const std::string& path, const std::string& experiment) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot read config");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path, experiment);
}

Scenario parse_scenario(const json& j, const std::string& experiment) {
    try {
        return scenario_from(j, "", experiment, "out", 1);
    } catch (const SchemaError& e) {
        throw ConfigError((e.path.empty() ? "<root>" : e.path) + ": " + e.msg);
    }
}

void apply_overrides(Config& cfg, const Overrides& o) {
    std::string out;
    if (o.out)
        out = *o.out;
    else if (const char* env = std::getenv("NLTBENCH_OUT"); env && *env)
        out = env;
    if (!out.empty()) cfg.out_dir = out;
    if (o.workers) {
        if (*o.workers < 1) throw ConfigError("--workers: must be >= 1");
        cfg.workers = *o.workers;
    }
    if (o.dt && !(*o.dt > 0.0)) throw ConfigError("--dt: must be > 0");
    if (o.T && !(*o.T > 0.0)) throw ConfigError("--T: must be > 0");
    for (Scenario& s : cfg.scenarios) {
        if (!out.empty()) s.out_dir = out;
        if (o.seed) s.seed = *o.seed;
        if (o.dt) s.run.dt = *o.dt;
        if (o.T) s.run.T = *o.T;
        if (s.run.dt > s.run.T) throw ConfigError(s.id + ": run.dt exceeds run.T after overrides");
    }
}

pde::Model build_model(const ModelConfig& m) {
    const SourceConfig& sc = m.source;
    SourceFn s;
    try {
        if (sc.kind == "constant")
            s = SourceFn::constant(sc.h_inf);
        else if (sc.kind == "log")
            s = SourceFn::kernel_inf(sc.h_inf, Kernel::log());
        else if (sc.kind == "exp" || sc.kind == "compact") {
            Kernel k = sc.kind == "exp" ? Kernel::exp() : Kernel::compact();
            s = sc.p_form ? SourceFn::kernel_p(sc.h_inf, m.p, k) : SourceFn::kernel_inf(sc.h_inf, k);
        } else if (sc.kind == "tabulated")
            s = SourceFn::tabulated(sc.y, sc.h, sc.h_inf);
        else
            throw ConfigError("model.source.kind: unknown source kind '" + sc.kind + "'");
    } catch (const DomainError& e) {
        throw ConfigError(std::string("model.source: ") + e.what());
    }
    FunctionalSpec F = canonical_functional(s);
    F.q = m.q;
    F.eps0 = m.eps0;
    return {s, F, m.p};
}

Profile build_initial(const Scenario& s, const pde::Model& m) { return make_initial(s.initial, m.source, m.p); }

std::uint64_t config_hash(const Scenario& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s.canonical().dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace nlt::harness
