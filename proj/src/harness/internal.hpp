#pragma once

#include <string>

#include "json.hpp"
#include "nlt/harness/harness.hpp"

namespace nlt::harness::detail {

struct Entry {
    Experiment fn;
    nlohmann::json defaults;   // parameter schema: every key with its default
};

/// nullptr for an unknown experiment.
const Entry* find_experiment(const std::string& name);
void register_builtin();
/// Registry insert without the builtin bootstrap (used by register_builtin).
void add(const std::string& name, Experiment fn, nlohmann::json defaults);

// Typed parameter access; types were validated against the defaults at parse time.
inline double num(const Scenario& s, const char* k) { return s.params.at(k).get<double>(); }
inline int integer(const Scenario& s, const char* k) { return s.params.at(k).get<int>(); }
inline bool flag(const Scenario& s, const char* k) { return s.params.at(k).get<bool>(); }

}  // namespace nlt::harness::detail
