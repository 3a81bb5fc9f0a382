#pragma once

// Flat INI-style run configuration:
//
//   [problem]   name = lq1d, plus the problem's parameters
//   [grid]      radius, h | n_per_axis
//   [solver]    anchor, tol, max_iter, scheme, measure_tol, seed
//   [studies]   run, epsilons, perturbation, orders, radii, trials, deltas,
//               sweep_axis, sweep_values
//   [output]    dir
//
// '#' and ';' start comments. Unknown sections and keys are errors.

#include "ergodic/error.hpp"
#include "ergodic/generator.hpp"
#include "ergodic/problem.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace ergodic {

class ConfigError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

struct RunConfig {
    std::string problem;
    ParamMap params;

    double radius = 0.0;
    std::optional<double> h;
    std::optional<std::vector<int>> n_per_axis;  // one value, or one per axis

    std::optional<std::size_t> anchor;  // nullopt: grid center
    double tol = 1e-10;
    int max_iter = 200;
    DriftScheme scheme = DriftScheme::hybrid;
    double measure_tol = 1e-10;

    std::optional<std::vector<std::string>> studies;  // nullopt: default suite
    std::vector<double> epsilons = {0.5, 0.25, 0.125};
    double perturbation = -0.2;  // drift perturbation p x
    std::vector<double> orders = {2.0, 4.0};
    std::vector<double> radii = {4.0, 6.0, 8.0};
    int trials = 100;
    std::vector<double> deltas = {0.5, 0.4, 0.3, 0.2, 0.1};
    std::string sweep_axis = "h";
    std::vector<double> sweep_values;

    std::string out_dir = "out";
    std::uint64_t seed = 0;
    std::string source;  // raw text, hashed into provenance
};

inline const std::vector<std::string>& known_studies() {
    static const std::vector<std::string> s = {"benchmark",  "optimality", "maximality",
                                               "uniqueness", "distance",   "continuity",
                                               "moments",    "positivity"};
    return s;
}

inline const std::vector<std::string>& random_problem_parameters() {
    static const std::vector<std::string> p = {"nodes", "controls"};
    return p;
}

namespace detail {

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1,
                               prev[j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline std::string suggestion(const std::string& key, const std::vector<std::string>& known) {
    std::string best;
    std::size_t best_d = 3;  // suggest only close matches
    for (const auto& k : known) {
        const auto d = edit_distance(key, k);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best.empty() ? "" : fmt::format(" (did you mean '{}'?)", best);
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct Entry {
    std::string value;
    int line = 0;
    int column = 0;
};

using Sections = std::map<std::string, std::map<std::string, Entry>>;

inline ConfigError error_at(const Entry& e, const std::string& key, const std::string& what) {
    return ConfigError(fmt::format("line {}, column {}: '{}': {}", e.line, e.column, key, what));
}

inline double to_double(const Entry& e, const std::string& key) {
    try {
        std::size_t used = 0;
        const double v = std::stod(e.value, &used);
        if (used != e.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw error_at(e, key, "expected a number, got '" + e.value + "'");
    }
}

inline int to_int(const Entry& e, const std::string& key) {
    const double v = to_double(e, key);
    if (v != static_cast<double>(static_cast<long long>(v)))
        throw error_at(e, key, "expected an integer, got '" + e.value + "'");
    return static_cast<int>(v);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::vector<double> to_doubles(const Entry& e, const std::string& key) {
    std::vector<double> out;
    for (const auto& item : split_list(e.value)) {
        Entry sub = e;
        sub.value = item;
        out.push_back(to_double(sub, key));
    }
    return out;
}

}  // namespace detail

/// Parses and validates a configuration document. Throws ConfigError with a
/// line/column position for syntax errors, unknown keys (with a suggestion),
/// missing required keys, and invalid values.
inline RunConfig parse_config(const std::string& text) {
    using detail::Entry;
    static const std::map<std::string, std::vector<std::string>> schema = {
        {"problem", {"name"}},
        {"grid", {"radius", "h", "n_per_axis"}},
        {"solver", {"anchor", "tol", "max_iter", "scheme", "measure_tol", "seed"}},
        {"studies",
         {"run", "epsilons", "perturbation", "orders", "radii", "trials", "deltas", "sweep_axis",
          "sweep_values"}},
        {"output", {"dir"}},
    };
    std::vector<std::string> section_names;
    for (const auto& [k, v] : schema) section_names.push_back(k);

    detail::Sections sections;
    std::string current;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (detail::trim(line).empty()) continue;
        const int col = static_cast<int>(line.find_first_not_of(" \t")) + 1;
        const std::string body = detail::trim(line);
        if (body.front() == '[') {
            if (body.back() != ']')
                throw ConfigError(
                    fmt::format("line {}, column {}: unterminated section header", line_no, col));
            current = detail::trim(body.substr(1, body.size() - 2));
            if (!schema.count(current))
                throw ConfigError(fmt::format("line {}, column {}: unknown section [{}]{}", line_no,
                                              col, current,
                                              detail::suggestion(current, section_names)));
            sections[current];
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError(
                fmt::format("line {}, column {}: expected 'key = value'", line_no, col));
        if (current.empty())
            throw ConfigError(
                fmt::format("line {}, column {}: key outside of any section", line_no, col));
        const std::string key = detail::trim(body.substr(0, eq));
        if (key.empty())
            throw ConfigError(fmt::format("line {}, column {}: empty key", line_no, col));
        auto& sec = sections[current];
        if (sec.count(key))
            throw ConfigError(fmt::format("line {}, column {}: duplicate key '{}' in [{}]",
                                          line_no, col, key, current));
        sec[key] = Entry{detail::trim(body.substr(eq + 1)), line_no, col};
    }

    RunConfig cfg;
    cfg.source = text;

    // [problem]: name first, then the parameters that problem accepts
    auto& prob = sections["problem"];
    if (!prob.count("name")) throw ConfigError("missing required key [problem] name");
    cfg.problem = prob["name"].value;
    std::vector<std::string> allowed;
    if (cfg.problem == "random") {
        allowed = random_problem_parameters();
    } else {
        const auto& table = builtin_parameters();
        const auto it = table.find(cfg.problem);
        if (it == table.end()) {
            std::vector<std::string> names = {"random"};
            for (const auto& [k, v] : table) names.push_back(k);
            throw detail::error_at(prob["name"], "name",
                                   "unknown problem '" + cfg.problem + "'" +
                                       detail::suggestion(cfg.problem, names));
        }
        allowed = it->second;
    }
    for (const auto& [key, e] : prob) {
        if (key == "name") continue;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            auto all = allowed;
            all.push_back("name");
            throw detail::error_at(e, key, "unknown key in [problem]" +
                                               detail::suggestion(key, all));
        }
        cfg.params[key] = detail::to_double(e, key);
    }

    for (const auto& [sec, entries] : sections) {
        if (sec == "problem") continue;
        const auto& keys = schema.at(sec);
        for (const auto& [key, e] : entries)
            if (std::find(keys.begin(), keys.end(), key) == keys.end())
                throw detail::error_at(e, key, "unknown key in [" + sec + "]" +
                                                   detail::suggestion(key, keys));
    }

    auto positive = [](const Entry& e, const std::string& key, double v) {
        if (!(v > 0.0)) throw detail::error_at(e, key, "must be positive");
        return v;
    };

    auto& grid = sections["grid"];
    if (cfg.problem != "random") {
        if (!grid.count("radius")) throw ConfigError("missing required key [grid] radius");
        if (!grid.count("h") && !grid.count("n_per_axis"))
            throw ConfigError("missing required key [grid] h or n_per_axis");
    }
    if (grid.count("h") && grid.count("n_per_axis"))
        throw detail::error_at(grid["n_per_axis"], "n_per_axis", "give either h or n_per_axis");
    if (grid.count("radius"))
        cfg.radius = positive(grid["radius"], "radius", detail::to_double(grid["radius"], "radius"));
    if (grid.count("h")) cfg.h = positive(grid["h"], "h", detail::to_double(grid["h"], "h"));
    if (grid.count("n_per_axis")) {
        const auto& e = grid["n_per_axis"];
        std::vector<int> counts;
        for (const auto& item : detail::split_list(e.value)) {
            Entry sub = e;
            sub.value = item;
            const int n = detail::to_int(sub, "n_per_axis");
            if (n < 3) throw detail::error_at(e, "n_per_axis", "must be >= 3");
            counts.push_back(n);
        }
        if (counts.empty()) throw detail::error_at(e, "n_per_axis", "expected a value");
        cfg.n_per_axis = counts;
    }

    auto& solver = sections["solver"];
    if (solver.count("anchor") && solver["anchor"].value != "center") {
        const int a = detail::to_int(solver["anchor"], "anchor");
        if (a < 0) throw detail::error_at(solver["anchor"], "anchor", "must be >= 0 or 'center'");
        cfg.anchor = static_cast<std::size_t>(a);
    }
    if (solver.count("seed")) {
        const int sd = detail::to_int(solver["seed"], "seed");
        if (sd < 0) throw detail::error_at(solver["seed"], "seed", "must be >= 0");
        cfg.seed = static_cast<std::uint64_t>(sd);
    }
    if (solver.count("tol"))
        cfg.tol = positive(solver["tol"], "tol", detail::to_double(solver["tol"], "tol"));
    if (solver.count("measure_tol"))
        cfg.measure_tol = positive(solver["measure_tol"], "measure_tol",
                                   detail::to_double(solver["measure_tol"], "measure_tol"));
    if (solver.count("max_iter")) {
        cfg.max_iter = detail::to_int(solver["max_iter"], "max_iter");
        if (cfg.max_iter < 1) throw detail::error_at(solver["max_iter"], "max_iter", "must be >= 1");
    }
    if (solver.count("scheme")) {
        const auto& v = solver["scheme"].value;
        if (v == "hybrid") cfg.scheme = DriftScheme::hybrid;
        else if (v == "upwind") cfg.scheme = DriftScheme::upwind;
        else if (v == "central") cfg.scheme = DriftScheme::central;
        else
            throw detail::error_at(solver["scheme"], "scheme",
                                   "expected hybrid, upwind or central" +
                                       detail::suggestion(v, {"hybrid", "upwind", "central"}));
    }

    auto& studies = sections["studies"];
    if (studies.count("run")) {
        auto names = detail::split_list(studies["run"].value);
        for (const auto& n : names)
            if (std::find(known_studies().begin(), known_studies().end(), n) ==
                known_studies().end())
                throw detail::error_at(studies["run"], "run",
                                       "unknown study '" + n + "'" +
                                           detail::suggestion(n, known_studies()));
        cfg.studies = names;
    }
    if (studies.count("epsilons")) cfg.epsilons = detail::to_doubles(studies["epsilons"], "epsilons");
    if (studies.count("perturbation"))
        cfg.perturbation = detail::to_double(studies["perturbation"], "perturbation");
    if (studies.count("orders")) cfg.orders = detail::to_doubles(studies["orders"], "orders");
    if (studies.count("radii")) cfg.radii = detail::to_doubles(studies["radii"], "radii");
    if (studies.count("deltas")) cfg.deltas = detail::to_doubles(studies["deltas"], "deltas");
    if (studies.count("trials")) {
        cfg.trials = detail::to_int(studies["trials"], "trials");
        if (cfg.trials < 0) throw detail::error_at(studies["trials"], "trials", "must be >= 0");
    }
    if (studies.count("sweep_axis")) {
        cfg.sweep_axis = studies["sweep_axis"].value;
        if (cfg.sweep_axis != "h" && cfg.sweep_axis != "R" && cfg.sweep_axis != "n_ctrl")
            throw detail::error_at(studies["sweep_axis"], "sweep_axis", "expected h, R or n_ctrl");
    }
    if (studies.count("sweep_values"))
        cfg.sweep_values = detail::to_doubles(studies["sweep_values"], "sweep_values");
    for (const auto& key : {"radii", "orders", "epsilons"})
        if (studies.count(key))
            for (double v : detail::to_doubles(studies[key], key))
                if (v < 0.0) throw detail::error_at(studies[key], key, "values must be >= 0");

    auto& output = sections["output"];
    if (output.count("dir")) cfg.out_dir = output["dir"].value;
    return cfg;
}

}  // namespace ergodic
