#pragma once

// Subcommand runners behind the command-line tool. Each runner takes a
// validated RunConfig, writes its artifacts into cfg.out_dir and returns the
// process exit code:
//   0 success, 1 verification failure, 2 usage/config error, 3 numerical failure.
// Artifacts contain no timestamps or timings (those go to *_timing.csv), so
// identical config and seed give byte-identical files.

#include "ergodic/config.hpp"
#include "ergodic/dual.hpp"
#include "ergodic/error.hpp"
#include "ergodic/fpk.hpp"
#include "ergodic/generator.hpp"
#include "ergodic/primal.hpp"
#include "ergodic/problem.hpp"
#include "ergodic/random.hpp"
#include "ergodic/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wmaybe-uninitialized"
#include <json.hpp>
#pragma GCC diagnostic pop

namespace ergodic::app {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { ok = 0, verification_failure = 1, usage_error = 2, numerical_failure = 3 };

inline std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return fmt::format("{:016x}", h);
}

inline std::string num(double v) { return fmt::format("{:.17g}", v); }

/// JSON number, or null when not finite.
inline Json jnum(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json jvec(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(jnum(x));
    return a;
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(std::vector<std::string> row) {
        if (row.size() != header_.size()) throw std::logic_error("CsvTable: row width mismatch");
        rows_.push_back(std::move(row));
    }

    [[nodiscard]] std::string str() const {
        std::string out;
        auto line = [&out](const std::vector<std::string>& cells) {
            for (std::size_t j = 0; j < cells.size(); ++j) {
                if (j) out += ',';
                out += cells[j];
            }
            out += '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        return out;
    }

    [[nodiscard]] std::size_t rows() const { return rows_.size(); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << text;
    if (!os) throw std::runtime_error("write failed for " + path.string());
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
    write_text(path, j.dump(2) + "\n");
}

inline Json provenance(const RunConfig& cfg, const std::string& command) {
    Json p;
    p["command"] = command;
    p["version"] = kVersion;
    p["config_hash"] = "fnv1a64:" + fnv1a_hex(cfg.source);
    p["seed"] = cfg.seed;
    p["problem"] = cfg.problem;
    Json params = Json::object();
    for (const auto& [k, v] : cfg.params) params[k] = v;
    p["params"] = params;
    p["scheme"] = to_string(cfg.scheme);
    return p;
}

// ---------------------------------------------------------------------------
// Instance construction
// ---------------------------------------------------------------------------

struct Instance {
    ControlProblem problem;
    Grid grid;
    bool random = false;
};

inline Instance make_instance(const RunConfig& cfg) {
    Instance inst;
    if (cfg.problem == "random") {
        const int nodes = detail::int_param(cfg.params, "nodes", 12);
        const int controls = detail::int_param(cfg.params, "controls", 3);
        if (nodes < 3) throw ArgumentError("random problem: nodes must be >= 3");
        auto r = random_table_instance(nodes, controls, cfg.seed);
        inst.problem = std::move(r.problem);
        inst.grid = r.grid;
        inst.random = true;
        return inst;
    }
    inst.problem = builtin_problem(cfg.problem, cfg.params);
    const int dim = inst.problem.dim;
    if (cfg.n_per_axis) {
        auto counts = *cfg.n_per_axis;
        if (counts.size() == 1) counts.assign(static_cast<std::size_t>(dim), counts[0]);
        if (counts.size() != static_cast<std::size_t>(dim))
            throw ArgumentError(fmt::format("[grid] n_per_axis: {} values given for a {}-d problem",
                                            counts.size(), dim));
        inst.grid = Grid(dim, cfg.radius, counts);
    } else {
        inst.grid = build_grid(dim, cfg.radius, nodes_for_spacing(cfg.radius, *cfg.h));
    }
    return inst;
}

inline AssemblyOptions assembly(const RunConfig& cfg) { return AssemblyOptions{cfg.scheme}; }

inline PolicyIterationOptions pi_options(const RunConfig& cfg) {
    PolicyIterationOptions o;
    o.anchor = cfg.anchor;
    o.tol = cfg.tol;
    o.max_iter = cfg.max_iter;
    o.measure_tol = cfg.measure_tol;
    return o;
}

/// Spacing used by studies that rebuild the grid at other radii.
inline double config_spacing(const RunConfig& cfg, const Grid& grid) {
    return cfg.h ? *cfg.h : grid.spacing(0);
}

inline std::vector<std::string> coordinate_header(int dim, const std::string& prefix) {
    std::vector<std::string> h;
    if (dim == 1) {
        h.push_back(prefix);
    } else {
        for (int j = 0; j < dim; ++j) h.push_back(prefix + std::to_string(j));
    }
    return h;
}

// ---------------------------------------------------------------------------
// Error reporting
// ---------------------------------------------------------------------------

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ArgumentError*>(&e)) return usage_error;
    return numerical_failure;
}

inline std::string error_type(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
    if (dynamic_cast<const ArgumentError*>(&e)) return "ArgumentError";
    if (dynamic_cast<const PreconditionError*>(&e)) return "PreconditionError";
    if (dynamic_cast<const ConvergenceError*>(&e)) return "ConvergenceError";
    if (dynamic_cast<const NumericalError*>(&e)) return "NumericalError";
    return "Error";
}

/// Writes error.json into the output directory (best effort) and returns the
/// exit code for the exception.
inline int report_failure(const RunConfig& cfg, const std::string& command,
                          const std::string& stage, const std::exception& e, std::ostream& err) {
    const int code = exit_code_for(e);
    err << "ergodic " << command << ": " << stage << " failed: " << e.what() << "\n";
    Json j;
    j["provenance"] = provenance(cfg, command);
    j["stage"] = stage;
    j["error_type"] = error_type(e);
    j["message"] = e.what();
    j["exit_code"] = code;
    if (const auto* pe = dynamic_cast<const PolicyIterationError*>(&e)) {
        j["diagnostics"]["best_c"] = jnum(pe->best().c);
        j["diagnostics"]["iterations"] = pe->best().iterations;
        j["diagnostics"]["history"] = jvec(pe->best().history);
    }
    try {
        std::filesystem::create_directories(cfg.out_dir);
        write_json(std::filesystem::path(cfg.out_dir) / "error.json", j);
    } catch (const std::exception& io) {
        err << "ergodic " << command << ": could not write error.json: " << io.what() << "\n";
    }
    return code;
}

// ---------------------------------------------------------------------------
// Shared serializers
// ---------------------------------------------------------------------------

inline std::string solution_csv(const DiscreteModel& model, const ErgodicSolution& sol,
                                const ControlProblem& problem) {
    const Grid& grid = *model.grid;
    const int adim = static_cast<int>(problem.controls[0].size());
    auto header = coordinate_header(grid.dim(), "x");
    header.push_back("u");
    for (const auto& a : coordinate_header(adim, "alpha")) header.push_back(a);
    header.push_back("control_index");
    header.push_back("mu");
    CsvTable t(header);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::vector<std::string> row;
        const Vector x = grid.point(i);
        for (int j = 0; j < grid.dim(); ++j) row.push_back(num(x[j]));
        row.push_back(num(sol.u[static_cast<Eigen::Index>(i)]));
        const Vector& a = problem.controls[sol.policy[i]];
        for (int j = 0; j < adim; ++j) row.push_back(num(a[j]));
        row.push_back(std::to_string(sol.policy[i]));
        row.push_back(num(sol.mu.weights[static_cast<Eigen::Index>(i)]));
        t.add(row);
    }
    return t.str();
}

inline Json optimality_json(const OptimalityReport& r) {
    Json j;
    j["c_primal"] = jnum(r.c_primal);
    j["c_dual"] = jnum(r.c_dual);
    j["gap_method"] = r.gap_method;
    j["duality_gap"] = jnum(r.duality_gap);
    j["complementary_slackness"] = jnum(r.complementary_slackness);
    j["slackness_bound"] = jnum(r.slackness_bound);
    j["dual_feasibility"] = jnum(r.dual_feasibility);
    j["primal_dual_equality"] = jnum(r.primal_dual_equality);
    j["weighted_equality"] = jnum(r.weighted_equality);
    j["objective_consistency"] = jnum(r.objective_consistency);
    j["gap_pass"] = r.gap_pass;
    j["slackness_pass"] = r.slackness_pass;
    j["feasibility_pass"] = r.feasibility_pass;
    j["equality_pass"] = r.equality_pass;
    j["objective_pass"] = r.objective_pass;
    j["pass"] = r.pass();
    return j;
}

inline Json benchmark_json(const BenchmarkAccuracy& a) {
    Json j;
    j["has_closed_form"] = a.has_closed_form;
    if (a.has_closed_form) {
        j["c_exact"] = a.c_exact;
        j["c_error"] = jnum(a.c_error);
        j["c_tol"] = a.c_tol;
        j["u_error"] = jnum(a.u_error);
        j["u_tol"] = a.u_tol;
        j["policy_error"] = jnum(a.policy_error);
        j["policy_tol"] = jnum(a.policy_tol);
        j["window"] = a.window;
    }
    j["pass"] = a.pass();
    return j;
}

inline Json grid_json(const Grid& g) {
    Json j;
    j["dim"] = g.dim();
    j["radius"] = g.radius();
    Json n = Json::array();
    Json h = Json::array();
    for (int ax = 0; ax < g.dim(); ++ax) {
        n.push_back(g.n_per_axis(ax));
        h.push_back(g.spacing(ax));
    }
    j["n_per_axis"] = n;
    j["spacing"] = h;
    j["nodes"] = g.size();
    return j;
}

inline Json solution_json(const ErgodicSolution& sol) {
    Json j;
    j["c"] = jnum(sol.c);
    j["anchor_index"] = sol.anchor_index;
    j["iterations"] = sol.iterations;
    j["converged_by_fixpoint"] = sol.converged_by_fixpoint;
    j["history"] = jvec(sol.history);
    j["poisson_residual"] = jnum(sol.poisson_residual);
    j["hjb_residual_sup"] = jnum(sol.hjb_residual_sup);
    j["measure_residual"] = jnum(sol.mu.residual);
    return j;
}

inline double benchmark_kappa(const RunConfig& cfg) { return detail::param(cfg.params, "kappa", 1.0); }

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

inline int run_solve(const RunConfig& cfg, std::ostream& err = std::cerr) {
    std::string stage = "setup";
    try {
        const std::filesystem::path out(cfg.out_dir);
        std::filesystem::create_directories(out);
        stage = "discretize";
        const auto inst = make_instance(cfg);
        const auto model = discretize(inst.problem, inst.grid, assembly(cfg));
        stage = "solve";
        const auto sol = policy_iteration(model, pi_options(cfg));
        stage = "optimality";
        const auto rep = optimality_report(model, sol);
        const auto acc = benchmark_accuracy(inst.problem, inst.grid, sol, benchmark_kappa(cfg));

        stage = "write";
        write_text(out / "solution.csv", solution_csv(model, sol, inst.problem));
        Json s;
        s["provenance"] = provenance(cfg, "solve");
        s["grid"] = grid_json(inst.grid);
        s["controls"] = inst.problem.controls.size();
        const Json solved = solution_json(sol);
        for (const auto& [k, v] : solved.items()) s[k] = v;
        s["optimality"] = optimality_json(rep);
        s["benchmark"] = benchmark_json(acc);
        write_json(out / "summary.json", s);
        return ok;
    } catch (const std::exception& e) {
        return report_failure(cfg, "solve", stage, e, err);
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct StudyOutcome {
    bool pass = false;
    std::string csv;
    Json verdict;
};

struct VerifyContext {
    const RunConfig& cfg;
    const Instance& inst;
    const DiscreteModel& model;
    const ErgodicSolution& sol;
};

inline std::vector<std::string> default_studies(const Instance& inst) {
    if (inst.random) return {"benchmark", "optimality", "maximality", "uniqueness", "positivity"};
    return known_studies();
}

inline StudyOutcome study_benchmark(const VerifyContext& ctx) {
    const auto acc = benchmark_accuracy(ctx.inst.problem, ctx.inst.grid, ctx.sol,
                                        benchmark_kappa(ctx.cfg));
    CsvTable t({"metric", "value", "tolerance", "pass"});
    if (acc.has_closed_form) {
        t.add({"c_error", num(acc.c_error), num(acc.c_tol), acc.c_error <= acc.c_tol ? "1" : "0"});
        t.add({"u_error", num(acc.u_error), num(acc.u_tol), acc.u_error <= acc.u_tol ? "1" : "0"});
        if (std::isfinite(acc.policy_tol))
            t.add({"policy_error", num(acc.policy_error), num(acc.policy_tol),
                   acc.policy_error <= acc.policy_tol ? "1" : "0"});
    }
    return {acc.pass(), t.str(), benchmark_json(acc)};
}

inline StudyOutcome study_optimality(const VerifyContext& ctx) {
    const auto rep = optimality_report(ctx.model, ctx.sol);
    OptimalityTolerances tol;
    CsvTable t({"metric", "value", "tolerance", "pass"});
    auto row = [&t](const char* name, double v, double tl, bool p) {
        t.add({name, num(v), num(tl), p ? "1" : "0"});
    };
    row("duality_gap", rep.duality_gap, tol.gap, rep.gap_pass);
    row("complementary_slackness", rep.complementary_slackness, tol.slackness, rep.slackness_pass);
    row("dual_feasibility", rep.dual_feasibility, tol.feasibility, rep.feasibility_pass);
    row("primal_dual_equality", rep.primal_dual_equality, tol.equality, rep.equality_pass);
    row("objective_consistency", rep.objective_consistency,
        tol.objective * (1.0 + std::abs(rep.c_primal)), rep.objective_pass);
    return {rep.pass(), t.str(), optimality_json(rep)};
}

inline StudyOutcome study_maximality(const VerifyContext& ctx) {
    const auto rep = maximality_check(ctx.model, ctx.sol.c, ctx.cfg.trials, ctx.cfg.seed);
    CsvTable t({"trial", "c_tilde", "c", "violation"});
    for (std::size_t j = 0; j < rep.c_tilde.size(); ++j)
        t.add({std::to_string(j), num(rep.c_tilde[j]), num(rep.c),
               rep.c_tilde[j] > rep.c + 1e-10 ? "1" : "0"});
    Json v;
    v["trials"] = rep.trials;
    v["violations"] = rep.violations;
    v["c"] = jnum(rep.c);
    v["max_c_tilde"] = jnum(rep.max_c_tilde);
    v["margin"] = 1e-10;
    v["seed"] = ctx.cfg.seed;
    v["pass"] = rep.pass();
    return {rep.pass(), t.str(), v};
}

inline StudyOutcome study_uniqueness(const VerifyContext& ctx) {
    const auto& model = ctx.model;
    const std::size_t n = model.nodes();
    const std::size_t a0 = ctx.sol.anchor_index;
    const std::size_t a1 = (a0 + n / 4 + 1) % n;
    const Policy p0(n, 0);
    const Policy p1(n, model.controls() - 1);
    const double tol = 1e-8;

    CsvTable t({"anchor_1", "init_1", "anchor_2", "init_2", "deviation", "c_1", "c_2"});
    double worst = 0.0;
    const std::vector<std::pair<std::size_t, const Policy*>> combos = {
        {a0, &p0}, {a0, &p1}, {a1, &p0}, {a1, &p1}};
    const std::vector<std::string> init_names = {"control_0", "control_last"};
    for (std::size_t j = 0; j < combos.size(); ++j) {
        const auto& [anchor, init] = combos[j];
        const auto r = uniqueness_up_to_constant(model, {a0, anchor}, {p0, *init},
                                                 pi_options(ctx.cfg));
        worst = std::max(worst, r.deviation);
        t.add({std::to_string(a0), init_names[0], std::to_string(anchor), init_names[j % 2],
               num(r.deviation), num(r.c1), num(r.c2)});
    }
    Json v;
    v["anchors"] = {a0, a1};
    v["initial_policies"] = init_names;
    v["max_deviation"] = jnum(worst);
    v["tolerance"] = tol;
    v["pass"] = worst <= tol;
    return {worst <= tol, t.str(), v};
}

inline void require_builtin(const VerifyContext& ctx, const std::string& study) {
    if (ctx.inst.random)
        throw ArgumentError("study '" + study +
                            "' needs a builtin problem; the random instance has fixed tables");
}

inline StudyOutcome study_distance(const VerifyContext& ctx) {
    require_builtin(ctx, "distance");
    const double p = ctx.cfg.perturbation;
    const auto pert = [p](const Vector& x) -> Vector { return p * x; };
    StudyOptions so;
    so.assembly = assembly(ctx.cfg);
    so.measure_tol = ctx.cfg.measure_tol;
    so.policy = ctx.sol.policy;
    const auto st = distance_estimate_study(ctx.inst.problem, pert, ctx.cfg.epsilons,
                                            ctx.inst.grid, so);
    CsvTable t({"epsilon", "tv", "hellinger_sq", "bound_integral", "ratio"});
    for (std::size_t j = 0; j < st.epsilons.size(); ++j)
        t.add({num(st.epsilons[j]), num(st.tv[j]), num(st.hellinger_sq[j]),
               num(st.bound_integrals[j]), num(st.ratios[j])});
    Json v;
    v["perturbation_coefficient"] = p;
    v["fitted_C"] = jnum(st.fitted_C);
    v["ratios_finite"] = st.ratios_finite;
    v["linear_decay"] = st.linear_decay;
    v["hellinger_below_tv"] = st.hellinger_below_tv;
    Json skipped = Json::array();
    for (const auto& [eps, why] : st.skipped) skipped.push_back({{"epsilon", eps}, {"reason", why}});
    v["skipped"] = skipped;
    v["pass"] = st.pass();
    return {st.pass(), t.str(), v};
}

/// Control index whose first coordinate is nearest to value (first on ties).
inline std::size_t nearest_control(const ControlSet& controls, double value) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < controls.size(); ++k)
        if (std::abs(controls[k][0] - value) < std::abs(controls[best][0] - value)) best = k;
    return best;
}

inline StudyOutcome study_continuity(const VerifyContext& ctx) {
    require_builtin(ctx, "continuity");
    const auto& ctrl = ctx.inst.problem.controls;
    const std::size_t n = ctx.inst.grid.size();
    const std::size_t ref = nearest_control(ctrl, 0.0);
    std::vector<std::pair<Policy, Policy>> pairs;
    std::vector<double> deltas;
    for (double d : ctx.cfg.deltas) {
        pairs.emplace_back(Policy(n, ref), Policy(n, nearest_control(ctrl, ctrl[ref][0] + d)));
        deltas.push_back(d);
    }
    StudyOptions so;
    so.assembly = assembly(ctx.cfg);
    so.measure_tol = ctx.cfg.measure_tol;
    const auto st = continuity_F_study(ctx.inst.problem, ctx.inst.grid, pairs, so);
    CsvTable t({"delta", "alpha", "beta", "lhs", "drift_l2", "grad_a_l2", "a_l4", "cost_l1",
                "rhs_root", "implied_C", "tv", "hellinger_sq"});
    for (std::size_t j = 0; j < st.entries.size(); ++j) {
        const auto& e = st.entries[j];
        t.add({num(deltas[j]), num(ctrl[pairs[j].first[0]][0]), num(ctrl[pairs[j].second[0]][0]),
               num(e.lhs), num(e.drift_l2), num(e.grad_a_l2), num(e.a_l4), num(e.cost_l1),
               num(e.rhs_root), num(e.implied_C), num(e.tv), num(e.hellinger_sq)});
    }
    Json v;
    v["pairs"] = st.entries.size();
    v["max_C"] = jnum(st.max_C);
    v["finite"] = st.finite;
    v["shrinking"] = st.shrinking;
    v["hellinger_below_tv"] = st.hellinger_below_tv;
    v["pass"] = st.pass();
    return {st.pass(), t.str(), v};
}

inline StudyOutcome study_moments(const VerifyContext& ctx) {
    require_builtin(ctx, "moments");
    MomentSweepOptions mo;
    mo.assembly = assembly(ctx.cfg);
    mo.optimal_policy = ctx.inst.problem.controls.size() > 1;
    mo.measure_tol = ctx.cfg.measure_tol;
    const auto sw = moment_truncation_sweep(ctx.inst.problem, ctx.cfg.orders, ctx.cfg.radii,
                                            config_spacing(ctx.cfg, ctx.inst.grid), mo);
    std::vector<std::string> header = {"radius"};
    for (double o : sw.orders) header.push_back("moment_" + num(o));
    CsvTable t(header);
    for (std::size_t r = 0; r < sw.radii.size(); ++r) {
        std::vector<std::string> row = {num(sw.radii[r])};
        for (double m : sw.moments[r]) row.push_back(num(m));
        t.add(row);
    }
    Json v;
    v["orders"] = jvec(sw.orders);
    v["radii"] = jvec(sw.radii);
    v["optimal_policy"] = mo.optimal_policy;
    v["final_moments"] = jvec(sw.moments.back());
    v["last_change"] = jvec(sw.last_change);
    v["tolerance"] = sw.tolerance;
    v["pass"] = sw.stabilized();
    return {sw.stabilized(), t.str(), v};
}

inline StudyOutcome study_positivity(const VerifyContext& ctx) {
    const auto rep = positivity_report(ctx.sol.mu);
    const double mass = ctx.sol.mu.weights.sum();
    const bool normalized = std::abs(mass - 1.0) <= 1e-12;
    CsvTable t({"half_width", "max_over_min"});
    for (const auto& b : rep.boxes) t.add({num(b.half_width), num(b.ratio)});
    Json v;
    v["min_weight"] = jnum(rep.min_weight);
    v["argmin"] = rep.argmin;
    v["zero_count"] = rep.zero_count;
    v["mass"] = jnum(mass);
    v["strictly_positive"] = rep.strictly_positive;
    v["normalized"] = normalized;
    const bool pass = rep.strictly_positive && normalized;
    v["pass"] = pass;
    return {pass, t.str(), v};
}

inline StudyOutcome run_study(const std::string& name, const VerifyContext& ctx) {
    if (name == "benchmark") return study_benchmark(ctx);
    if (name == "optimality") return study_optimality(ctx);
    if (name == "maximality") return study_maximality(ctx);
    if (name == "uniqueness") return study_uniqueness(ctx);
    if (name == "distance") return study_distance(ctx);
    if (name == "continuity") return study_continuity(ctx);
    if (name == "moments") return study_moments(ctx);
    if (name == "positivity") return study_positivity(ctx);
    throw ArgumentError("unknown study '" + name + "'");
}

inline int run_verify(const RunConfig& cfg, std::ostream& err = std::cerr) {
    std::string stage = "setup";
    try {
        const std::filesystem::path out(cfg.out_dir);
        std::filesystem::create_directories(out);
        Json summary;
        summary["provenance"] = provenance(cfg, "verify");

        if (cfg.studies && cfg.studies->empty()) {
            summary["studies"] = Json::array();
            summary["failed"] = Json::array();
            summary["pass"] = true;
            write_json(out / "verify_summary.json", summary);
            return ok;
        }

        stage = "discretize";
        const auto inst = make_instance(cfg);
        const auto model = discretize(inst.problem, inst.grid, assembly(cfg));
        stage = "solve";
        const auto sol = policy_iteration(model, pi_options(cfg));
        const VerifyContext ctx{cfg, inst, model, sol};

        const auto names = cfg.studies ? *cfg.studies : default_studies(inst);
        Json studies = Json::array();
        Json failed = Json::array();
        for (const auto& name : names) {
            stage = "study " + name;
            StudyOutcome o;
            try {
                o = run_study(name, ctx);
            } catch (const ArgumentError&) {
                throw;
            } catch (const std::exception& e) {
                // a study that cannot complete counts as a failed verdict
                o.pass = false;
                o.csv = CsvTable({"error"}).str();
                o.verdict["error_type"] = error_type(e);
                o.verdict["error"] = e.what();
                o.verdict["pass"] = false;
            }
            Json verdict;
            verdict["study"] = name;
            verdict["provenance"] = provenance(cfg, "verify");
            for (const auto& [k, v] : o.verdict.items()) verdict[k] = v;
            write_text(out / (name + ".csv"), o.csv);
            write_json(out / (name + ".json"), verdict);
            studies.push_back({{"name", name}, {"pass", o.pass}});
            if (!o.pass) failed.push_back(name);
        }
        summary["solution"] = solution_json(sol);
        summary["studies"] = studies;
        summary["failed"] = failed;
        summary["pass"] = failed.empty();
        stage = "write";
        write_json(out / "verify_summary.json", summary);
        if (!failed.empty()) {
            std::string list;
            for (const auto& f : failed) list += (list.empty() ? "" : ", ") + f.get<std::string>();
            err << "ergodic verify: failing studies: " << list << "\n";
            return verification_failure;
        }
        return ok;
    } catch (const std::exception& e) {
        return report_failure(cfg, "verify", stage, e, err);
    }
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepRow {
    double value = 0.0;
    double refinement = 0.0;  // parameter that goes to zero under refinement
    std::size_t nodes = 0;
    std::size_t controls = 0;
    double c = 0.0;
    std::optional<double> c_error;
    double hjb_residual = 0.0;
    double poisson_residual = 0.0;
    int iterations = 0;
    double u_sup = 0.0;
    double growth_reference = 0.0;  // (1 + R)^kappa with kappa = d + 1 - theta
    double seconds = 0.0;
};

inline int run_sweep(const RunConfig& cfg, std::ostream& err = std::cerr) {
    std::string stage = "setup";
    try {
        if (cfg.problem == "random")
            throw ArgumentError("sweep needs a builtin problem; the random instance has a fixed grid");
        const std::filesystem::path out(cfg.out_dir);
        std::filesystem::create_directories(out);
        const std::string& axis = cfg.sweep_axis;

        std::vector<double> values = cfg.sweep_values;
        if (values.empty()) {
            if (axis == "h") values = {cfg.h ? *cfg.h : 2.0 * cfg.radius / (cfg.n_per_axis->at(0) - 1)};
            else if (axis == "R") values = {cfg.radius};
            else values = {detail::param(cfg.params, "n_ctrl", 0.0)};
        }
        bool up = true, down = true;
        for (std::size_t j = 1; j < values.size(); ++j) {
            up = up && values[j] > values[j - 1];
            down = down && values[j] < values[j - 1];
        }
        if (!up && !down)
            throw ArgumentError("sweep_values must be strictly increasing or strictly decreasing");
        if (axis == "n_ctrl") {
            const auto& allowed = builtin_parameters().at(cfg.problem);
            if (std::find(allowed.begin(), allowed.end(), "n_ctrl") == allowed.end())
                throw ArgumentError("problem '" + cfg.problem + "' has no n_ctrl parameter");
        }

        std::vector<SweepRow> rows;
        for (double v : values) {
            stage = fmt::format("sweep {}={}", axis, num(v));
            RunConfig c = cfg;
            if (axis == "h") {
                c.h = v;
                c.n_per_axis.reset();
            } else if (axis == "R") {
                c.radius = v;
                if (!c.h) {
                    c.h = 2.0 * cfg.radius / (cfg.n_per_axis->at(0) - 1);
                    c.n_per_axis.reset();
                }
            } else {
                c.params["n_ctrl"] = v;
            }
            const auto t0 = std::chrono::steady_clock::now();
            const auto inst = make_instance(c);
            const auto model = discretize(inst.problem, inst.grid, assembly(c));
            const auto sol = policy_iteration(model, pi_options(c));
            const auto t1 = std::chrono::steady_clock::now();

            SweepRow r;
            r.value = v;
            r.refinement = axis == "h" ? v : axis == "n_ctrl" ? 1.0 / (v - 1.0) : 1.0 / v;
            r.nodes = model.nodes();
            r.controls = model.controls();
            r.c = sol.c;
            const auto acc = benchmark_accuracy(inst.problem, inst.grid, sol, benchmark_kappa(c));
            if (acc.has_closed_form) r.c_error = acc.c_error;
            r.hjb_residual = sol.hjb_residual_sup;
            r.poisson_residual = sol.poisson_residual;
            r.iterations = sol.iterations;
            r.u_sup = sol.u.cwiseAbs().maxCoeff();
            const auto& g = inst.problem.growth;
            r.growth_reference = std::pow(1.0 + inst.grid.radius(), g.d + 1.0 - g.theta);
            r.seconds = std::chrono::duration<double>(t1 - t0).count();
            rows.push_back(r);
        }

        stage = "write";
        CsvTable table({axis, "nodes", "controls", "c", "c_error", "hjb_residual_sup",
                        "poisson_residual", "iterations", "u_sup", "growth_reference"});
        CsvTable timing({axis, "seconds"});
        for (const auto& r : rows) {
            table.add({num(r.value), std::to_string(r.nodes), std::to_string(r.controls), num(r.c),
                       r.c_error ? num(*r.c_error) : "", num(r.hjb_residual),
                       num(r.poisson_residual), std::to_string(r.iterations), num(r.u_sup),
                       num(r.growth_reference)});
            timing.add({num(r.value), num(r.seconds)});
        }

        // Richardson triplets on the refinement parameter (not meaningful for R)
        Json richardson = Json::array();
        if (axis != "R")
            for (std::size_t j = 0; j + 2 < rows.size(); ++j) {
                const double r1 = rows[j].refinement / rows[j + 1].refinement;
                const double r2 = rows[j + 1].refinement / rows[j + 2].refinement;
                Json e;
                e["values"] = {rows[j].value, rows[j + 1].value, rows[j + 2].value};
                const double d1 = std::abs(rows[j].c - rows[j + 1].c);
                const double d2 = std::abs(rows[j + 1].c - rows[j + 2].c);
                if (std::abs(r1 - r2) > 1e-9 * std::abs(r1) || r1 <= 1.0) {
                    e["order"] = nullptr;
                    e["note"] = "refinement ratio not constant or not refining";
                } else if (d1 == 0.0 || d2 == 0.0) {
                    e["order"] = nullptr;
                    e["note"] = "successive values of c coincide";
                } else {
                    e["order"] = jnum(std::log(d1 / d2) / std::log(r1));
                }
                richardson.push_back(e);
            }

        Json error_orders = Json::array();
        std::optional<bool> decreasing;
        if (!rows.empty() && rows.front().c_error && axis != "R") {
            decreasing = true;
            for (std::size_t j = 0; j + 1 < rows.size(); ++j) {
                const double e1 = *rows[j].c_error;
                const double e2 = *rows[j + 1].c_error;
                const bool refining = rows[j + 1].refinement < rows[j].refinement;
                if (refining ? !(e2 < e1) : !(e1 < e2)) decreasing = false;
                if (e1 > 0.0 && e2 > 0.0)
                    error_orders.push_back(
                        jnum(std::log(e1 / e2) / std::log(rows[j].refinement / rows[j + 1].refinement)));
                else
                    error_orders.push_back(nullptr);
            }
        }

        Json s;
        s["provenance"] = provenance(cfg, "sweep");
        s["axis"] = axis;
        s["values"] = jvec(values);
        Json cs = Json::array();
        for (const auto& r : rows) cs.push_back(jnum(r.c));
        s["c"] = cs;
        Json errs = Json::array();
        for (const auto& r : rows) errs.push_back(r.c_error ? jnum(*r.c_error) : Json(nullptr));
        s["c_error"] = errs;
        s["richardson"] = richardson;
        s["error_orders"] = error_orders;
        s["errors_decreasing"] = decreasing ? Json(*decreasing) : Json(nullptr);
        s["last_change"] =
            rows.size() >= 2 ? jnum(std::abs(rows.back().c - rows[rows.size() - 2].c)) : Json(nullptr);
        write_text(out / "sweep.csv", table.str());
        write_text(out / "sweep_timing.csv", timing.str());
        write_json(out / "sweep.json", s);
        return ok;
    } catch (const std::exception& e) {
        return report_failure(cfg, "sweep", stage, e, err);
    }
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

inline constexpr double kOracleAgreement = 1e-9;

inline int run_oracle(const RunConfig& cfg, std::ostream& err = std::cerr) {
    std::string stage = "setup";
    try {
        const std::filesystem::path out(cfg.out_dir);
        std::filesystem::create_directories(out);
        stage = "discretize";
        const auto inst = make_instance(cfg);
        const auto model = discretize(inst.problem, inst.grid, assembly(cfg));
        const std::size_t n = model.nodes();
        const std::size_t k = model.controls();
        const double policies = std::pow(static_cast<double>(k), static_cast<double>(n));
        if (policies > kMaxEnumeratedPolicies)
            throw ArgumentError(fmt::format(
                "oracle: {} nodes and {} controls give {:.3g} policies, above the enumeration "
                "bound {:.0g}; reduce the node count or the control count",
                n, k, policies, kMaxEnumeratedPolicies));
        if (n * k > kMaxLpConstraints)
            throw ArgumentError(fmt::format(
                "oracle: N * |A| = {} exceeds the LP bound {}; reduce the node count or the "
                "control count",
                n * k, kMaxLpConstraints));

        stage = "policy_iteration";
        const auto pi = policy_iteration(model, pi_options(cfg));
        stage = "enumeration";
        const auto en = enumerate_policies_oracle(model);
        stage = "lp_dual";
        const auto lp = lp_dual_solve(model, pi.anchor_index);

        const double d_el = std::abs(en.c_min - lp.c);
        const double d_ep = std::abs(en.c_min - pi.c);
        const double d_lp = std::abs(lp.c - pi.c);
        const double worst = std::max({d_el, d_ep, d_lp});
        const bool pass = worst <= kOracleAgreement;

        stage = "write";
        auto policy_json = [](const Policy& p) {
            Json a = Json::array();
            for (auto v : p) a.push_back(v);
            return a;
        };
        Json j;
        j["provenance"] = provenance(cfg, "oracle");
        j["nodes"] = n;
        j["controls"] = k;
        j["policies"] = jnum(policies);
        j["c"] = {{"enumeration", jnum(en.c_min)},
                  {"lp_dual", jnum(lp.c)},
                  {"policy_iteration", jnum(pi.c)}};
        j["pairwise"] = {{"enumeration_lp_dual", jnum(d_el)},
                         {"enumeration_policy_iteration", jnum(d_ep)},
                         {"lp_dual_policy_iteration", jnum(d_lp)}};
        j["max_disagreement"] = jnum(worst);
        j["tolerance"] = kOracleAgreement;
        j["enumeration_policy"] = policy_json(en.best_policy);
        j["policy_iteration_policy"] = policy_json(pi.policy);
        j["policy_iteration_history"] = jvec(pi.history);
        j["lp_pivots"] = lp.pivots;
        j["lp_min_slack"] = jnum(lp.min_slack);
        j["pass"] = pass;
        write_json(out / "oracle.json", j);

        CsvTable active({"node", "control_index", "x", "alpha"});
        for (const auto& [i, c] : lp.active_set)
            active.add({std::to_string(i), std::to_string(c), num(inst.grid.point(i)[0]),
                        num(inst.problem.controls[c][0])});
        write_text(out / "active_set.csv", active.str());

        if (!pass) {
            err << fmt::format("ergodic oracle: solvers disagree by {:.3g} (> {:.0g})\n", worst,
                               kOracleAgreement);
            return verification_failure;
        }
        return ok;
    } catch (const std::exception& e) {
        return report_failure(cfg, "oracle", stage, e, err);
    }
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

struct CommandLine {
    std::string command;
    std::string config_text;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
};

/// Parses the config text, applies command-line overrides and runs the
/// subcommand. Config errors print to err and return 2.
inline int run_command(const CommandLine& cl, std::ostream& err = std::cerr) {
    RunConfig cfg;
    try {
        cfg = parse_config(cl.config_text);
    } catch (const std::exception& e) {
        err << "ergodic " << cl.command << ": config error: " << e.what() << "\n";
        return usage_error;
    }
    if (cl.out_dir) cfg.out_dir = *cl.out_dir;
    if (cl.seed) cfg.seed = *cl.seed;
    if (cl.command == "solve") return run_solve(cfg, err);
    if (cl.command == "verify") return run_verify(cfg, err);
    if (cl.command == "sweep") return run_sweep(cfg, err);
    if (cl.command == "oracle") return run_oracle(cfg, err);
    err << "ergodic: unknown command '" << cl.command << "'\n";
    return usage_error;
}

}  // namespace ergodic::app
