#include "ergodic/app.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

using namespace ergodic;
using app::Json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "ergodic_test_app" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Json read_json(const fs::path& p) { return Json::parse(slurp(p)); }

std::string config(const std::string& name) {
    return slurp(fs::path(ERGODIC_CONFIG_DIR) / name);
}

int run(const std::string& command, const std::string& text, const fs::path& out,
        std::optional<std::uint64_t> seed = std::nullopt) {
    std::ostringstream err;
    app::CommandLine cl{command, text, out.string(), seed};
    return app::run_command(cl, err);
}

int cli(const std::string& args) {
    const std::string cmd = std::string(ERGODIC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Solve, LqBenchmark) {
    const auto out = scratch("solve_lq");
    ASSERT_EQ(run("solve", config("lq1d.ini"), out), 0);
    const auto s = read_json(out / "summary.json");
    EXPECT_NEAR(s["c"].get<double>(), 2.0, 2e-2);
    EXPECT_TRUE(s["benchmark"]["pass"].get<bool>());
    EXPECT_TRUE(s["optimality"]["pass"].get<bool>());
    EXPECT_EQ(s["optimality"]["gap_method"], "residual_bound");
    EXPECT_EQ(s["controls"], 81);
    const auto csv = slurp(out / "solution.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "x,u,alpha,control_index,mu");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 242);
}

TEST(Solve, OuBenchmarkKeyOrder) {
    const auto out = scratch("solve_ou");
    ASSERT_EQ(run("solve", config("ou1d.ini"), out), 0);
    const auto s = read_json(out / "summary.json");
    EXPECT_NEAR(s["c"].get<double>(), 1.0, 1e-2);
    EXPECT_EQ(s["optimality"]["gap_method"], "lp");
    std::vector<std::string> keys;
    for (const auto& [k, v] : s.items()) keys.push_back(k);
    EXPECT_EQ(keys.front(), "provenance");
    EXPECT_EQ(s["provenance"]["config_hash"].get<std::string>().rfind("fnv1a64:", 0), 0u);
}

TEST(Solve, DominanceViolationExitsWithPreconditionError) {
    const auto out = scratch("dominance");
    EXPECT_EQ(run("solve", config("dominance_violation.ini"), out), 3);
    const auto e = read_json(out / "error.json");
    EXPECT_EQ(e["error_type"], "PreconditionError");
    EXPECT_EQ(e["stage"], "discretize");
    const auto msg = e["message"].get<std::string>();
    EXPECT_NE(msg.find("node 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("axis 1"), std::string::npos) << msg;
}

TEST(Solve, IterationCapWritesDiagnostics) {
    const auto out = scratch("max_iter");
    EXPECT_EQ(run("solve", config("lq1d.ini") + "[solver]\nmax_iter = 2\n", out), 3);
    const auto e = read_json(out / "error.json");
    EXPECT_EQ(e["error_type"], "ConvergenceError");
    EXPECT_EQ(e["diagnostics"]["iterations"], 2);
    EXPECT_EQ(e["diagnostics"]["history"].size(), 2u);
}

TEST(Verify, OuDefaultSuitePasses) {
    const auto out = scratch("verify_ou");
    ASSERT_EQ(run("verify", config("ou1d.ini"), out), 0);
    const auto s = read_json(out / "verify_summary.json");
    EXPECT_TRUE(s["pass"].get<bool>());
    ASSERT_EQ(s["studies"].size(), known_studies().size());
    for (const auto& name : known_studies()) {
        EXPECT_TRUE(fs::exists(out / (name + ".csv"))) << name;
        const auto v = read_json(out / (name + ".json"));
        EXPECT_TRUE(v["pass"].get<bool>()) << name << ": " << v.dump();
    }
}

TEST(Verify, LqDefaultSuitePasses) {
    const auto out = scratch("verify_lq");
    ASSERT_EQ(run("verify", config("lq1d.ini"), out), 0) << slurp(out / "verify_summary.json");
}

TEST(Verify, LooseGridFailsBenchmarkOnly) {
    const auto out = scratch("verify_loose");
    const std::string text =
        "[problem]\nname = ou1d\n[grid]\nradius = 1.5\nh = 0.5\n"
        "[studies]\nrun = uniqueness, benchmark\n";
    EXPECT_EQ(run("verify", text, out), 1);
    const auto s = read_json(out / "verify_summary.json");
    EXPECT_EQ(s["failed"], Json::array({"benchmark"}));
    EXPECT_TRUE(read_json(out / "uniqueness.json")["pass"].get<bool>());
}

TEST(Verify, EmptySuite) {
    const auto out = scratch("verify_empty");
    EXPECT_EQ(run("verify", config("ou1d.ini") + "[studies]\nrun =\n", out), 0);
    const auto s = read_json(out / "verify_summary.json");
    EXPECT_TRUE(s["studies"].empty());
    EXPECT_TRUE(s["pass"].get<bool>());
}

TEST(Verify, RandomInstanceRejectsBuiltinStudies) {
    const auto out = scratch("verify_random_distance");
    EXPECT_EQ(run("verify", config("random_oracle.ini") + "[studies]\nrun = distance\n", out), 2);
    EXPECT_EQ(run("verify", config("random_oracle.ini"), out), 0);
}

TEST(Sweep, LqMeshRefinementDecreasesError) {
    const auto out = scratch("sweep_lq");
    ASSERT_EQ(run("sweep", config("sweep_lq_h.ini"), out), 0);
    const auto s = read_json(out / "sweep.json");
    EXPECT_TRUE(s["errors_decreasing"].get<bool>()) << s.dump();
    ASSERT_EQ(s["richardson"].size(), 1u);
    EXPECT_FALSE(s["richardson"][0]["order"].is_null());
    const auto csv = slurp(out / "sweep.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "h,nodes,controls,c,c_error,hjb_residual_sup,poisson_residual,iterations,u_sup,"
              "growth_reference");
    EXPECT_TRUE(fs::exists(out / "sweep_timing.csv"));
}

TEST(Sweep, OuRadiusStabilizes) {
    const auto out = scratch("sweep_ou_r");
    ASSERT_EQ(run("sweep", config("sweep_ou_radius.ini"), out), 0);
    const auto s = read_json(out / "sweep.json");
    EXPECT_LE(s["last_change"].get<double>(), 1e-4);
    EXPECT_TRUE(s["richardson"].empty());
}

TEST(Sweep, SingleValueAndNonMonotone) {
    const auto out = scratch("sweep_single");
    ASSERT_EQ(run("sweep", config("ou1d.ini") + "[studies]\nsweep_values = 0.1\n", out), 0);
    const auto s = read_json(out / "sweep.json");
    EXPECT_EQ(s["c"].size(), 1u);
    EXPECT_TRUE(s["error_orders"].empty());
    EXPECT_TRUE(s["last_change"].is_null());
    EXPECT_EQ(run("sweep", config("ou1d.ini") + "[studies]\nsweep_values = 0.1, 0.2, 0.1\n", out),
              2);
    EXPECT_EQ(run("sweep",
                  config("ou1d.ini") + "[studies]\nsweep_axis = n_ctrl\nsweep_values = 3, 5\n",
                  out),
              2);
}

TEST(Oracle, RandomTwelveByThreeAgrees) {
    const auto out = scratch("oracle_random");
    ASSERT_EQ(run("oracle", config("random_oracle.ini"), out), 0);
    const auto j = read_json(out / "oracle.json");
    EXPECT_LE(j["max_disagreement"].get<double>(), 1e-9);
    EXPECT_EQ(j["policies"].get<double>(), 531441.0);
    EXPECT_EQ(j["enumeration_policy"], j["policy_iteration_policy"]);
    EXPECT_TRUE(fs::exists(out / "active_set.csv"));
}

TEST(Oracle, SingletonControlSet) {
    const auto out = scratch("oracle_singleton");
    const std::string text = "[problem]\nname = ou1d\n[grid]\nradius = 3\nh = 0.25\n";
    ASSERT_EQ(run("oracle", text, out), 0);
    EXPECT_EQ(read_json(out / "oracle.json")["policies"].get<double>(), 1.0);
}

TEST(Oracle, OversizedInstanceRefused) {
    const auto out = scratch("oracle_big");
    EXPECT_EQ(run("oracle", config("lq1d.ini"), out), 2);
    const auto e = read_json(out / "error.json");
    EXPECT_EQ(e["error_type"], "ArgumentError");
    EXPECT_NE(e["message"].get<std::string>().find("reduce"), std::string::npos);
}

TEST(Reproducibility, ArtifactsAreByteIdentical) {
    const auto a = scratch("repro_a");
    const auto b = scratch("repro_b");
    const std::string text = config("lq1d.ini") + "[studies]\nrun = maximality, uniqueness\n";
    ASSERT_EQ(run("verify", text, a, 5), 0);
    ASSERT_EQ(run("verify", text, b, 5), 0);
    for (const char* f : {"verify_summary.json", "maximality.csv", "maximality.json",
                          "uniqueness.csv", "uniqueness.json"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    const auto c = scratch("repro_c");
    ASSERT_EQ(run("verify", text, c, 6), 0);
    EXPECT_NE(slurp(a / "maximality.csv"), slurp(c / "maximality.csv"));
}

TEST(Reproducibility, SeventeenDigitCsv) {
    const auto out = scratch("digits");
    ASSERT_EQ(run("solve", config("ou1d.ini"), out), 0);
    const auto csv = slurp(out / "solution.csv");
    const auto line = csv.substr(csv.find('\n') + 1);
    const auto first = line.substr(0, line.find(','));
    EXPECT_EQ(app::num(std::stod(first)), first);
    EXPECT_EQ(app::num(0.1), "0.10000000000000001");
}

TEST(Commands, BadConfigExitsTwo) {
    const auto out = scratch("bad_config");
    EXPECT_EQ(run("solve", "[grid]\nradiuz = 6\n", out), 2);
    EXPECT_EQ(run("transmogrify", config("ou1d.ini"), out), 2);
}

TEST(Cli, ExitCodes) {
    const auto out = scratch("cli");
    const std::string dir = ERGODIC_CONFIG_DIR;
    EXPECT_EQ(cli("solve --config " + dir + "/ou1d.ini --out " + out.string()), 0);
    EXPECT_TRUE(fs::exists(out / "summary.json"));
    EXPECT_EQ(cli("solve --config " + dir + "/dominance_violation.ini --out " + out.string()), 3);
    EXPECT_EQ(cli("oracle --config " + dir + "/lq1d.ini --out " + out.string()), 2);
    EXPECT_EQ(cli("solve --config /nonexistent.ini"), 2);
    EXPECT_EQ(cli("solve"), 2);
    EXPECT_EQ(cli("frobnicate --config x"), 2);
    EXPECT_EQ(cli(""), 2);
    EXPECT_EQ(cli("--help"), 0);
}

TEST(Cli, SeedOverride) {
    const auto a = scratch("cli_seed_a");
    const auto b = scratch("cli_seed_b");
    const std::string cfg = std::string(ERGODIC_CONFIG_DIR) + "/random_oracle.ini";
    EXPECT_EQ(cli("oracle --config " + cfg + " --seed 3 --out " + a.string()), 0);
    EXPECT_EQ(cli("oracle --config " + cfg + " --seed 3 --out " + b.string()), 0);
    EXPECT_EQ(slurp(a / "oracle.json"), slurp(b / "oracle.json"));
    EXPECT_EQ(read_json(a / "oracle.json")["provenance"]["seed"], 3);
}
