// Solves the shipped benchmarks and prints the ergodic constant next to the
// closed form where one exists.

#include "ergodic/dual.hpp"
#include "ergodic/primal.hpp"
#include "ergodic/verify.hpp"

#include <fmt/format.h>

using namespace ergodic;

int main() {
    struct Case {
        const char* name;
        double radius;
        double h;
    };
    const Case cases[] = {{"ou1d", 6.0, 0.05}, {"lq1d", 6.0, 0.05}, {"doublewell1d", 3.0, 0.05},
                          {"ou2d", 4.0, 0.1}};
    for (const auto& c : cases) {
        const auto problem = builtin_problem(c.name);
        const auto grid = build_grid(problem.dim, c.radius, nodes_for_spacing(c.radius, c.h));
        const auto model = discretize(problem, grid);
        const auto sol = policy_iteration(model);
        const auto rep = optimality_report(model, sol);
        const auto acc = benchmark_accuracy(problem, grid, sol);
        fmt::print("{:<13} nodes={:<5} c={:.10f}", c.name, grid.size(), sol.c);
        if (acc.has_closed_form) fmt::print(" exact={:.1f} |u-u*|={:.2e}", acc.c_exact, acc.u_error);
        fmt::print(" iterations={} gap({})={:.1e} optimality={}\n", sol.iterations,
                   rep.gap_method, rep.duality_gap, rep.pass() ? "ok" : "FAILED");
    }
}
