// Policy iteration, exhaustive enumeration and the dual LP on small random
// tables. All three should report the same ergodic constant.

#include "ergodic/dual.hpp"
#include "ergodic/primal.hpp"
#include "ergodic/random.hpp"

#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

using namespace ergodic;

int main(int argc, char** argv) {
    const int instances = argc > 1 ? std::atoi(argv[1]) : 5;
    fmt::print("{:>4} {:>5} {:>8} {:>18} {:>18} {:>18} {:>9}\n", "seed", "nodes", "controls",
               "policy_iteration", "enumeration", "lp_dual", "spread");
    for (int s = 0; s < instances; ++s) {
        const int nodes = 6 + s % 7;
        const int controls = 2 + s % 2;
        const auto inst = random_table_instance(nodes, controls, static_cast<std::uint64_t>(s));
        const auto model = discretize(inst.problem, inst.grid);
        const auto pi = policy_iteration(model);
        const auto en = enumerate_policies_oracle(model);
        const auto lp = lp_dual_solve(model, pi.anchor_index);
        const double spread = std::max({pi.c, en.c_min, lp.c}) - std::min({pi.c, en.c_min, lp.c});
        fmt::print("{:>4} {:>5} {:>8} {:>18.15f} {:>18.15f} {:>18.15f} {:>9.1e}\n", s, nodes,
                   controls, pi.c, en.c_min, lp.c, spread);
    }
}
