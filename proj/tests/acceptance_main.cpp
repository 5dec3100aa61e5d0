// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Usage: acceptance_suite <scenario_dir> <out_dir> [workers]

#include <cstdio>
#include <cstdlib>
#include <string>

#include "bdsde/acceptance.hpp"

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: %s <scenario_dir> <out_dir> [workers]\n", argv[0]);
        return 2;
    }
    bdsde::AcceptanceOptions opts;
    opts.scenario_dir = argv[1];
    opts.out_dir = argv[2];
    opts.n_workers = argc > 3 ? static_cast<std::size_t>(std::atoi(argv[3])) : 2;

    const auto results = bdsde::run_acceptance(opts);
    bool all = true;
    for (const auto& r : results) {
        std::printf("%s  [%2d] %s — %s (%.1fs)\n", r.pass ? "PASS" : "FAIL", r.id,
                    r.name.c_str(), r.detail.c_str(), r.wall_seconds);
        all = all && r.pass;
    }
    std::printf("%s: %zu criteria\n", all ? "ALL PASS" : "FAILURES PRESENT", results.size());
    return all ? 0 : 1;
}
