#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "bdsde/acceptance.hpp"
#include "bdsde/errors.hpp"
#include "bdsde/field.hpp"
#include "bdsde/report.hpp"
#include "bdsde/scenario.hpp"
#include "bdsde/singular.hpp"
#include "bdsde/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bdsde;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAcceptanceFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitNumericalError = 3;

struct CommonArgs {
    std::string scenario_path;
    std::string out_dir;
    std::uint64_t seed_override = 0;
    bool has_seed_override = false;
    std::size_t workers = 1;
    std::string format = "csv";
};

struct Phase {
    std::string name;
    double seconds;
};

struct Loaded {
    Scenario sc;
    TimeGrid grid;
    DualBrownianPaths noise;
    SdeCoefficients sde;
    ForwardPaths fwd;
    GeneratorSpec f;
    NoiseCoefficientSpec g;
    TerminalCondition tc;
    SolverOptions opts;
};

Loaded load(const CommonArgs& args, std::vector<Phase>& phases) {
    const auto t0 = std::chrono::steady_clock::now();
    Scenario sc = parse_scenario_file(args.scenario_path);
    if (args.has_seed_override) sc.seed = args.seed_override;
    TimeGrid grid = make_grid(sc);
    DualBrownianPaths noise(grid, sc.d, sc.m, sc.n_paths, sc.seed, args.workers);
    SdeCoefficients sde = make_sde(sc);
    Vec x0(static_cast<Eigen::Index>(sc.x0.size()));
    for (std::size_t i = 0; i < sc.x0.size(); ++i) x0(static_cast<Eigen::Index>(i)) = sc.x0[i];
    ForwardPaths fwd = euler_maruyama(sde, grid.t_start(), x0, grid, noise, args.workers);
    GeneratorSpec f = make_generator(sc);
    NoiseCoefficientSpec g = make_noise_coefficient(sc);
    TerminalCondition tc = make_terminal(sc);
    SolverOptions opts = make_solver_options(sc, args.workers);
    phases.push_back({"setup", std::chrono::duration<double>(
                                   std::chrono::steady_clock::now() - t0)
                                   .count()});
    return Loaded{std::move(sc), grid,         std::move(noise), sde, std::move(fwd),
                  std::move(f),  std::move(g), std::move(tc),    opts};
}

fs::path resolve_out(const CommonArgs& args, const Scenario& sc) {
    fs::path dir = args.out_dir.empty() ? fs::path(sc.out_dir) : fs::path(args.out_dir);
    fs::create_directories(dir);
    return dir;
}

json base_manifest(const Loaded& run, const CommonArgs& args) {
    json m;
    m["version"] = "0.1.0";
    m["compiler"] = __VERSION__;
    m["scenario"] = run.sc.name;
    m["scenario_hash"] = run.sc.hash();
    m["seed"] = run.sc.seed;
    m["workers"] = args.workers;
    m["grid"] = {{"t_start", run.sc.t_start},
                 {"t_end", run.sc.t_end},
                 {"n_steps", run.sc.n_steps}};
    m["noise"] = {{"d", run.sc.d}, {"m", run.sc.m}, {"n_paths", run.sc.n_paths}};
    m["basis"] = {{"family", run.sc.basis.family_name()},
                  {"degree", run.sc.basis.degree},
                  {"bins", run.sc.basis.bins},
                  {"ridge", run.sc.basis.ridge_lambda}};
    m["constants"] = {{"mu", run.sc.mu},   {"kf", run.sc.kf},   {"cf", run.sc.cf},
                      {"p", run.sc.growth_p}, {"kg", run.sc.kg}, {"eps", run.sc.eps}};
    json derived;
    const double denom_minus = 1.0 - run.sc.eps;
    derived["alpha"] =
        2.0 * run.sc.mu + 2.0 * run.sc.kf / denom_minus + 2.0 * run.sc.kg / (1.0 + run.sc.eps);
    derived["eta"] = 2.0 / denom_minus;
    derived["kappa"] = (1.0 + run.sc.kg * run.sc.t_end) / denom_minus;
    if (run.sc.f_family == "power_law")
        derived["z_weighted_bound"] = (8.0 + run.sc.kg * run.sc.t_end) / denom_minus *
                                      std::pow(run.sc.f_q, -2.0 / run.sc.f_q);
    m["derived_constants"] = derived;
    return m;
}

json validation_block(const Loaded& run) {
    const ValidationReport rep =
        validate_assumptions(run.f, run.g, 256, run.sc.seed ^ 0x5a5a5a5aULL, run.sc.x0.size(),
                             run.sc.d);
    json checks = json::array();
    json warnings = json::array();
    for (const auto& c : rep.checks) {
        checks.push_back({{"name", c.name},
                          {"pass", c.passed},
                          {"worst_violation", c.worst_violation},
                          {"witness", c.witness}});
        if (!c.passed)
            warnings.push_back("declared/measured assumption mismatch: " + c.name +
                               " violated by " + format17(c.worst_violation));
    }
    json out;
    out["assumption_checks"] = checks;
    out["warnings"] = warnings;
    return out;
}

void add_phases(json& m, const std::vector<Phase>& phases) {
    json p = json::object();
    for (const auto& ph : phases) p[ph.name] = ph.seconds;
    m["wall_time_seconds"] = p;
}

int cmd_simulate(const CommonArgs& args) {
    std::vector<Phase> phases;
    Loaded run = load(args, phases);
    if (!run.tc.bounded())
        throw config_error("simulate: terminal condition must be bounded (use the ladder "
                           "command for singular data)");
    const fs::path out = resolve_out(args, run.sc);

    json manifest = base_manifest(run, args);
    manifest["command"] = "simulate";
    manifest.update(validation_block(run));

    const auto t0 = std::chrono::steady_clock::now();
    BackwardSolution sol = [&] {
        if (run.sc.mode == "shift")
            return solve_shift_reduction(run.fwd, run.f, run.g, run.tc, run.grid, run.noise,
                                         run.sc.basis, run.opts);
        if (run.sc.mode == "picard") {
            auto [s, trace] = picard_solve(run.fwd, run.f, run.g, run.tc, run.grid, run.noise,
                                           run.sc.basis, make_picard_config(run.sc), run.opts);
            json tr;
            tr["alpha"] = trace.alpha;
            tr["sweeps"] = trace.sweeps;
            tr["weighted_gaps"] = trace.d;
            tr["non_contraction_warning"] = trace.non_contraction_warning;
            manifest["contraction_trace"] = tr;
            return std::move(s);
        }
        return solve_lsmc(run.fwd, run.f, run.g, run.tc, run.grid, run.noise, run.sc.basis,
                          run.opts);
    }();
    phases.push_back({"solve", std::chrono::duration<double>(
                                   std::chrono::steady_clock::now() - t0)
                                   .count()});

    if (args.format != "json") write_solution_csv(out / (run.sc.name + "_solution.csv"), sol,
                                                  run.grid);
    manifest["pooled_residual"] = sol.pooled_residual();
    add_phases(manifest, phases);
    write_json(out / (run.sc.name + "_manifest.json"), manifest);
    return kExitOk;
}

int cmd_ladder(const CommonArgs& args) {
    std::vector<Phase> phases;
    Loaded run = load(args, phases);
    if (run.sc.levels.empty())
        throw config_error("ladder: scenario has no ladder.levels");
    if (run.sc.f_family != "power_law")
        throw config_error("ladder: driver.f must be the power-law family");
    const fs::path out = resolve_out(args, run.sc);

    const auto t0 = std::chrono::steady_clock::now();
    const LadderResult lr =
        solve_singular_ladder(run.fwd, run.sc.f_q, run.g, run.tc, run.sc.levels, run.grid,
                              run.noise, run.sc.basis, run.sc.delta_schedule, run.opts);
    phases.push_back({"ladder", std::chrono::duration<double>(
                                    std::chrono::steady_clock::now() - t0)
                                    .count()});

    write_ladder_csv(out / (run.sc.name + "_ladder.csv"), lr, run.grid);

    const SingularEstimates est =
        estimate_z_moments(lr.top(), run.grid, run.sc.f_q, run.sc.kg, run.sc.eps);

    json manifest = base_manifest(run, args);
    manifest["command"] = "ladder";
    manifest.update(validation_block(run));
    json summary;
    summary["q"] = run.sc.f_q;
    summary["levels"] = lr.levels;
    summary["monotone_fraction"] = lr.monotone_fraction;
    summary["monotone_fraction_wide"] = lr.monotone_fraction_wide;
    summary["monotonicity_tol"] = lr.monotonicity_tol;
    summary["max_level_bound_excess"] = lr.max_level_bound_excess;
    summary["hard_bound_violations"] = lr.hard_bound_violations;
    summary["kappa"] = est.kappa;
    summary["z_weighted_moment"] = est.z_weighted_moment;
    summary["z_weighted_bound"] = est.z_weighted_bound;
    summary["z_bounds_pass"] = est.all_pass;
    json gaps = json::array();
    for (std::size_t d = 0; d < lr.delta_schedule.size(); ++d)
        gaps.push_back({{"delta", lr.delta_schedule[d]}, {"sup_gaps", lr.sup_gaps[d]}});
    summary["level_gaps"] = gaps;
    manifest["ladder_summary"] = summary;
    add_phases(manifest, phases);
    write_json(out / (run.sc.name + "_ladder_summary.json"), manifest);
    return kExitOk;
}

int cmd_field(const CommonArgs& args) {
    std::vector<Phase> phases;
    const auto t_load = std::chrono::steady_clock::now();
    Scenario sc = parse_scenario_file(args.scenario_path);
    if (args.has_seed_override) sc.seed = args.seed_override;
    if (!sc.has_field) throw config_error("field: scenario has no field section");
    TimeGrid grid = make_grid(sc);
    SdeCoefficients sde = make_sde(sc);
    GeneratorSpec f = make_generator(sc);
    NoiseCoefficientSpec g = make_noise_coefficient(sc);
    TerminalCondition tc = make_terminal(sc);
    if (!tc.bounded()) {
        if (sc.levels.empty())
            throw config_error("field: singular terminal needs ladder.levels for truncation");
        tc = truncate_terminal(tc, sc.levels.back());
    }
    phases.push_back({"setup", std::chrono::duration<double>(
                                   std::chrono::steady_clock::now() - t_load)
                                   .count()});

    const WeightFunction rho{sc.kappa};
    if (sc.box_models_rd && !rho.integrable_inverse(sc.x0.size()))
        throw config_error("field: non-integrable weight (kappa <= d) over a box standing in "
                           "for R^d");

    FieldBuildConfig fc;
    fc.w_budget = sc.w_budget;
    fc.basis = sc.basis;
    fc.solver = make_solver_options(sc, args.workers);

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<RandomField> fields;
    const std::size_t n_b = sc.has_trace ? sc.n_b : 1;
    for (std::size_t bi = 0; bi < n_b; ++bi)
        fields.push_back(build_field(sde, f, g, tc, grid, sc.box, sc.seed, bi, fc));
    RandomField& field = fields.front();
    field.represents_unbounded = sc.box_models_rd;
    phases.push_back({"field", std::chrono::duration<double>(
                                   std::chrono::steady_clock::now() - t0)
                                   .count()});

    fs::path out = args.out_dir.empty() ? fs::path(sc.out_dir) : fs::path(args.out_dir);
    fs::create_directories(out);
    write_field_csv(out / (sc.name + "_field.csv"), field);

    json manifest;
    manifest["version"] = "0.1.0";
    manifest["command"] = "field";
    manifest["scenario"] = sc.name;
    manifest["scenario_hash"] = sc.hash();
    manifest["b_seed"] = sc.seed;
    manifest["box"] = {sc.box.lo, sc.box.hi};
    manifest["n_x"] = sc.box.n;
    manifest["kappa"] = sc.kappa;
    manifest["extrapolation_warning"] = field.extrapolation_warning;

    const WeightedNormResult norm = weighted_norm(field, rho, grid.t_end() - 4.0 * grid.dt());
    manifest["weighted_norm"] = {{"value", norm.value},
                                 {"u_part", norm.u_part},
                                 {"grad_part", norm.grad_part},
                                 {"refinement_delta", norm.refinement_delta}};

    if (sc.has_trace) {
        double dist = std::numeric_limits<double>::infinity();
        if (tc.dist_to_singular_set) {
            // distance of the phi support to S, sampled densely
            dist = std::numeric_limits<double>::infinity();
            for (int k = 0; k <= 64; ++k) {
                const double x = sc.phi_lo + (sc.phi_hi - sc.phi_lo) * k / 64.0;
                dist = std::min(dist, tc.dist_to_singular_set(vec1(x)));
            }
        }
        const SpatialTestFunction phi = make_bump(sc.phi_lo, sc.phi_hi, dist);
        const TerminalTraceResult tr =
            terminal_trace(fields, phi, tc.h, sc.finite_trace,
                           sc.f_family == "power_law" ? sc.f_q : 0.0);
        write_trace_csv(out / (sc.name + "_trace.csv"), tr);
        manifest["trace_target"] = tr.target;
    }
    add_phases(manifest, phases);
    write_json(out / (sc.name + "_field_manifest.json"), manifest);
    return kExitOk;
}

int cmd_paths(const CommonArgs& args, std::size_t max_paths) {
    Scenario sc = parse_scenario_file(args.scenario_path);
    if (args.has_seed_override) sc.seed = args.seed_override;
    TimeGrid grid = make_grid(sc);
    DualBrownianPaths noise(grid, sc.d, sc.m, sc.n_paths, sc.seed, args.workers);
    fs::path out = args.out_dir.empty() ? fs::path(sc.out_dir) : fs::path(args.out_dir);
    fs::create_directories(out);
    write_paths_csv(out / (sc.name + "_paths.csv"), noise, grid, max_paths);
    return kExitOk;
}

int cmd_verify(const std::string& scenario_dir, const CommonArgs& args, bool skip_repro) {
    AcceptanceOptions opts;
    opts.scenario_dir = scenario_dir;
    opts.out_dir = args.out_dir.empty() ? "verify_out" : args.out_dir;
    opts.n_workers = args.workers;
    if (args.has_seed_override) opts.seed_override = args.seed_override;
    opts.skip_reproducibility = skip_repro;

    const std::vector<CriterionResult> results = run_acceptance(opts);
    bool all = true;
    for (const auto& r : results) {
        std::printf("%s  [%2d] %s — %s (%.1fs)\n", r.pass ? "PASS" : "FAIL", r.id,
                    r.name.c_str(), r.detail.c_str(), r.wall_seconds);
        all = all && r.pass;
    }
    return all ? kExitOk : kExitAcceptanceFailure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte-Carlo laboratory for backward doubly stochastic differential "
                 "equations with monotone drivers and singular terminal data"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string scenario_dir = "scenarios";
    std::size_t max_paths = 16;
    bool skip_repro = false;

    auto add_common = [&](CLI::App* cmd, bool needs_scenario) {
        if (needs_scenario)
            cmd->add_option("--scenario", args.scenario_path, "scenario JSON file")
                ->required();
        cmd->add_option("--out", args.out_dir, "output directory (default: scenario outputs.dir)");
        cmd->add_option("--seed-override", args.seed_override, "replace the scenario seed")
            ->each([&](const std::string&) { args.has_seed_override = true; });
        cmd->add_option("--workers", args.workers, "worker threads (results are identical for any count)");
        cmd->add_option("--format", args.format, "csv|json")
            ->check(CLI::IsMember({"csv", "json"}));
    };

    CLI::App* simulate = app.add_subcommand("simulate", "solve one bounded-terminal scenario");
    add_common(simulate, true);
    CLI::App* ladder = app.add_subcommand("ladder", "run the singular truncation ladder");
    add_common(ladder, true);
    CLI::App* field = app.add_subcommand("field", "reconstruct u(t,x) on a space-time lattice");
    add_common(field, true);
    CLI::App* paths = app.add_subcommand("paths", "export sampled noise paths as CSV");
    add_common(paths, true);
    paths->add_option("--max-paths", max_paths, "number of W paths to export");
    CLI::App* verify = app.add_subcommand("verify", "run the acceptance suite over a scenario pack");
    add_common(verify, false);
    verify->add_option("--scenarios", scenario_dir, "scenario pack directory");
    verify->add_flag("--skip-repro", skip_repro, "skip the reproducibility criterion");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(args);
        if (ladder->parsed()) return cmd_ladder(args);
        if (field->parsed()) return cmd_field(args);
        if (paths->parsed()) return cmd_paths(args, max_paths);
        if (verify->parsed()) return cmd_verify(scenario_dir, args, skip_repro);
    } catch (const config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const mode_error& e) {
        std::fprintf(stderr, "mode error: %s\n", e.what());
        return kExitConfigError;
    } catch (const shape_error& e) {
        std::fprintf(stderr, "shape error: %s\n", e.what());
        return kExitConfigError;
    } catch (const numerical_error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kExitNumericalError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumericalError;
    }
    return kExitOk;
}
