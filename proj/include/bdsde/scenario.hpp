#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bdsde/drivers.hpp"
#include "bdsde/field.hpp"
#include "bdsde/sde.hpp"
#include "bdsde/solver.hpp"

#include <json.hpp>

namespace bdsde {

/// Declarative run description, parsed strictly from JSON: unknown keys are
/// rejected, and every constant that feeds a bound formula must be spelled
/// out. The grammar is documented in the README.
struct Scenario {
    std::string name;

    // grid
    double t_start = 0.0;
    double t_end = 1.0;
    std::size_t n_steps = 256;

    // noise
    std::size_t d = 1;
    std::size_t m = 1;
    std::size_t n_paths = 20000;
    std::uint64_t seed = 1;
    std::size_t n_b = 1; // B realizations for trace averaging

    // forward
    std::string forward_family = "constant"; // constant | expr
    std::vector<double> x0{0.0};
    std::vector<double> b_const{0.0};
    std::vector<std::vector<double>> sigma_const{{1.0}};
    std::string b_expr, sigma_expr;
    double lipschitz_k = 0.0;
    bool flag_bounded = false;
    double elliptic_lambda = 0.0;

    // driver f
    std::string f_family = "zero"; // zero | power_law | linear | expr
    double f_q = 1.0;
    double f_ay = 0.0, f_az = 0.0, f_c = 0.0;
    std::string f_expr;
    double mu = 0.0, kf = 0.0, cf = 0.0, growth_p = 2.0;

    // driver g
    std::string g_family = "zero"; // zero | constant | linear | expr_t
    double g_value = 0.0;
    double g_cy = 0.0, g_cz = 0.0;
    std::string g_expr;
    double kg = 0.0, eps = 0.0;
    bool z_free = false, vanishing_at_zero = false, x_lipschitz = false;

    // terminal
    std::string h_family = "constant"; // constant | identity | abs | inv_abs | cap_linear |
                                       // gaussian | plus_inf | expr
    double h_value = 0.0;
    double h_width = 1.0;
    std::string h_expr;
    bool singular = false;
    bool h3_lipschitz_sublevels = false;

    // solver
    std::string mode = "lsmc"; // lsmc | shift | picard
    RegressionBasis basis;
    double root_tol = 1e-12;
    std::size_t picard_max_sweeps = 12;
    std::optional<double> picard_alpha;
    double picard_stop_tol = 1e-10;

    // ladder
    std::vector<double> levels;
    std::vector<double> floors;
    std::vector<double> delta_schedule;

    // field
    bool has_field = false;
    SpatialGrid box;
    double kappa = 2.0;
    std::size_t w_budget = 4000;
    bool box_models_rd = false;
    bool has_trace = false;
    double phi_lo = 0.0, phi_hi = 1.0;
    bool finite_trace = true;

    // outputs
    std::string out_dir = "out";

    std::string canonical; // canonical JSON dump, hashed into the manifest

    std::uint64_t hash() const;
};

Scenario parse_scenario_file(const std::filesystem::path& path);
Scenario parse_scenario_json(const nlohmann::json& j);

/// Object builders; each validates the parts of the scenario it consumes.
TimeGrid make_grid(const Scenario& sc);
SdeCoefficients make_sde(const Scenario& sc);
GeneratorSpec make_generator(const Scenario& sc);
NoiseCoefficientSpec make_noise_coefficient(const Scenario& sc);
TerminalCondition make_terminal(const Scenario& sc);
SolverOptions make_solver_options(const Scenario& sc, std::size_t n_workers);
PicardConfig make_picard_config(const Scenario& sc);

} // namespace bdsde
