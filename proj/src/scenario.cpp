#include "bdsde/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "bdsde/errors.hpp"
#include "bdsde/expr.hpp"
#include "bdsde/numerics.hpp"
#include "bdsde/report.hpp"

namespace bdsde {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& where,
                    const std::set<std::string>& allowed) {
    if (!j.is_object()) throw config_error("scenario: " + where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw config_error("scenario: unknown key '" + where + "." + it.key() + "'");
}

template <typename T>
T get_req(const json& j, const std::string& where, const std::string& key) {
    if (!j.contains(key))
        throw config_error("scenario: missing field '" + where + "." + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw config_error("scenario: bad value for '" + where + "." + key + "'");
    }
}

template <typename T>
T get_opt(const json& j, const std::string& where, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw config_error("scenario: bad value for '" + where + "." + key + "'");
    }
}

} // namespace

std::uint64_t Scenario::hash() const { return fnv1a64(canonical); }

Scenario parse_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("scenario: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw config_error("scenario: JSON parse error in " + path.string() + ": " + e.what());
    }
    return parse_scenario_json(j);
}

Scenario parse_scenario_json(const nlohmann::json& j) {
    Scenario sc;
    reject_unknown(j, "<root>",
                   {"name", "grid", "noise", "forward", "driver", "terminal", "solver",
                    "ladder", "field", "outputs"});
    sc.name = get_req<std::string>(j, "<root>", "name");

    {
        const json& g = j.contains("grid") ? j.at("grid") : json::object();
        reject_unknown(g, "grid", {"t_start", "t_end", "n_steps"});
        sc.t_start = get_opt<double>(g, "grid", "t_start", 0.0);
        sc.t_end = get_req<double>(g, "grid", "t_end");
        sc.n_steps = get_req<std::size_t>(g, "grid", "n_steps");
    }
    {
        const json& n = j.contains("noise") ? j.at("noise") : json::object();
        reject_unknown(n, "noise", {"d", "m", "n_paths", "seed", "n_b"});
        sc.d = get_opt<std::size_t>(n, "noise", "d", 1);
        sc.m = get_opt<std::size_t>(n, "noise", "m", 1);
        sc.n_paths = get_req<std::size_t>(n, "noise", "n_paths");
        sc.seed = get_req<std::uint64_t>(n, "noise", "seed");
        sc.n_b = get_opt<std::size_t>(n, "noise", "n_b", 1);
    }
    {
        const json& f = j.contains("forward") ? j.at("forward") : json::object();
        reject_unknown(f, "forward",
                       {"family", "x0", "b", "sigma", "b_expr", "sigma_expr", "lipschitz_k",
                        "bounded", "elliptic_lambda"});
        sc.forward_family = get_opt<std::string>(f, "forward", "family", "constant");
        sc.x0 = get_opt<std::vector<double>>(f, "forward", "x0", {0.0});
        if (sc.forward_family == "constant") {
            sc.b_const = get_opt<std::vector<double>>(f, "forward", "b",
                                                      std::vector<double>(sc.x0.size(), 0.0));
            sc.sigma_const = get_opt<std::vector<std::vector<double>>>(
                f, "forward", "sigma",
                std::vector<std::vector<double>>(sc.x0.size(),
                                                 std::vector<double>(sc.d, 0.0)));
        } else if (sc.forward_family == "expr") {
            sc.b_expr = get_req<std::string>(f, "forward", "b_expr");
            sc.sigma_expr = get_req<std::string>(f, "forward", "sigma_expr");
        } else {
            throw config_error("scenario: forward.family must be constant or expr");
        }
        sc.lipschitz_k = get_opt<double>(f, "forward", "lipschitz_k", 0.0);
        sc.flag_bounded = get_opt<bool>(f, "forward", "bounded", false);
        sc.elliptic_lambda = get_opt<double>(f, "forward", "elliptic_lambda", 0.0);
    }
    {
        const json& d = j.contains("driver") ? j.at("driver") : json::object();
        reject_unknown(d, "driver", {"f", "g", "constants"});
        const json& ff = d.contains("f") ? d.at("f") : json::object();
        reject_unknown(ff, "driver.f", {"family", "q", "ay", "az", "c", "expr"});
        sc.f_family = get_opt<std::string>(ff, "driver.f", "family", "zero");
        if (sc.f_family == "power_law") sc.f_q = get_req<double>(ff, "driver.f", "q");
        if (sc.f_family == "linear") {
            sc.f_ay = get_opt<double>(ff, "driver.f", "ay", 0.0);
            sc.f_az = get_opt<double>(ff, "driver.f", "az", 0.0);
            sc.f_c = get_opt<double>(ff, "driver.f", "c", 0.0);
        }
        if (sc.f_family == "expr") sc.f_expr = get_req<std::string>(ff, "driver.f", "expr");

        const json& gg = d.contains("g") ? d.at("g") : json::object();
        reject_unknown(gg, "driver.g",
                       {"family", "value", "cy", "cz", "expr", "z_free", "vanishing_at_zero",
                        "x_lipschitz"});
        sc.g_family = get_opt<std::string>(gg, "driver.g", "family", "zero");
        if (sc.g_family == "constant") sc.g_value = get_req<double>(gg, "driver.g", "value");
        if (sc.g_family == "linear") {
            sc.g_cy = get_opt<double>(gg, "driver.g", "cy", 0.0);
            sc.g_cz = get_opt<double>(gg, "driver.g", "cz", 0.0);
        }
        if (sc.g_family == "expr_t") sc.g_expr = get_req<std::string>(gg, "driver.g", "expr");
        sc.z_free = get_opt<bool>(gg, "driver.g", "z_free",
                                  sc.g_family == "zero" || sc.g_family == "constant" ||
                                      sc.g_family == "expr_t");
        sc.vanishing_at_zero = get_opt<bool>(gg, "driver.g", "vanishing_at_zero",
                                             sc.g_family == "zero");
        sc.x_lipschitz = get_opt<bool>(gg, "driver.g", "x_lipschitz", false);

        const json& cc = d.contains("constants") ? d.at("constants") : json::object();
        reject_unknown(cc, "driver.constants", {"mu", "kf", "cf", "p", "kg", "eps"});
        sc.mu = get_req<double>(cc, "driver.constants", "mu");
        sc.kf = get_req<double>(cc, "driver.constants", "kf");
        sc.cf = get_req<double>(cc, "driver.constants", "cf");
        sc.growth_p = get_req<double>(cc, "driver.constants", "p");
        sc.kg = get_req<double>(cc, "driver.constants", "kg");
        sc.eps = get_req<double>(cc, "driver.constants", "eps");
        if (sc.eps < 0.0 || sc.eps >= 1.0)
            throw config_error("scenario: driver.constants.eps must lie in [0, 1)");
    }
    {
        const json& t = j.contains("terminal") ? j.at("terminal") : json::object();
        reject_unknown(t, "terminal", {"kind", "h", "h3_lipschitz_sublevels"});
        const std::string kind = get_opt<std::string>(t, "terminal", "kind", "bounded");
        if (kind != "bounded" && kind != "singular")
            throw config_error("scenario: terminal.kind must be bounded or singular");
        sc.singular = kind == "singular";
        const json& h = t.contains("h") ? t.at("h") : json::object();
        reject_unknown(h, "terminal.h", {"family", "value", "width", "expr"});
        sc.h_family = get_opt<std::string>(h, "terminal.h", "family", "constant");
        if (sc.h_family == "constant") sc.h_value = get_req<double>(h, "terminal.h", "value");
        if (sc.h_family == "gaussian" || sc.h_family == "cap_linear")
            sc.h_width = get_opt<double>(h, "terminal.h", "width", 1.0);
        if (sc.h_family == "expr") sc.h_expr = get_req<std::string>(h, "terminal.h", "expr");
        sc.h3_lipschitz_sublevels = get_opt<bool>(t, "terminal", "h3_lipschitz_sublevels",
                                                  false);
    }
    {
        const json& s = j.contains("solver") ? j.at("solver") : json::object();
        reject_unknown(s, "solver", {"mode", "basis", "root_tol", "picard"});
        sc.mode = get_opt<std::string>(s, "solver", "mode", "lsmc");
        if (sc.mode != "lsmc" && sc.mode != "shift" && sc.mode != "picard")
            throw config_error("scenario: solver.mode must be lsmc, shift or picard");
        sc.root_tol = get_opt<double>(s, "solver", "root_tol", 1e-12);
        const json& b = s.contains("basis") ? s.at("basis") : json::object();
        reject_unknown(b, "solver.basis", {"family", "degree", "bins", "domain", "ridge"});
        const std::string fam = get_opt<std::string>(b, "solver.basis", "family", "polynomial");
        if (fam == "polynomial") sc.basis.family = RegressionBasis::Family::polynomial;
        else if (fam == "piecewise_constant")
            sc.basis.family = RegressionBasis::Family::piecewise_constant;
        else if (fam == "local_linear") sc.basis.family = RegressionBasis::Family::local_linear;
        else throw config_error("scenario: unknown basis family '" + fam + "'");
        sc.basis.degree = get_opt<std::size_t>(b, "solver.basis", "degree", 1);
        sc.basis.bins = get_opt<std::size_t>(b, "solver.basis", "bins", 8);
        if (b.contains("domain")) {
            const auto dom = get_req<std::vector<double>>(b, "solver.basis", "domain");
            if (dom.size() != 2 || !(dom[1] > dom[0]))
                throw config_error("scenario: solver.basis.domain must be [lo, hi]");
            sc.basis.domain_lo = dom[0];
            sc.basis.domain_hi = dom[1];
            sc.basis.domain_from_data = false;
        } else {
            sc.basis.domain_from_data = true;
        }
        // spec default: 1e-8 trace(Gram)/basis-size, resolved per step; a
        // scenario may pin any value including 0 for the exact oracles
        sc.basis.ridge_lambda =
            get_opt<double>(b, "solver.basis", "ridge", RegressionBasis::kAutoRidge);
        const json& p = s.contains("picard") ? s.at("picard") : json::object();
        reject_unknown(p, "solver.picard", {"max_sweeps", "alpha", "stop_tol"});
        sc.picard_max_sweeps = get_opt<std::size_t>(p, "solver.picard", "max_sweeps", 12);
        if (p.contains("alpha")) sc.picard_alpha = get_req<double>(p, "solver.picard", "alpha");
        sc.picard_stop_tol = get_opt<double>(p, "solver.picard", "stop_tol", 1e-10);
    }
    {
        const json& l = j.contains("ladder") ? j.at("ladder") : json::object();
        reject_unknown(l, "ladder", {"levels", "floors", "delta_schedule"});
        sc.levels = get_opt<std::vector<double>>(l, "ladder", "levels", {});
        sc.floors = get_opt<std::vector<double>>(l, "ladder", "floors", {});
        sc.delta_schedule = get_opt<std::vector<double>>(l, "ladder", "delta_schedule", {});
    }
    if (j.contains("field")) {
        const json& f = j.at("field");
        reject_unknown(f, "field",
                       {"box", "n_x", "kappa", "w_budget", "box_models_rd", "trace"});
        sc.has_field = true;
        const auto box = get_req<std::vector<double>>(f, "field", "box");
        if (box.size() != 2 || !(box[1] > box[0]))
            throw config_error("scenario: field.box must be [lo, hi]");
        sc.box.lo = box[0];
        sc.box.hi = box[1];
        sc.box.n = get_req<std::size_t>(f, "field", "n_x");
        if (sc.box.n < 2) throw config_error("scenario: field.n_x must be >= 2");
        sc.kappa = get_opt<double>(f, "field", "kappa", 2.0);
        sc.w_budget = get_opt<std::size_t>(f, "field", "w_budget", 4000);
        sc.box_models_rd = get_opt<bool>(f, "field", "box_models_rd", false);
        if (f.contains("trace")) {
            const json& tr = f.at("trace");
            reject_unknown(tr, "field.trace", {"phi", "finite"});
            const auto phi = get_req<std::vector<double>>(tr, "field.trace", "phi");
            if (phi.size() != 2 || !(phi[1] > phi[0]))
                throw config_error("scenario: field.trace.phi must be [lo, hi]");
            sc.has_trace = true;
            sc.phi_lo = phi[0];
            sc.phi_hi = phi[1];
            sc.finite_trace = get_opt<bool>(tr, "field.trace", "finite", true);
        }
    }
    {
        const json& o = j.contains("outputs") ? j.at("outputs") : json::object();
        reject_unknown(o, "outputs", {"dir"});
        sc.out_dir = get_opt<std::string>(o, "outputs", "dir", "out");
    }

    sc.canonical = j.dump();
    return sc;
}

TimeGrid make_grid(const Scenario& sc) { return TimeGrid(sc.t_start, sc.t_end, sc.n_steps); }

SdeCoefficients make_sde(const Scenario& sc) {
    if (sc.forward_family == "constant") {
        Vec b(static_cast<Eigen::Index>(sc.x0.size()));
        for (std::size_t i = 0; i < sc.b_const.size(); ++i)
            b(static_cast<Eigen::Index>(i)) = sc.b_const[i];
        if (sc.sigma_const.size() != sc.x0.size())
            throw config_error("scenario: forward.sigma rows must match x0 dimension");
        Mat s(static_cast<Eigen::Index>(sc.sigma_const.size()),
              static_cast<Eigen::Index>(sc.d));
        for (std::size_t r = 0; r < sc.sigma_const.size(); ++r) {
            if (sc.sigma_const[r].size() != sc.d)
                throw config_error("scenario: forward.sigma columns must match noise.d");
            for (std::size_t c = 0; c < sc.d; ++c)
                s(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    sc.sigma_const[r][c];
        }
        SdeCoefficients out = make_constant_sde(b, s);
        out.lipschitz_K = sc.lipschitz_k;
        out.bounded = true;
        return out;
    }
    // expr family: d = 1 only
    if (sc.x0.size() != 1 || sc.d != 1)
        throw config_error("scenario: forward.family expr supports d = 1 only");
    const Expr be = Expr::parse(sc.b_expr);
    const Expr se = Expr::parse(sc.sigma_expr);
    SdeCoefficients out;
    out.dim_x = 1;
    out.dim_w = 1;
    out.drift = [be](double t, const Vec& x) { return vec1(be.eval(t, x(0), 0.0, 0.0)); };
    out.diffusion = [se](double t, const Vec& x) {
        Mat s(1, 1);
        s(0, 0) = se.eval(t, x(0), 0.0, 0.0);
        return s;
    };
    out.lipschitz_K = sc.lipschitz_k;
    out.bounded = sc.flag_bounded;
    out.elliptic_lambda = sc.elliptic_lambda;
    out.constant_coefficients = false;
    return out;
}

GeneratorSpec make_generator(const Scenario& sc) {
    GeneratorSpec f;
    if (sc.f_family == "zero") {
        f = make_zero_generator();
    } else if (sc.f_family == "power_law") {
        f = make_power_law_generator(sc.f_q);
    } else if (sc.f_family == "linear") {
        const double ay = sc.f_ay, az = sc.f_az, c = sc.f_c;
        f.kind = GeneratorSpec::Kind::lipschitz;
        f.f = [ay, az, c](double, const Vec&, double y, const Vec& z) {
            return ay * y + az * z(0) + c;
        };
    } else if (sc.f_family == "expr") {
        const Expr e = Expr::parse(sc.f_expr);
        f.kind = GeneratorSpec::Kind::monotone;
        f.f = [e](double t, const Vec& x, double y, const Vec& z) {
            return e.eval(t, x(0), y, z(0));
        };
    } else {
        throw config_error("scenario: unknown f family '" + sc.f_family + "'");
    }
    f.mu = sc.mu;
    f.kf = sc.kf;
    f.cf = sc.cf;
    f.growth_p = sc.growth_p;
    return f;
}

NoiseCoefficientSpec make_noise_coefficient(const Scenario& sc) {
    NoiseCoefficientSpec g;
    if (sc.g_family == "zero") {
        g = make_zero_noise_coefficient(sc.m);
    } else if (sc.g_family == "constant") {
        g = make_constant_noise_coefficient(sc.g_value, sc.m);
    } else if (sc.g_family == "linear") {
        const double cy = sc.g_cy, cz = sc.g_cz;
        const std::size_t m = sc.m;
        g.m = m;
        g.g = [cy, cz, m](double, const Vec&, double y, const Vec& z) {
            return Vec::Constant(static_cast<Eigen::Index>(m), cy * y + cz * z(0)).eval();
        };
    } else if (sc.g_family == "expr_t") {
        const Expr e = Expr::parse(sc.g_expr);
        const std::size_t m = sc.m;
        g.m = m;
        g.g = [e, m](double t, const Vec&, double, const Vec&) {
            return Vec::Constant(static_cast<Eigen::Index>(m), e.eval(t, 0.0, 0.0, 0.0)).eval();
        };
    } else {
        throw config_error("scenario: unknown g family '" + sc.g_family + "'");
    }
    g.kg = sc.kg;
    g.eps = sc.eps;
    g.z_free = sc.z_free;
    g.vanishing_at_zero = sc.vanishing_at_zero;
    g.x_lipschitz = sc.x_lipschitz;
    return g;
}

TerminalCondition make_terminal(const Scenario& sc) {
    TerminalCondition tc;
    tc.kind = sc.singular ? TerminalCondition::Kind::singular
                          : TerminalCondition::Kind::bounded;
    tc.lipschitz_on_sublevels = sc.h3_lipschitz_sublevels;
    if (sc.h_family == "constant") {
        const double v = sc.h_value;
        tc.h = [v](const Vec&) { return v; };
        tc.sup_h = v;
    } else if (sc.h_family == "identity") {
        tc.h = [](const Vec& x) { return x(0); };
    } else if (sc.h_family == "abs") {
        tc.h = [](const Vec& x) { return std::abs(x(0)); };
    } else if (sc.h_family == "inv_abs") {
        tc.h = [](const Vec& x) {
            const double a = std::abs(x(0));
            return a == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / a;
        };
        tc.in_singular_set = [](const Vec& x) { return x(0) == 0.0; };
        tc.dist_to_singular_set = [](const Vec& x) { return std::abs(x(0)); };
    } else if (sc.h_family == "cap_linear") {
        const double w = sc.h_width;
        tc.h = [w](const Vec& x) { return std::max(0.0, 1.0 - std::abs(x(0)) / w); };
        tc.sup_h = 1.0;
    } else if (sc.h_family == "gaussian") {
        const double w = sc.h_width;
        tc.h = [w](const Vec& x) { return std::exp(-0.5 * sqr(x(0) / w)); };
        tc.sup_h = 1.0;
    } else if (sc.h_family == "plus_inf") {
        tc.h = [](const Vec&) { return std::numeric_limits<double>::infinity(); };
        tc.in_singular_set = [](const Vec&) { return true; };
        tc.dist_to_singular_set = [](const Vec&) { return 0.0; };
    } else if (sc.h_family == "expr") {
        const Expr e = Expr::parse(sc.h_expr);
        tc.h = [e](const Vec& x) { return e.eval(0.0, x(0), 0.0, 0.0); };
    } else {
        throw config_error("scenario: unknown h family '" + sc.h_family + "'");
    }
    if (sc.singular && !tc.in_singular_set)
        throw config_error("scenario: singular terminal needs a singular set (built-in family)");
    return tc;
}

SolverOptions make_solver_options(const Scenario& sc, std::size_t n_workers) {
    SolverOptions o;
    o.root_tol = sc.root_tol;
    o.n_workers = n_workers;
    return o;
}

PicardConfig make_picard_config(const Scenario& sc) {
    PicardConfig c;
    c.max_sweeps = sc.picard_max_sweeps;
    c.alpha = sc.picard_alpha;
    c.stop_tol = sc.picard_stop_tol;
    return c;
}

} // namespace bdsde
