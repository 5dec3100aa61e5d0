#include <doctest.h>

#include <string>

#include "bdsde/errors.hpp"
#include "bdsde/scenario.hpp"

#include <json.hpp>

using namespace bdsde;
using nlohmann::json;

namespace {

json minimal() {
    return json::parse(R"({
      "name": "t",
      "grid": {"t_end": 1.0, "n_steps": 8},
      "noise": {"n_paths": 16, "seed": 1},
      "forward": {"family": "constant", "x0": [0.0], "b": [0.0], "sigma": [[1.0]]},
      "driver": {
        "f": {"family": "zero"},
        "g": {"family": "zero"},
        "constants": {"mu": 0.0, "kf": 0.0, "cf": 0.0, "p": 2.0, "kg": 0.0, "eps": 0.0}
      },
      "terminal": {"kind": "bounded", "h": {"family": "constant", "value": 0.0}},
      "solver": {"mode": "lsmc", "basis": {"family": "polynomial", "degree": 0}}
    })");
}

bool throws_mentioning(const json& j, const std::string& needle) {
    try {
        parse_scenario_json(j);
    } catch (const config_error& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
}

} // namespace

TEST_CASE("a complete minimal scenario parses and builds") {
    const Scenario sc = parse_scenario_json(minimal());
    CHECK(sc.name == "t");
    CHECK(sc.n_steps == 8);
    CHECK_NOTHROW(make_grid(sc));
    CHECK_NOTHROW(make_sde(sc));
    CHECK_NOTHROW(make_generator(sc));
    CHECK_NOTHROW(make_noise_coefficient(sc));
    CHECK_NOTHROW(make_terminal(sc));
    CHECK(sc.hash() == parse_scenario_json(minimal()).hash()); // canonical hash is stable
}

TEST_CASE("unknown keys are rejected with the offending path") {
    json j = minimal();
    j["noise"]["bogus"] = 1;
    CHECK(throws_mentioning(j, "noise.bogus"));

    j = minimal();
    j["extra_section"] = json::object();
    CHECK(throws_mentioning(j, "extra_section"));

    j = minimal();
    j["solver"]["basis"]["shrink"] = 0.1;
    CHECK(throws_mentioning(j, "solver.basis.shrink"));
}

TEST_CASE("missing constants are named (every bound constant must be explicit)") {
    json j = minimal();
    j["driver"]["constants"].erase("eps");
    CHECK(throws_mentioning(j, "driver.constants.eps"));

    j = minimal();
    j["driver"]["constants"].erase("kg");
    CHECK(throws_mentioning(j, "driver.constants.kg"));

    j = minimal();
    j["noise"].erase("seed");
    CHECK(throws_mentioning(j, "noise.seed"));

    j = minimal();
    j["driver"]["f"] = {{"family", "power_law"}}; // q missing
    CHECK(throws_mentioning(j, "driver.f.q"));
}

TEST_CASE("invalid values are rejected") {
    json j = minimal();
    j["driver"]["constants"]["eps"] = 1.0;
    CHECK_THROWS_AS(parse_scenario_json(j), config_error);

    j = minimal();
    j["solver"]["mode"] = "magic";
    CHECK_THROWS_AS(parse_scenario_json(j), config_error);

    j = minimal();
    j["solver"]["basis"]["domain"] = {2.0, 1.0};
    CHECK_THROWS_AS(parse_scenario_json(j), config_error);

    j = minimal();
    j["terminal"]["kind"] = "singular";
    j["terminal"]["h"] = {{"family", "identity"}}; // no singular set available
    CHECK_THROWS_AS(make_terminal(parse_scenario_json(j)), config_error);
}

TEST_CASE("driver families construct the documented functions") {
    json j = minimal();
    j["driver"]["f"] = {{"family", "expr"}, {"expr", "-y*abs(y)^2 + 0*x"}};
    j["driver"]["g"] = {{"family", "expr_t"}, {"expr", "t*t"}};
    const Scenario sc = parse_scenario_json(j);
    const GeneratorSpec f = make_generator(sc);
    CHECK(f.f(0.0, Vec::Zero(1), 2.0, Vec::Zero(1)) == doctest::Approx(-8.0));
    const NoiseCoefficientSpec g = make_noise_coefficient(sc);
    CHECK(g.g(0.5, Vec::Zero(1), 9.0, Vec::Zero(1))(0) == doctest::Approx(0.25));

    j = minimal();
    j["terminal"]["h"] = {{"family", "inv_abs"}};
    j["terminal"]["kind"] = "singular";
    const Scenario sing = parse_scenario_json(j);
    const TerminalCondition tc = make_terminal(sing);
    CHECK(std::isinf(tc.h(Vec::Zero(1))));
    CHECK(tc.h(vec1(0.5)) == doctest::Approx(2.0));
    CHECK(tc.in_singular_set(Vec::Zero(1)));
    CHECK(tc.dist_to_singular_set(vec1(-0.3)) == doctest::Approx(0.3));
}

TEST_CASE("field and ladder sections parse") {
    json j = minimal();
    j["ladder"] = {{"levels", {1.0, 2.0, 4.0}}, {"floors", {2.0, 4.0}}};
    j["field"] = {{"box", {-1.0, 1.0}},
                  {"n_x", 5},
                  {"kappa", 2.0},
                  {"w_budget", 64},
                  {"trace", {{"phi", {-0.5, 0.5}}, {"finite", true}}}};
    const Scenario sc = parse_scenario_json(j);
    CHECK(sc.levels.size() == 3);
    CHECK(sc.floors.size() == 2);
    CHECK(sc.has_field);
    CHECK(sc.box.n == 5);
    CHECK(sc.has_trace);
    CHECK(sc.finite_trace);
}
