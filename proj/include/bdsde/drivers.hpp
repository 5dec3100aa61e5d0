#pragma once

#include <Eigen/Dense>

#include "bdsde/types.hpp"
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace bdsde {

/// Generator f(t, x, y, z) for scalar y and z in R^d.
struct GeneratorSpec {
    enum class Kind { lipschitz, monotone, power_law };

    std::function<double(double t, const Vec& x, double y, const Vec& z)> f;
    Kind kind = Kind::monotone;
    double q = 0.0;        // power-law exponent, f(y) = -y |y|^q
    double mu = 0.0;       // monotonicity constant (A1)
    double kf = 0.0;       // z-Lipschitz constant (A2)
    double cf = 0.0;       // growth constant (A3)
    double growth_p = 2.0; // growth exponent p > 1
};

GeneratorSpec make_power_law_generator(double q);
GeneratorSpec make_zero_generator();

/// Noise coefficient g(t, x, y, z) with values in R^m.
struct NoiseCoefficientSpec {
    std::function<Vec(double t, const Vec& x, double y,
                                  const Vec& z)>
        g;
    std::size_t m = 1;
    double kg = 0.0;  // y-Lipschitz constant (A4)
    double eps = 0.0; // z-Lipschitz fraction in (0,1); 0 allowed when z_free
    bool z_free = false;
    bool vanishing_at_zero = false; // g(t,x,y,0) = 0
    bool x_lipschitz = false;       // (A6), needed by the Malliavin diagnostic
};

NoiseCoefficientSpec make_zero_noise_coefficient(std::size_t m = 1);
NoiseCoefficientSpec make_constant_noise_coefficient(double value, std::size_t m = 1);

/// Terminal condition xi = h(X_T) with h into [0, +inf]; Singular means h may
/// take the value +inf on the declared set S.
struct TerminalCondition {
    enum class Kind { bounded, singular };

    Kind kind = Kind::bounded;
    std::function<double(const Vec&)> h;
    std::function<bool(const Vec&)> in_singular_set; // optional
    std::function<double(const Vec&)> dist_to_singular_set; // optional
    double sup_h = std::numeric_limits<double>::infinity(); // known bound when bounded
    bool lipschitz_on_sublevels = false; // (H3)

    bool bounded() const { return kind == Kind::bounded; }
};

/// xi ^ n: Bounded(h and n), pointwise min.
TerminalCondition truncate_terminal(const TerminalCondition& tc, double n);

/// (xi ^ n) v (1/m): truncation with the 1/m floor.
TerminalCondition floor_terminal(const TerminalCondition& tc, double n, double m);

struct AssumptionCheck {
    std::string name;
    bool passed = true;
    double worst_violation = 0.0; // how far past the declared bound, 0 if none
    std::string witness;          // worst violating tuple
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;
    bool all_passed() const;
    const AssumptionCheck* find(const std::string& name) const;
};

/// Probe-based spot check of (A1)-(A4), the vanishing-at-zero requirement and
/// (A6) when declared. Probes are standard normal in every coordinate plus the
/// boundary cases y = y' and z = z'. Probabilistic check only, never a proof.
ValidationReport validate_assumptions(const GeneratorSpec& f, const NoiseCoefficientSpec& g,
                                      std::size_t probes, std::uint64_t seed,
                                      std::size_t dim_x = 1, std::size_t dim_z = 1);

} // namespace bdsde
