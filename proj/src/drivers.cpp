#include "bdsde/drivers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bdsde/errors.hpp"
#include "bdsde/numerics.hpp"
#include "bdsde/rng.hpp"

namespace bdsde {

GeneratorSpec make_power_law_generator(double q) {
    if (!(q > 0)) throw config_error("power-law generator: q must be > 0");
    GeneratorSpec s;
    s.kind = GeneratorSpec::Kind::power_law;
    s.q = q;
    s.mu = 0.0;
    s.kf = 0.0;
    s.cf = 1.0;
    s.growth_p = q + 1.0;
    s.f = [q](double, const Vec&, double y, const Vec&) {
        return -y * std::pow(std::abs(y), q);
    };
    return s;
}

GeneratorSpec make_zero_generator() {
    GeneratorSpec s;
    s.kind = GeneratorSpec::Kind::lipschitz;
    s.f = [](double, const Vec&, double, const Vec&) { return 0.0; };
    s.mu = 0.0;
    s.kf = 0.0;
    s.cf = 0.0;
    return s;
}

NoiseCoefficientSpec make_zero_noise_coefficient(std::size_t m) {
    NoiseCoefficientSpec s;
    s.m = m;
    s.kg = 0.0;
    s.eps = 0.0;
    s.z_free = true;
    s.vanishing_at_zero = true;
    s.g = [m](double, const Vec&, double, const Vec&) {
        return Vec::Zero(static_cast<Eigen::Index>(m)).eval();
    };
    return s;
}

NoiseCoefficientSpec make_constant_noise_coefficient(double value, std::size_t m) {
    NoiseCoefficientSpec s;
    s.m = m;
    s.kg = 0.0;
    s.eps = 0.0;
    s.z_free = true;
    s.vanishing_at_zero = (value == 0.0);
    s.g = [value, m](double, const Vec&, double, const Vec&) {
        return Vec::Constant(static_cast<Eigen::Index>(m), value).eval();
    };
    return s;
}

TerminalCondition truncate_terminal(const TerminalCondition& tc, double n) {
    if (!(n > 0)) throw config_error("truncate_terminal: level must be > 0");
    TerminalCondition out = tc;
    out.kind = TerminalCondition::Kind::bounded;
    auto h = tc.h;
    out.h = [h, n](const Vec& x) { return std::min(h(x), n); };
    out.sup_h = std::min(tc.sup_h, n);
    return out;
}

TerminalCondition floor_terminal(const TerminalCondition& tc, double n, double m) {
    if (!(n > 0) || !(m > 0)) throw config_error("floor_terminal: levels must be > 0");
    TerminalCondition out = truncate_terminal(tc, n);
    auto h = out.h;
    const double floor_v = 1.0 / m;
    out.h = [h, floor_v](const Vec& x) { return std::max(h(x), floor_v); };
    return out;
}

bool ValidationReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const AssumptionCheck& c) { return c.passed; });
}

const AssumptionCheck* ValidationReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

namespace {

std::string tuple_str(double t, const Vec& x, double y, double yp,
                      const Vec& z, const Vec& zp) {
    std::ostringstream os;
    os << "t=" << t << " x=" << x.transpose() << " y=" << y << " y'=" << yp
       << " z=" << z.transpose() << " z'=" << zp.transpose();
    return os.str();
}

void record(AssumptionCheck& chk, double violation, const std::string& witness) {
    if (violation > chk.worst_violation) {
        chk.worst_violation = violation;
        chk.witness = witness;
        chk.passed = false;
    }
}

} // namespace

ValidationReport validate_assumptions(const GeneratorSpec& f, const NoiseCoefficientSpec& g,
                                      std::size_t probes, std::uint64_t seed,
                                      std::size_t dim_x, std::size_t dim_z) {
    if (probes == 0) throw config_error("validate_assumptions: probes must be >= 1");

    AssumptionCheck a1{"A1-monotone"};
    AssumptionCheck a2{"A2-z-lipschitz"};
    AssumptionCheck a3{"A3-growth"};
    AssumptionCheck a4{"A4-g-lipschitz"};
    AssumptionCheck van{"g-vanishing-at-zero"};
    AssumptionCheck a6{"A6-g-x-lipschitz"};

    SplitStream rs(seed, SplitStream::Kind::probe, 1);
    // relative slack absorbs rounding in the probe arithmetic
    const double slack = 1e-9;

    auto check_finite = [](double v, const std::string& where, const std::string& inputs) {
        if (!std::isfinite(v))
            throw numerical_error("validate_assumptions: non-finite " + where + " at " + inputs);
    };

    for (std::size_t i = 0; i < probes; ++i) {
        const double t = rs.next_uniform();
        Vec x(static_cast<Eigen::Index>(dim_x));
        for (Eigen::Index c = 0; c < x.size(); ++c) x(c) = rs.next_normal();
        double y = rs.next_normal();
        double yp = rs.next_normal();
        Vec z(static_cast<Eigen::Index>(dim_z));
        Vec zp(static_cast<Eigen::Index>(dim_z));
        for (Eigen::Index c = 0; c < z.size(); ++c) z(c) = rs.next_normal();
        for (Eigen::Index c = 0; c < zp.size(); ++c) zp(c) = rs.next_normal();
        // boundary cases y = y', z = z' every fourth probe
        if (i % 4 == 1) yp = y;
        if (i % 4 == 2) zp = z;

        const std::string wit = tuple_str(t, x, y, yp, z, zp);

        if (f.f) {
            const double fy = f.f(t, x, y, z);
            const double fyp = f.f(t, x, yp, z);
            check_finite(fy, "f", wit);
            check_finite(fyp, "f", wit);
            // (A1): (y - y') (f(y) - f(y')) <= mu |y - y'|^2
            const double lhs = (y - yp) * (fy - fyp);
            const double rhs = f.mu * sqr(y - yp);
            record(a1, lhs - rhs - slack * (1.0 + std::abs(rhs)) > 0 ? lhs - rhs : 0.0, wit);

            // (A2): |f(y,z) - f(y,z')|^2 <= K_f |z - z'|^2
            const double fz = f.f(t, x, y, zp);
            check_finite(fz, "f", wit);
            const double lhs2 = sqr(fy - fz);
            const double rhs2 = f.kf * (z - zp).squaredNorm();
            record(a2, lhs2 - rhs2 - slack * (1.0 + rhs2) > 0 ? lhs2 - rhs2 : 0.0, wit);

            // (A3): |f(t,y,z) - f(t,0,z)| <= C_f (1 + |y|^p)
            const double f0 = f.f(t, x, 0.0, z);
            check_finite(f0, "f", wit);
            const double lhs3 = std::abs(fy - f0);
            const double rhs3 = f.cf * (1.0 + std::pow(std::abs(y), f.growth_p));
            record(a3, lhs3 - rhs3 - slack * (1.0 + rhs3) > 0 ? lhs3 - rhs3 : 0.0, wit);
        }

        if (g.g) {
            const Vec gy = g.g(t, x, y, z);
            const Vec gyp = g.g(t, x, yp, zp);
            check_finite(gy.sum(), "g", wit);
            check_finite(gyp.sum(), "g", wit);
            // (A4): |g(y,z) - g(y',z')|^2 <= K_g |y-y'|^2 + eps |z-z'|^2
            const double lhs4 = (gy - gyp).squaredNorm();
            const double rhs4 = g.kg * sqr(y - yp) + g.eps * (z - zp).squaredNorm();
            record(a4, lhs4 - rhs4 - slack * (1.0 + rhs4) > 0 ? lhs4 - rhs4 : 0.0, wit);

            if (g.vanishing_at_zero) {
                const Vec g0 =
                    g.g(t, x, y, Vec::Zero(static_cast<Eigen::Index>(dim_z)));
                record(van, g0.norm() > slack ? g0.norm() : 0.0, wit);
            }
            if (g.x_lipschitz) {
                Vec x2(static_cast<Eigen::Index>(dim_x));
                for (Eigen::Index c = 0; c < x2.size(); ++c) x2(c) = rs.next_normal();
                const Vec gx2 = g.g(t, x2, y, z);
                const double lhs6 = (gy - gx2).norm();
                const double rhs6 = g.kg * (x - x2).norm();
                record(a6, lhs6 - rhs6 - slack * (1.0 + rhs6) > 0 ? lhs6 - rhs6 : 0.0, wit);
            }
        }
    }

    ValidationReport rep;
    rep.checks = {a1, a2, a3, a4};
    if (g.vanishing_at_zero) rep.checks.push_back(van);
    if (g.x_lipschitz) rep.checks.push_back(a6);
    return rep;
}

} // namespace bdsde
