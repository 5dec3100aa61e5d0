#include "bdsde/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "bdsde/errors.hpp"
#include "bdsde/numerics.hpp"

namespace bdsde {

std::string format17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

CsvFile::CsvFile(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), n_cols_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += header[i];
    }
    buffer_ += '\n';
}

void CsvFile::row(const std::vector<std::string>& cells) {
    if (cells.size() != n_cols_) throw shape_error("CsvFile: wrong cell count");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += cells[i];
    }
    buffer_ += '\n';
}

CsvFile::~CsvFile() {
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    out.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
}

void write_solution_csv(const std::filesystem::path& path, const BackwardSolution& sol,
                        const TimeGrid& grid) {
    CsvFile csv(path, {"t", "mean_y", "std_y", "mean_abs_z", "y_residual_rms"});
    const std::size_t N = sol.n_steps();
    const std::size_t P = sol.n_paths();
    std::vector<double> col(P);
    for (std::size_t i = 0; i <= N; ++i) {
        for (std::size_t p = 0; p < P; ++p) col[p] = sol.y(p, i);
        const MeanVar ym = mean_var(col);
        double mean_abs_z = 0.0;
        if (i < N) {
            for (std::size_t p = 0; p < P; ++p) {
                double zn = 0.0;
                for (std::size_t c = 0; c < sol.dim_z(); ++c) zn += sqr(sol.z(p, i, c));
                col[p] = std::sqrt(zn);
            }
            mean_abs_z = mean(col);
        }
        csv.row({format17(grid.node(i)), format17(ym.mean), format17(std::sqrt(ym.var)),
                 format17(mean_abs_z), format17(i < N ? sol.y_residual_rms[i] : 0.0)});
    }
}

void write_paths_csv(const std::filesystem::path& path, const DualBrownianPaths& noise,
                     const TimeGrid& grid, std::size_t max_paths) {
    std::vector<std::string> header{"path", "t"};
    for (std::size_t c = 0; c < noise.d(); ++c) header.push_back("w" + std::to_string(c));
    for (std::size_t c = 0; c < noise.m(); ++c) header.push_back("b" + std::to_string(c));
    CsvFile csv(path, header);
    const std::size_t P = std::min(max_paths, noise.n_paths());
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t i = 0; i < noise.n_nodes(); ++i) {
            std::vector<std::string> cells{std::to_string(p), format17(grid.node(i))};
            for (std::size_t c = 0; c < noise.d(); ++c) cells.push_back(format17(noise.w(p, i, c)));
            for (std::size_t c = 0; c < noise.m(); ++c) cells.push_back(format17(noise.b(i, c)));
            csv.row(cells);
        }
}

void write_forward_csv(const std::filesystem::path& path, const ForwardPaths& fwd,
                       const TimeGrid& grid, std::size_t max_paths) {
    std::vector<std::string> header{"path", "t"};
    for (std::size_t c = 0; c < fwd.d(); ++c) header.push_back("x" + std::to_string(c));
    CsvFile csv(path, header);
    const std::size_t P = std::min(max_paths, fwd.n_paths());
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t i = 0; i < fwd.n_nodes(); ++i) {
            std::vector<std::string> cells{std::to_string(p), format17(grid.node(i))};
            for (std::size_t c = 0; c < fwd.d(); ++c) cells.push_back(format17(fwd.x(p, i, c)));
            csv.row(cells);
        }
}

void write_field_csv(const std::filesystem::path& path, const RandomField& field) {
    std::vector<std::string> header{"t"};
    for (std::size_t j = 0; j < field.n_x(); ++j)
        header.push_back("x_" + format17(field.box().point(j)));
    CsvFile csv(path, header);
    for (std::size_t i = 0; i < field.n_time(); ++i) {
        std::vector<std::string> cells{format17(field.t(i))};
        for (std::size_t j = 0; j < field.n_x(); ++j) cells.push_back(format17(field.u(i, j)));
        csv.row(cells);
    }
}

void write_ladder_csv(const std::filesystem::path& path, const LadderResult& ladder,
                      const TimeGrid& grid) {
    CsvFile csv(path, {"level", "t", "mean_y", "max_y", "level_bound", "universal_bound",
                       "discrete_bound", "formula_excess", "discrete_excess"});
    const double q = ladder.q;
    for (std::size_t l = 0; l < ladder.levels.size(); ++l) {
        const auto& sol = ladder.solutions[l];
        const double n = ladder.levels[l];
        const std::vector<double> xi_disc =
            discrete_comparison_ladder(q, n, grid, ladder.root_tol);
        std::vector<double> col(sol.n_paths());
        for (std::size_t i = 0; i <= sol.n_steps(); ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t p = 0; p < sol.n_paths(); ++p) {
                col[p] = sol.y(p, i);
                mx = std::max(mx, col[p]);
            }
            const double ttg = grid.t_end() - grid.node(i);
            const double lb = std::pow(q * std::max(ttg, 0.0) + std::pow(n, -q), -1.0 / q);
            const double ub = ttg > 0 ? std::pow(q * ttg, -1.0 / q)
                                      : std::numeric_limits<double>::infinity();
            csv.row({format17(n), format17(grid.node(i)), format17(mean(col)), format17(mx),
                     format17(lb), format17(ub), format17(xi_disc[i]), format17(mx - lb),
                     format17(mx - xi_disc[i])});
        }
    }
}

void write_weakform_csv(const std::filesystem::path& path,
                        const std::vector<WeakFormRow>& rows) {
    CsvFile csv(path, {"term", "r", "t", "value", "level"});
    for (const auto& w : rows)
        csv.row({w.term, format17(w.r), format17(w.t), format17(w.value),
                 std::to_string(w.level)});
}

void write_trace_csv(const std::filesystem::path& path, const TerminalTraceResult& trace) {
    CsvFile csv(path, {"t", "integral", "se", "target", "divergence_ref"});
    for (std::size_t i = 0; i < trace.curve.size(); ++i) {
        const auto& p = trace.curve[i];
        csv.row({format17(p.t), format17(p.integral), format17(p.se), format17(trace.target),
                 format17(trace.divergence_ref[i])});
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    const std::string s = j.dump(2);
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
    out << '\n';
}

} // namespace bdsde
