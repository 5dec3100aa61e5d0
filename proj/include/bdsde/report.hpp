#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bdsde/field.hpp"
#include "bdsde/singular.hpp"
#include "bdsde/solver.hpp"

#include <json.hpp>

namespace bdsde {

/// 17-significant-digit decimal rendering, the reproducibility contract for
/// every CSV cell.
std::string format17(double v);

std::uint64_t fnv1a64(const std::string& s);

/// Writes rows of preformatted cells with a fixed header. All artifact CSVs
/// funnel through this writer, single-threaded.
class CsvFile {
public:
    CsvFile(const std::filesystem::path& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);
    ~CsvFile();

private:
    std::string buffer_;
    std::filesystem::path path_;
    std::size_t n_cols_;
};

/// Per node: t, mean Y, std Y, mean |Z|, Y-regression residual.
void write_solution_csv(const std::filesystem::path& path, const BackwardSolution& sol,
                        const TimeGrid& grid);

/// One row per (path, node): path, t, W components, B components.
void write_paths_csv(const std::filesystem::path& path, const DualBrownianPaths& noise,
                     const TimeGrid& grid, std::size_t max_paths);

/// Forward paths: path, t, X components.
void write_forward_csv(const std::filesystem::path& path, const ForwardPaths& fwd,
                       const TimeGrid& grid, std::size_t max_paths);

/// Matrix layout: rows = time nodes, columns = lattice points.
void write_field_csv(const std::filesystem::path& path, const RandomField& field);

/// Per level per node: level, t, mean Y, max Y, level bound, universal bound,
/// max excess.
void write_ladder_csv(const std::filesystem::path& path, const LadderResult& ladder,
                      const TimeGrid& grid);

/// Tidy rows: term, interval, value, refinement level.
struct WeakFormRow {
    std::string term;
    double r = 0.0, t = 0.0;
    double value = 0.0;
    int level = 0;
};
void write_weakform_csv(const std::filesystem::path& path, const std::vector<WeakFormRow>& rows);

void write_trace_csv(const std::filesystem::path& path, const TerminalTraceResult& trace);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

} // namespace bdsde
