#pragma once

// Parameter sweeps, figure experiments and the tabular CSV/JSON output.

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ltm/model.hpp"

namespace ltm {

std::string_view library_version();

struct Column {
    std::string name;
    std::string unit;

    bool operator==(const Column&) const = default;
};

/// Rectangular numeric table. Absent cells (below threshold, failed points)
/// are std::nullopt and serialise as empty CSV fields / JSON null.
struct OutputTable {
    std::vector<Column> columns;
    std::vector<std::vector<std::optional<double>>> rows;
    std::vector<std::pair<std::string, std::string>> provenance;  // ordered key/value pairs

    void add_provenance(std::string key, std::string value);
    std::optional<std::string> provenance_value(std::string_view key) const;
    std::size_t column_index(std::string_view name) const;  // UsageError when missing
    std::vector<std::optional<double>> column(std::string_view name) const;

    bool operator==(const OutputTable&) const = default;
};

/// Provenance common to every table: config hash, preset name, version.
void stamp_provenance(OutputTable& table, const ModelConfig& config, std::string_view preset_label);

void write_csv(std::ostream& out, const OutputTable& table);
std::string to_csv(const OutputTable& table);
OutputTable parse_csv(std::string_view text);

std::string to_json(const OutputTable& table);
OutputTable parse_json(std::string_view text);

/// Several tables: CSV blocks separated by one blank line; JSON array.
std::string to_csv(const std::vector<OutputTable>& tables);
std::vector<OutputTable> parse_csv_tables(std::string_view text);
std::string to_json(const std::vector<OutputTable>& tables);

enum class AxisScale { linear, log };

struct SweepAxis {
    std::string path;  // parameter path in canonical units, e.g. drive.delta
    double min = 0;
    double max = 0;
    int points = 2;
    AxisScale scale = AxisScale::linear;

    std::vector<double> values() const;
};

enum class SweepOutput { n, p_out, populations, eta };

struct SweepSpec {
    SweepAxis axis1;
    std::optional<SweepAxis> axis2;
    std::vector<std::pair<std::string, std::string>> overrides;  // path, "value [unit]"
    std::vector<SweepOutput> outputs{SweepOutput::n, SweepOutput::p_out};
};

/// "path:min:max:points[:log]".
SweepAxis parse_axis(std::string_view text);
SweepOutput parse_sweep_output(std::string_view text);

struct SweepOptions {
    unsigned threads = 0;  // 0 = hardware concurrency
    std::string preset_label = "custom";
};

/// Steady state on the grid, axis2 fastest. Exactly one steady-state solve
/// per grid point; the count is recorded in the provenance.
OutputTable run_sweep(const SweepSpec& spec, const ModelConfig& config, const SweepOptions& options = {});

enum class Experiment { fig1b, fig2a, fig2b, fig3a, fig3b, fig4 };

Experiment experiment_from_name(std::string_view name);
std::string_view experiment_name(Experiment e);

/// Pre-registered reproduction of one figure, one table per curve. `overrides`
/// (path, value text) are applied to every preset the figure uses.
std::vector<OutputTable> run_experiment(Experiment which,
                                        const std::vector<std::pair<std::string, std::string>>& overrides = {});

}  // namespace ltm
