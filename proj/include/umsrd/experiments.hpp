#pragma once

// Registered numerical experiments and the report structure they produce.

#include "umsrd/advection.hpp"
#include "umsrd/redistribution.hpp"
#include "umsrd/types.hpp"

#include <json.hpp>

#include <array>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace umsrd::exp {

using json = nlohmann::ordered_json;

enum class Geometry { line_1d, single_cut_2d, tilted_2d };

struct ExperimentSpec {
    int id = 0;
    std::string title;
    Geometry geometry = Geometry::line_1d;

    std::vector<Index> grid_sizes{100};
    double alpha = 0.2;
    double cut_position = 0.5;
    double slope = 0.3;      // tilted_2d
    double intercept = 0.5;  // tilted_2d
    double min_frac = 0.05;  // tilted_2d

    InitialCondition ic{};
    double velocity_x = 1;
    double velocity_y = 0;
    std::vector<double> cfls{0.5};
    CflBasis basis = CflBasis::full_mesh;
    double final_time = 1;
    long steps = 0; ///< fixed step count; overrides final_time when > 0
    BoundaryCondition bc = BoundaryCondition::periodic;

    BlendParams<double> params{};
    /// (p, tau) grid for parameter sweeps; empty means params only.
    std::vector<std::pair<double, double>> sweep;
    std::vector<Scheme> schemes{Scheme::base, Scheme::srd, Scheme::umsrd};
    /// Pre-merge modes run for the stabilized schemes. The base scheme always
    /// runs without pre-merging.
    std::vector<bool> pre_merge_modes{false};
    bool zero_flux = false;
    /// Zero field except (U_{j-1}, U_j) around the small cell (1D only).
    std::optional<std::array<double, 2>> neighborhood_state;

    bool record_range = false; ///< per-step TV increase and range excess
    int error_samples = 0;     ///< error-vs-time samples per run; 0 disables
    Index profile_n = 0;       ///< 2D: write the final field for this N only

    bool is_2d() const { return geometry != Geometry::line_1d; }
};

/// One CSV table. File name: exp{id}_{scheme}_{key=value...}.csv
struct Table {
    std::string scheme;
    std::vector<std::pair<std::string, std::string>> keys;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::string filename(int experiment_id) const;
    std::string key(const std::string& name) const;
    std::size_t column_index(const std::string& name) const;
    std::vector<double> column(const std::string& name) const;
};

struct RunSummary {
    Scheme scheme = Scheme::umsrd;
    bool pre_merge = false;
    std::vector<std::pair<std::string, double>> params; ///< N, cfl, p, tau, ...
    std::vector<std::pair<std::string, double>> stats;  ///< measured scalars
    long steps = 0;
    double dt = 0;
    double mass_residual = 0; ///< max_n |M_n - M_0| / max_k sum V|U^k|
    bool periodic = true;
    bool diverged = false;
    long divergence_step = -1;
    double wall_seconds = 0;

    double param(const std::string& name,
                 double fallback = std::numeric_limits<double>::quiet_NaN()) const;
    double stat(const std::string& name,
                double fallback = std::numeric_limits<double>::quiet_NaN()) const;
    /// "srd", "umsrd pre_merge=on", ...
    std::string label() const;
};

struct Check {
    std::string name;
    bool passed = true;
    std::string detail;
};

struct ExperimentReport {
    int id = 0;
    ExperimentSpec spec;
    std::vector<Table> tables;
    std::vector<RunSummary> runs;
    std::vector<Check> checks;
    std::vector<std::string> summary; ///< human-readable lines for the CLI

    /// First table matching scheme and every given key=value pair.
    const Table& table(const std::string& scheme,
                       const std::vector<std::pair<std::string, std::string>>& keys) const;
    const Table* find_table(const std::string& scheme,
                            const std::vector<std::pair<std::string, std::string>>& keys) const;
    std::vector<const RunSummary*> find_runs(Scheme scheme) const;
    bool ok() const;
    json metadata() const;
};

/// Default spec for experiments 1 to 9.
ExperimentSpec registered_spec(int id);
std::vector<int> registered_ids();
json describe(const ExperimentSpec& spec);

/// Runs every (N, cfl, p, tau, scheme, pre-merge) combination. `jobs` > 1
/// runs them on worker threads; the report does not depend on `jobs`.
ExperimentReport run_experiment(const ExperimentSpec& spec, int jobs = 1);

/// Median wall-clock seconds over `repeats` runs of a 1D convergence-style
/// run (no diagnostics recorded), used for the overhead measurement.
double time_run_1d(const ExperimentSpec& spec, Index n, Scheme scheme, int repeats);

/// Canonical number formatting used in every CSV and summary line.
std::string format_number(double v);

} // namespace umsrd::exp
