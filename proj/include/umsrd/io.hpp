#pragma once

// CSV and JSON serialization of meshes, blend records and experiment reports.

#include "umsrd/experiments.hpp"
#include "umsrd/mesh.hpp"
#include "umsrd/redistribution.hpp"

#include <json.hpp>

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace umsrd::io {

using json = nlohmann::ordered_json;

/// Widths, centers, cut index and volume fraction.
json mesh_summary(const Mesh1D<double>& mesh);
/// Volumes, cut cells (index pair, fraction, merge direction, partner).
json mesh_summary(const Mesh2D<double>& mesh);

/// Rows "step,j,du_max,eta,s", one per record; the header is written when
/// `header` is true.
void write_blend_records(std::ostream& os, long step,
                         const std::vector<BlendRecord<double>>& records, bool header);

void write_csv(std::ostream& os, const exp::Table& table);

/// Every table as exp{id}_{scheme}_{key=value...}.csv plus the metadata
/// sidecar exp{id}_meta.json. Returns the paths written. Throws
/// std::runtime_error when a file cannot be written.
std::vector<std::filesystem::path> write_report(const exp::ExperimentReport& report,
                                                const std::filesystem::path& out_dir);

/// Single-file variant: exp{id}_report.json with the metadata and every
/// table (non-finite numbers become null).
std::filesystem::path write_report_json(const exp::ExperimentReport& report,
                                        const std::filesystem::path& out_dir);

} // namespace umsrd::io
