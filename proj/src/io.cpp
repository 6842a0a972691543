#include "umsrd/io.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace umsrd::io {

namespace {

const char* merge_name(MergeDirection d) {
    switch (d) {
    case MergeDirection::none: return "none";
    case MergeDirection::down: return "down";
    case MergeDirection::up: return "up";
    }
    return "?";
}

std::vector<double> to_vector(const Field<double>& f) { return {f.data(), f.data() + f.size()}; }

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return os;
}

} // namespace

json mesh_summary(const Mesh1D<double>& mesh) {
    json j;
    j["dimension"] = 1;
    j["n_cells"] = mesh.n_cells;
    j["h"] = mesh.h;
    j["periodic"] = mesh.periodic;
    j["cut_index"] = mesh.cut_index;
    j["alpha"] = mesh.alpha;
    j["widths"] = to_vector(mesh.widths);
    j["centers"] = to_vector(mesh.centers);
    return j;
}

json mesh_summary(const Mesh2D<double>& mesh) {
    json j;
    j["dimension"] = 2;
    j["nx"] = mesh.nx;
    j["ny"] = mesh.ny;
    j["h"] = mesh.h;
    j["n_cells"] = mesh.size();
    j["volumes"] = to_vector(mesh.cell_volumes);
    json cuts = json::array();
    for (const auto& cc : mesh.cut_cells) {
        cuts.push_back({{"index", cc.index},
                        {"cell", cc.cell},
                        {"sibling", cc.sibling},
                        {"fraction", cc.fraction},
                        {"merge", merge_name(cc.merge)},
                        {"partner", cc.partner}});
    }
    j["cut_cells"] = std::move(cuts);
    return j;
}

void write_blend_records(std::ostream& os, long step,
                         const std::vector<BlendRecord<double>>& records, bool header) {
    if (header) os << "step,j,du_max,eta,s\n";
    for (const auto& r : records)
        os << step << ',' << r.j << ',' << exp::format_number(r.du_max) << ','
           << exp::format_number(r.eta) << ',' << exp::format_number(r.s) << '\n';
}

void write_csv(std::ostream& os, const exp::Table& table) {
    for (std::size_t c = 0; c < table.columns.size(); ++c)
        os << (c ? "," : "") << table.columns[c];
    os << '\n';
    std::string line;
    for (const auto& row : table.rows) {
        line.clear();
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) line += ',';
            line += exp::format_number(row[c]);
        }
        os << line << '\n';
    }
}

std::vector<std::filesystem::path> write_report(const exp::ExperimentReport& report,
                                                const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());

    std::vector<std::filesystem::path> written;
    for (const auto& t : report.tables) {
        const auto path = out_dir / t.filename(report.id);
        auto os = open_for_write(path);
        write_csv(os, t);
        if (!os) throw std::runtime_error("write failed: " + path.string());
        written.push_back(path);
    }
    const auto meta = out_dir / fmt::format("exp{}_meta.json", report.id);
    auto os = open_for_write(meta);
    os << report.metadata().dump(2) << '\n';
    if (!os) throw std::runtime_error("write failed: " + meta.string());
    written.push_back(meta);
    return written;
}

std::filesystem::path write_report_json(const exp::ExperimentReport& report,
                                        const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
    json j = report.metadata();
    json tables = json::object();
    for (const auto& t : report.tables) {
        json rows = json::array();
        for (const auto& r : t.rows) {
            json row = json::array();
            for (double v : r) row.push_back(std::isfinite(v) ? json(v) : json(nullptr));
            rows.push_back(std::move(row));
        }
        tables[t.filename(report.id)] = {{"columns", t.columns}, {"rows", std::move(rows)}};
    }
    j["tables"] = std::move(tables);
    const auto path = out_dir / fmt::format("exp{}_report.json", report.id);
    auto os = open_for_write(path);
    os << j.dump(2) << '\n';
    if (!os) throw std::runtime_error("write failed: " + path.string());
    return path;
}

} // namespace umsrd::io
