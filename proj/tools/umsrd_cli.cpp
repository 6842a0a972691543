// Command-line front end for the cut-cell advection experiments.

#include "umsrd/experiments.hpp"
#include "umsrd/io.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using umsrd::exp::ExperimentSpec;

enum Exit { ok = 0, io_failure = 1, usage = 2, check_failed = 3, diverged = 4 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr const char* csv_help = R"(Output files (in --out-dir, default $UMSRD_OUT_DIR or ./out):
  exp{id}_{scheme}_{key=value...}.csv   one file per table or series
  exp{id}_meta.json                     spec, per-run parameters, stats, checks
CSV columns:
  table=errors        N,h,L1,rate_L1,Linf,rate_Linf
  table=sensitivity   p,tau,L1,Linf,rel_dev_from_mean
  series=diagnostics  n,t,tv,mass,max_abs, then du_max_k,eta_k,s_k per tracked neighborhood
  series=tvd          n,tv,tv_increase,min,max,range_excess
  series=drift        n,drift_l1,drift_l1_volume,drift_linf[,u_partner,u_cut,q_hat,s]
  series=error        n,t,l1,linf,s_min,s_max
  series=profile      1D: i,x,width,u0,u,exact   2D: cell,x,y,volume,u,exact
Exit codes: 0 ok, 1 IO failure, 2 usage error, 3 check failed, 4 stabilized run diverged.)";

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    if (out.empty()) throw UsageError("empty list '" + s + "'");
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw UsageError(fmt::format("{}: '{}' is not a number", key, v));
    }
}

long to_long(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != static_cast<double>(static_cast<long>(d)))
        throw UsageError(fmt::format("{}: '{}' is not an integer", key, v));
    return static_cast<long>(d);
}

bool to_on_off(const std::string& key, const std::string& v) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw UsageError(fmt::format("{}: expected on or off, got '{}'", key, v));
}

/// Settings keys accepted from config files and flags. Keys use underscores;
/// the matching flags use dashes.
const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys{
        "experiment", "scheme",   "pre_merge", "p",         "tau",       "eps",
        "indicator",  "tau_abs",  "N",         "alpha",     "cut_position", "slope",
        "intercept",  "min_frac", "cfl",       "cfl_basis", "T",         "steps",
        "bc",         "ic",       "velocity_x", "velocity_y", "out_dir", "format",
        "jobs",       "p_list",   "tau_list",  "dim"};
    return keys;
}

using Settings = std::map<std::string, std::string>;

Settings read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file " + path);
    Settings s;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(fmt::format("{}:{}: expected key=value", path, lineno));
        auto trim = [](std::string x) {
            const auto a = x.find_first_not_of(" \t\r");
            const auto b = x.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string{} : x.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        for (auto& c : key)
            if (c == '-') c = '_';
        const auto& keys = known_keys();
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw UsageError(fmt::format("{}:{}: unknown key '{}'", path, lineno, key));
        s[key] = trim(line.substr(eq + 1));
    }
    return s;
}

void apply_settings(ExperimentSpec& spec, const Settings& s) {
    for (const auto& [k, v] : s) {
        if (k == "scheme") {
            spec.schemes.clear();
            for (const auto& name : split_list(v)) {
                try {
                    spec.schemes.push_back(umsrd::parse_scheme(name));
                } catch (const std::invalid_argument& e) {
                    throw UsageError(e.what());
                }
            }
        } else if (k == "pre_merge") {
            spec.pre_merge_modes.clear();
            for (const auto& m : split_list(v)) spec.pre_merge_modes.push_back(to_on_off(k, m));
        } else if (k == "p" || k == "tau") {
            (k == "p" ? spec.params.p : spec.params.tau) = to_double(k, v);
            spec.sweep.clear();
        } else if (k == "eps") {
            spec.params.eps = to_double(k, v);
        } else if (k == "indicator") {
            if (v == "normalized")
                spec.params.indicator = umsrd::Indicator::normalized;
            else if (v == "unnormalized")
                spec.params.indicator = umsrd::Indicator::unnormalized;
            else
                throw UsageError("indicator: expected normalized or unnormalized");
        } else if (k == "tau_abs") {
            spec.params.tau_abs = to_double(k, v);
        } else if (k == "N") {
            spec.grid_sizes.clear();
            for (const auto& n : split_list(v)) spec.grid_sizes.push_back(to_long(k, n));
            if (spec.profile_n > 0 && spec.grid_sizes.size() == 1) spec.profile_n = spec.grid_sizes[0];
        } else if (k == "alpha") {
            spec.alpha = to_double(k, v);
        } else if (k == "cut_position") {
            spec.cut_position = to_double(k, v);
        } else if (k == "slope") {
            spec.slope = to_double(k, v);
        } else if (k == "intercept") {
            spec.intercept = to_double(k, v);
        } else if (k == "min_frac") {
            spec.min_frac = to_double(k, v);
        } else if (k == "cfl") {
            spec.cfls.clear();
            for (const auto& c : split_list(v)) spec.cfls.push_back(to_double(k, c));
        } else if (k == "cfl_basis") {
            if (v == "full_mesh")
                spec.basis = umsrd::CflBasis::full_mesh;
            else if (v == "small_cell")
                spec.basis = umsrd::CflBasis::small_cell;
            else
                throw UsageError("cfl_basis: expected full_mesh or small_cell");
        } else if (k == "T") {
            spec.final_time = to_double(k, v);
            spec.steps = 0;
        } else if (k == "steps") {
            spec.steps = to_long(k, v);
        } else if (k == "bc") {
            if (v == "periodic")
                spec.bc = umsrd::BoundaryCondition::periodic;
            else if (v == "dirichlet_exact")
                spec.bc = umsrd::BoundaryCondition::dirichlet_exact;
            else
                throw UsageError("bc: expected periodic or dirichlet_exact");
        } else if (k == "ic") {
            try {
                spec.ic.kind = umsrd::parse_ic_kind(v);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
        } else if (k == "velocity_x") {
            spec.velocity_x = to_double(k, v);
        } else if (k == "velocity_y") {
            spec.velocity_y = to_double(k, v);
        }
        // experiment, out_dir, format, jobs, p_list, tau_list, dim are read
        // by the subcommands themselves.
    }
    // Sweep lists are applied after p/tau so that they win when both are set.
    if (s.count("p_list") || s.count("tau_list")) {
        std::vector<double> ps{spec.params.p}, taus{spec.params.tau};
        if (s.count("p_list")) {
            ps.clear();
            for (const auto& x : split_list(s.at("p_list"))) ps.push_back(to_double("p_list", x));
        }
        if (s.count("tau_list")) {
            taus.clear();
            for (const auto& x : split_list(s.at("tau_list")))
                taus.push_back(to_double("tau_list", x));
        }
        spec.sweep.clear();
        for (double p : ps)
            for (double tau : taus) spec.sweep.emplace_back(p, tau);
    }
}

int experiment_id(const Settings& s) {
    if (!s.count("experiment")) throw UsageError("--experiment is required");
    const long id = to_long("experiment", s.at("experiment"));
    const auto ids = umsrd::exp::registered_ids();
    if (std::find(ids.begin(), ids.end(), id) == ids.end())
        throw UsageError(fmt::format("no experiment {}; registered: 1-9", id));
    return static_cast<int>(id);
}

std::string out_dir(const Settings& s) {
    if (s.count("out_dir")) return s.at("out_dir");
    if (const char* env = std::getenv("UMSRD_OUT_DIR"); env && *env) return env;
    return "out";
}

int execute(const ExperimentSpec& spec, const Settings& s) {
    const int jobs = s.count("jobs") ? static_cast<int>(to_long("jobs", s.at("jobs"))) : 1;
    if (jobs < 1) throw UsageError("--jobs must be at least 1");
    const std::string format = s.count("format") ? s.at("format") : "csv";
    if (format != "csv" && format != "json") throw UsageError("--format must be csv or json");

    umsrd::exp::ExperimentReport report;
    try {
        report = umsrd::exp::run_experiment(spec, jobs);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    for (const auto& line : report.summary) std::cout << line << '\n';

    const std::string dir = out_dir(s);
    try {
        if (format == "csv") {
            const auto files = umsrd::io::write_report(report, dir);
            std::cout << fmt::format("wrote {} files to {}\n", files.size(), dir);
        } else {
            const auto path = umsrd::io::write_report_json(report, dir);
            std::cout << "wrote " << path.string() << '\n';
        }
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return io_failure;
    }

    bool any_diverged = false;
    for (const auto& c : report.checks) {
        std::cout << fmt::format("check {}: {} ({})\n", c.name, c.passed ? "ok" : "FAILED", c.detail);
        if (!c.passed && c.name == "divergence") any_diverged = true;
    }
    if (any_diverged) return diverged;
    return report.ok() ? ok : check_failed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cut-cell advection with state redistribution and its update-magnitude blend"};
    app.footer(csv_help);
    app.require_subcommand(1);

    // Flags shared by run/convergence/sweep; stored as strings and merged
    // over the config file.
    std::map<std::string, std::string> flag_values;
    std::string config_path;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key=value file; flags override its entries")
            ->check(CLI::ExistingFile);
        auto opt = [&](const std::string& flag, const std::string& key, const std::string& help) {
            cmd->add_option(flag, flag_values[key], help);
        };
        opt("--scheme", "scheme", "comma-separated subset of base,srd,umsrd");
        opt("--pre-merge", "pre_merge", "on|off (or on,off to run both)");
        opt("--p", "p", "blend exponent p >= 1");
        opt("--tau", "tau", "blend threshold tau > 0");
        opt("--eps", "eps", "indicator floor eps > 0");
        opt("--indicator", "indicator", "normalized|unnormalized");
        opt("--tau-abs", "tau_abs", "scale of the unnormalized indicator");
        opt("--N", "N", "grid size or comma-separated list");
        opt("--alpha", "alpha", "small-cell volume fraction in (0, 1/2)");
        opt("--cut-position", "cut_position", "1D cut location in (0, 1)");
        opt("--slope", "slope", "tilted line slope");
        opt("--intercept", "intercept", "tilted line height at x = 1/2");
        opt("--min-frac", "min_frac", "tilted-mesh fraction clamp");
        opt("--cfl", "cfl", "CFL number or comma-separated list");
        opt("--cfl-basis", "cfl_basis", "full_mesh|small_cell");
        opt("--T", "T", "final time");
        opt("--steps", "steps", "fixed number of steps (overrides --T)");
        opt("--bc", "bc", "periodic|dirichlet_exact");
        opt("--ic", "ic", "sine|step|cosine_pulse|product_sine|tilted_field");
        opt("--velocity-x", "velocity_x", "advection velocity a or a_x");
        opt("--velocity-y", "velocity_y", "advection velocity a_y");
        opt("--out-dir", "out_dir", "output directory (default $UMSRD_OUT_DIR or ./out)");
        opt("--format", "format", "csv|json");
        opt("--jobs", "jobs", "worker threads for independent runs");
    };

    auto* run = app.add_subcommand("run", "run one registered experiment");
    run->add_option("--experiment", flag_values["experiment"], "experiment id 1-9")->required();
    add_common(run);

    auto* conv = app.add_subcommand("convergence", "grid-refinement study (1D: experiment 1, 2D: 7)");
    conv->add_option("--dim", flag_values["dim"], "1 or 2")->default_val("1");
    add_common(conv);

    auto* sweep = app.add_subcommand("sweep", "(p, tau) sweep on the experiment 4 setup");
    sweep->add_option("--p-list", flag_values["p_list"], "comma-separated p values");
    sweep->add_option("--tau-list", flag_values["tau_list"], "comma-separated tau values");
    add_common(sweep);

    auto* describe = app.add_subcommand("describe", "print registered experiment specs as JSON");
    std::string describe_id;
    describe->add_option("--experiment", describe_id, "experiment id 1-9 (default: all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage;
    }

    try {
        if (describe->parsed()) {
            std::vector<int> ids = umsrd::exp::registered_ids();
            if (!describe_id.empty()) ids = {experiment_id({{"experiment", describe_id}})};
            for (int id : ids)
                std::cout << umsrd::exp::describe(umsrd::exp::registered_spec(id)).dump(2) << '\n';
            return ok;
        }

        Settings settings = config_path.empty() ? Settings{} : read_config(config_path);
        for (const auto& [k, v] : flag_values)
            if (!v.empty()) settings[k] = v;

        ExperimentSpec spec;
        if (run->parsed()) {
            spec = umsrd::exp::registered_spec(experiment_id(settings));
        } else if (conv->parsed()) {
            const std::string dim = settings.count("dim") ? settings.at("dim") : "1";
            if (dim != "1" && dim != "2") throw UsageError("--dim must be 1 or 2");
            spec = umsrd::exp::registered_spec(dim == "1" ? 1 : 7);
        } else {
            spec = umsrd::exp::registered_spec(4);
        }
        apply_settings(spec, settings);
        return execute(spec, settings);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\nrun with --help for usage\n";
        return usage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return io_failure;
    }
}
