#include "umsrd/experiments.hpp"

#include "umsrd/diagnostics.hpp"
#include "umsrd/mesh.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>
#include <thread>
#include <type_traits>

namespace umsrd::exp {

namespace {

using F = Field<double>;
using Clock = std::chrono::steady_clock;
constexpr double nan = std::numeric_limits<double>::quiet_NaN();
constexpr double inf = std::numeric_limits<double>::infinity();

std::string key_value(double v) { return fmt::format("{}", v); }

struct RunKey {
    Index n = 0;
    double cfl = 0;
    double p = 2;
    double tau = 0.1;
    Scheme scheme = Scheme::umsrd;
    bool pre_merge = false;
};

struct RunResult {
    RunSummary summary;
    std::vector<Table> tables; ///< keys filled in by the caller
    ErrorNorms<double> error{nan, nan};
};

/// Step count and time step for one run. A fixed step count keeps the CFL
/// time step; otherwise the step is shrunk so that the run ends exactly at T.
std::pair<long, double> plan_steps(const ExperimentSpec& spec, double dt_cfl) {
    if (spec.steps > 0) return {spec.steps, dt_cfl};
    if (spec.final_time <= 0) return {0, dt_cfl};
    const auto n = static_cast<long>(std::ceil(spec.final_time / dt_cfl * (1 - 1e-12)));
    return {n, spec.final_time / static_cast<double>(n)};
}

template <typename MeshT>
double mesh_dt(const ExperimentSpec& spec, const MeshT& mesh, double cfl) {
    if constexpr (std::is_same_v<MeshT, Mesh1D<double>>)
        return cfl_dt(mesh, cfl, spec.velocity_x, spec.basis);
    else
        return cfl_dt(mesh, cfl, spec.velocity_x, spec.velocity_y, spec.basis);
}

template <typename MeshT>
F exact_at(const ExperimentSpec& spec, const MeshT& mesh, double t) {
    if constexpr (std::is_same_v<MeshT, Mesh1D<double>>)
        return exact_solution(mesh, spec.ic, spec.velocity_x, t);
    else
        return exact_solution(mesh, spec.ic, spec.velocity_x, spec.velocity_y, t);
}

template <typename MeshT>
F initial_state(const ExperimentSpec& spec, const MeshT& mesh) {
    if constexpr (std::is_same_v<MeshT, Mesh1D<double>>) {
        if (spec.neighborhood_state) {
            F u = F::Zero(mesh.size());
            u(mesh.merge_partner()) = (*spec.neighborhood_state)[0];
            u(mesh.cut_index) = (*spec.neighborhood_state)[1];
            return u;
        }
    }
    return initial_condition(mesh, spec.ic);
}

template <typename MeshT>
RunResult simulate(const ExperimentSpec& spec, const MeshT& mesh, const Neighborhoods<double>& nbhds,
                   const RunKey& key, double dt, long nsteps, long stride, bool diagnostics) {
    constexpr bool is_1d = std::is_same_v<MeshT, Mesh1D<double>>;
    const F& vol = mesh.volumes();

    StepOptions<double> opt;
    opt.scheme = key.scheme;
    opt.pre_merge = key.pre_merge;
    opt.params = spec.params;
    opt.params.p = key.p;
    opt.params.tau = key.tau;
    opt.zero_flux = spec.zero_flux;

    RunResult rr;
    RunSummary& sum = rr.summary;
    sum.scheme = key.scheme;
    sum.pre_merge = key.pre_merge;
    sum.steps = nsteps;
    sum.dt = dt;
    sum.params = {{"N", static_cast<double>(key.n)}, {"h", mesh.h},   {"cfl", key.cfl},
                  {"dt", dt},                         {"p", key.p},    {"tau", key.tau},
                  {"eps", spec.params.eps},           {"T", dt * static_cast<double>(nsteps)}};
    if constexpr (is_1d)
        sum.periodic = mesh.periodic;
    else
        sum.periodic = mesh.periodic_x && mesh.periodic_y;

    const F u0 = initial_state(spec, mesh);
    F u = u0;
    Recorder<double> recorder;

    // Per-step diagnostics: n, t, tv, mass, max_abs, then (du_max, eta, s)
    // for the tracked neighborhoods.
    const std::size_t tracked = nbhds.size() <= 4 ? nbhds.size() : 1;
    Table diag;
    diag.scheme = std::string(to_string(key.scheme));
    diag.keys = {{"series", "diagnostics"}};
    diag.columns = {"n", "t", "tv", "mass", "max_abs"};
    for (std::size_t k = 0; k < tracked; ++k) {
        diag.columns.push_back(fmt::format("du_max_{}", k));
        diag.columns.push_back(fmt::format("eta_{}", k));
        diag.columns.push_back(fmt::format("s_{}", k));
    }
    auto diag_row = [&](long n, const std::vector<BlendRecord<double>>* recs) {
        std::vector<double> row{static_cast<double>(n), dt * static_cast<double>(n),
                                total_variation(u, mesh), mass(u, vol),
                                u.size() ? u.array().abs().maxCoeff() : 0.0};
        for (std::size_t k = 0; k < tracked; ++k) {
            if (recs) {
                row.push_back((*recs)[k].du_max);
                row.push_back((*recs)[k].eta);
                row.push_back((*recs)[k].s);
            } else {
                row.insert(row.end(), {nan, nan, nan});
            }
        }
        diag.rows.push_back(std::move(row));
    };

    Table drift_table;
    drift_table.scheme = diag.scheme;
    drift_table.keys = {{"series", "drift"}};
    drift_table.columns = {"n", "drift_l1", "drift_l1_volume", "drift_linf"};
    const bool track_pair = is_1d && !nbhds.empty() && nbhds.front().members.size() == 2;
    if (track_pair)
        drift_table.columns.insert(drift_table.columns.end(), {"u_partner", "u_cut", "q_hat", "s"});

    Table range_table;
    range_table.scheme = diag.scheme;
    range_table.keys = {{"series", "tvd"}};
    range_table.columns = {"n", "tv", "tv_increase", "min", "max", "range_excess"};

    Table error_table;
    error_table.scheme = diag.scheme;
    error_table.keys = {{"series", "error"}};
    error_table.columns = {"n", "t", "l1", "linf", "s_min", "s_max"};
    const bool with_exact = !spec.zero_flux && !spec.neighborhood_state;
    auto sample_index = [&](long n) {
        return spec.error_samples > 0 && nsteps > 0
                   ? (n * spec.error_samples) / nsteps
                   : 0L;
    };

    double s_min_run = inf, s_max_run = -inf, s_min_win = inf, s_max_win = -inf;
    double max_tv_increase = -inf, max_range_excess = 0;
    double max_drift_l1 = 0, max_drift_linf = 0, drift1_l1 = nan, drift1_linf = nan;
    double max_drift_change = 0, step1_q = nan, step1_cut = nan, step1_partner = nan;

    if (diagnostics) {
        recorder.observe(mass(u, vol), absolute_mass(u, vol));
        diag_row(0, nullptr);
        if (spec.record_range)
            range_table.rows.push_back(
                {0, total_variation(u, mesh), 0, u.minCoeff(), u.maxCoeff(), 0});
        if (spec.error_samples > 0 && with_exact) {
            const auto e = error_norms(u, exact_at(spec, mesh, 0.0), vol);
            error_table.rows.push_back({0, 0, e.l1, e.linf, nan, nan});
        }
    }

    const auto t_start = Clock::now();
    for (long n = 0; n < nsteps; ++n) {
        const double t_n = dt * static_cast<double>(n);
        StepResult<double> res;
        const double q_prev = track_pair && diagnostics && spec.zero_flux
                                  ? neighborhood_average(nbhds.front(), u, vol)
                                  : nan;
        try {
            if constexpr (is_1d) {
                std::optional<double> inflow;
                if (!mesh.periodic)
                    inflow = detail::profile_1d(spec.ic, -mesh.h / 2 - spec.velocity_x * t_n);
                res = umsrd_step(mesh, nbhds, u, dt, spec.velocity_x, opt, inflow);
            } else {
                const InflowFn<double> inflow = [&](const Vec2<double>& p) {
                    return exact_value_2d(spec.ic, p.x(), p.y(), spec.velocity_x,
                                          spec.velocity_y, t_n);
                };
                res = umsrd_step(mesh, nbhds, u, dt, spec.velocity_x, spec.velocity_y, opt,
                                 mesh.boundary_faces.empty() ? nullptr : &inflow);
            }
        } catch (const DivergenceError&) {
            sum.diverged = true;
            sum.divergence_step = n + 1;
            break;
        }
        if (!diagnostics) {
            u = std::move(res.u);
            continue;
        }

        const long step = n + 1;
        double old_min = 0, old_max = 0, old_tv = 0;
        if (spec.record_range) {
            old_min = u.minCoeff();
            old_max = u.maxCoeff();
            old_tv = total_variation(u, mesh);
        }
        u = std::move(res.u);

        if (u.allFinite()) recorder.observe(mass(u, vol), absolute_mass(u, vol));
        for (const auto& r : res.records) {
            s_min_run = std::min(s_min_run, r.s);
            s_max_run = std::max(s_max_run, r.s);
            s_min_win = std::min(s_min_win, r.s);
            s_max_win = std::max(s_max_win, r.s);
        }
        if (step % stride == 0 || step == nsteps) diag_row(step, &res.records);

        if (spec.record_range) {
            const double tv = total_variation(u, mesh);
            const double lo = u.minCoeff(), hi = u.maxCoeff();
            const double excess = std::max({0.0, hi - old_max, old_min - lo});
            max_tv_increase = std::max(max_tv_increase, tv - old_tv);
            max_range_excess = std::max(max_range_excess, excess);
            range_table.rows.push_back({static_cast<double>(step), tv, tv - old_tv, lo, hi, excess});
        }

        if (spec.zero_flux) {
            const auto d = drift(u, u0, vol);
            max_drift_l1 = std::max(max_drift_l1, d.l1_cells);
            max_drift_linf = std::max(max_drift_linf, d.linf);
            if (step == 1) {
                drift1_l1 = d.l1_cells;
                drift1_linf = d.linf;
            } else {
                max_drift_change = std::max(max_drift_change, std::abs(d.l1_cells - drift1_l1));
            }
            std::vector<double> row{static_cast<double>(step), d.l1_cells, d.l1_volume, d.linf};
            if (track_pair) {
                const auto& nb = nbhds.front();
                row.insert(row.end(), {u(nb.members[0]), u(nb.members[1]), q_prev,
                                       res.records.front().s});
                if (step == 1) {
                    step1_q = q_prev;
                    step1_partner = u(nb.members[0]);
                    step1_cut = u(nb.members[1]);
                }
            }
            drift_table.rows.push_back(std::move(row));
        }

        if (spec.error_samples > 0 && with_exact && sample_index(step) != sample_index(step - 1)) {
            const auto e = error_norms(u, exact_at(spec, mesh, dt * static_cast<double>(step)), vol);
            error_table.rows.push_back({static_cast<double>(step), dt * static_cast<double>(step),
                                        e.l1, e.linf, s_min_win, s_max_win});
            s_min_win = inf;
            s_max_win = -inf;
        }
    }
    sum.wall_seconds = std::chrono::duration<double>(Clock::now() - t_start).count();
    if (!diagnostics) return rr;

    sum.mass_residual = recorder.max_mass_residual();
    const auto max_abs = diag.column_index("max_abs");
    double max_abs_all = 0;
    for (const auto& row : diag.rows)
        max_abs_all = std::max(max_abs_all, row[max_abs]);
    sum.stats.emplace_back("max_abs", max_abs_all);
    sum.stats.emplace_back("final_max_abs", u.size() ? u.array().abs().maxCoeff() : 0.0);
    if (!nbhds.empty()) {
        sum.stats.emplace_back("s_min", s_min_run);
        sum.stats.emplace_back("s_max", s_max_run);
    }
    if (spec.record_range) {
        sum.stats.emplace_back("max_tv_increase", max_tv_increase);
        sum.stats.emplace_back("max_range_excess", max_range_excess);
    }
    if (spec.zero_flux) {
        sum.stats.emplace_back("max_drift_l1", max_drift_l1);
        sum.stats.emplace_back("max_drift_linf", max_drift_linf);
        sum.stats.emplace_back("drift1_l1", drift1_l1);
        sum.stats.emplace_back("drift1_linf", drift1_linf);
        sum.stats.emplace_back("max_drift_change", max_drift_change);
        if (track_pair) {
            sum.stats.emplace_back("step1_q_hat", step1_q);
            sum.stats.emplace_back("step1_u_partner", step1_partner);
            sum.stats.emplace_back("step1_u_cut", step1_cut);
        }
    }

    const double t_final = dt * static_cast<double>(nsteps);
    if (with_exact && !sum.diverged) {
        const F ex = exact_at(spec, mesh, t_final);
        rr.error = error_norms(u, ex, vol);
        sum.stats.emplace_back("l1", rr.error.l1);
        sum.stats.emplace_back("linf", rr.error.linf);
    }

    rr.tables.push_back(std::move(diag));
    if (spec.record_range) rr.tables.push_back(std::move(range_table));
    if (spec.zero_flux) rr.tables.push_back(std::move(drift_table));
    if (spec.error_samples > 0 && with_exact) rr.tables.push_back(std::move(error_table));

    // Final profile.
    Table profile;
    profile.scheme = std::string(to_string(key.scheme));
    profile.keys = {{"series", "profile"}};
    const F ex = with_exact && !sum.diverged ? exact_at(spec, mesh, t_final) : F::Constant(u.size(), nan);
    if constexpr (is_1d) {
        profile.columns = {"i", "x", "width", "u0", "u", "exact"};
        for (Index i = 0; i < mesh.size(); ++i)
            profile.rows.push_back({static_cast<double>(i), mesh.centers(i), mesh.widths(i), u0(i),
                                    u(i), ex(i)});
        rr.tables.push_back(std::move(profile));
    } else if (key.n == spec.profile_n) {
        profile.columns = {"cell", "x", "y", "volume", "u", "exact"};
        for (Index c = 0; c < mesh.size(); ++c)
            profile.rows.push_back({static_cast<double>(c), mesh.centroids(c, 0),
                                    mesh.centroids(c, 1), vol(c), u(c), ex(c)});
        rr.tables.push_back(std::move(profile));
    }
    return rr;
}

void validate(const ExperimentSpec& spec) {
    if (spec.grid_sizes.empty()) throw std::invalid_argument("no grid sizes given");
    if (spec.cfls.empty()) throw std::invalid_argument("no CFL numbers given");
    if (spec.schemes.empty()) throw std::invalid_argument("no schemes given");
    if (spec.pre_merge_modes.empty()) throw std::invalid_argument("no pre-merge modes given");
    for (double c : spec.cfls)
        if (!(c > 0)) throw std::invalid_argument("CFL numbers must be positive");
    if (spec.final_time < 0) throw std::invalid_argument("final time must be non-negative");
    if (spec.velocity_x <= 0 && !spec.is_2d())
        throw std::invalid_argument("1D advection requires a > 0 (merging left)");
    if (spec.is_2d() != (spec.ic.dimension() == 2))
        throw std::invalid_argument("initial condition dimension does not match the geometry");
    if (spec.geometry == Geometry::single_cut_2d && spec.bc != BoundaryCondition::periodic)
        throw std::invalid_argument("the single-cut 2D mesh supports periodic boundaries only");
    if (spec.neighborhood_state && spec.is_2d())
        throw std::invalid_argument("neighborhood_state applies to 1D meshes only");
    spec.params.validate();
    for (const auto& [p, tau] : spec.sweep) {
        auto bp = spec.params;
        bp.p = p;
        bp.tau = tau;
        bp.validate();
    }
}

/// Builds the mesh and neighborhoods for every grid size and hands both
/// vectors to `fn`.
template <typename Fn>
void with_meshes(const ExperimentSpec& spec, Fn&& fn) {
    const bool periodic = spec.bc == BoundaryCondition::periodic;
    auto build_all = [&](auto&& build) {
        using MeshT = std::decay_t<decltype(build(Index{}))>;
        std::vector<MeshT> meshes;
        std::vector<Neighborhoods<double>> nbhds;
        for (Index n : spec.grid_sizes) {
            meshes.push_back(build(n));
            nbhds.push_back(build_neighborhoods(meshes.back()));
        }
        fn(meshes, nbhds);
    };
    switch (spec.geometry) {
    case Geometry::line_1d:
        build_all([&](Index n) {
            return build_mesh_1d<double>(n, spec.alpha, spec.cut_position, periodic);
        });
        break;
    case Geometry::single_cut_2d:
        build_all([&](Index n) { return build_mesh_2d_single_cut<double>(n, spec.alpha); });
        break;
    case Geometry::tilted_2d:
        build_all([&](Index n) {
            return build_mesh_2d_tilted<double>(n, spec.slope, spec.intercept, spec.min_frac,
                                                periodic);
        });
        break;
    }
}

/// Runs body(0..count-1) on up to `jobs` threads; rethrows the first failure.
template <typename Body>
void parallel_for(std::size_t count, int jobs, Body&& body) {
    const auto workers = static_cast<std::size_t>(std::clamp<long>(jobs, 1, static_cast<long>(count)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string on_off(bool b) { return b ? "on" : "off"; }

/// Growth factors max|U^{n}| / max|U^{n-1}| from a diagnostics table.
std::vector<double> growth_factors(const Table& diag, long upto) {
    const auto col = diag.column("max_abs");
    std::vector<double> g;
    for (std::size_t k = 1; k < col.size() && static_cast<long>(k) <= upto; ++k)
        g.push_back(col[k] / col[k - 1]);
    return g;
}

void summarize(ExperimentReport& rep) {
    const auto& spec = rep.spec;
    auto& out = rep.summary;
    out.push_back(fmt::format("experiment {}: {}", spec.id, spec.title));

    // Error tables first.
    for (const auto& t : rep.tables) {
        if (t.key("table") != "errors") continue;
        std::string label = t.scheme;
        for (const auto& [k, v] : t.keys)
            if (k != "table") label += fmt::format(" {}={}", k, v);
        out.push_back(label);
        out.push_back(fmt::format("  {:>6} {:>10} {:>12} {:>7} {:>12} {:>7}", "N", "h", "L1", "rate",
                                  "Linf", "rate"));
        for (const auto& r : t.rows)
            out.push_back(fmt::format("  {:>6} {:>10.4e} {:>12.4e} {:>7.3f} {:>12.4e} {:>7.3f}",
                                      static_cast<long>(r[0]), r[1], r[2], r[3], r[4], r[5]));
    }

    switch (spec.id) {
    case 2:
        for (const auto* r : rep.find_runs(Scheme::umsrd))
            out.push_back(fmt::format("umsrd cfl={}: s range [{:.6g}, {:.6g}]", r->param("cfl"),
                                      r->stat("s_min"), r->stat("s_max")));
        break;
    case 3:
        for (const auto& r : rep.runs)
            out.push_back(fmt::format("{}: max TV increase {:.3e}, max range excess {:.3e}",
                                      r.label(), r.stat("max_tv_increase"),
                                      r.stat("max_range_excess")));
        break;
    case 4: {
        if (const auto* t = rep.find_table("umsrd", {{"table", "sensitivity"}}))
            for (const auto& r : t->rows)
                out.push_back(fmt::format("p={} tau={}: L1 {:.6e} (deviation from mean {:.3e})",
                                          r[0], r[1], r[2], r[4]));
        break;
    }
    case 5:
        for (const auto& r : rep.runs) {
            if (r.scheme == Scheme::base) {
                const auto* t = rep.find_table("base", {{"series", "diagnostics"}});
                std::string g;
                if (t)
                    for (double v : growth_factors(*t, 8)) g += fmt::format(" {:.3f}", v);
                out.push_back(fmt::format("base: max|U| {:.4e}, growth per step:{}",
                                          r.stat("max_abs"), g));
            } else {
                out.push_back(fmt::format("{}: max|U| over run {:.6g}, final {:.6g}", r.label(),
                                          r.stat("max_abs"), r.stat("final_max_abs")));
            }
        }
        for (Scheme s : {Scheme::srd, Scheme::umsrd}) {
            std::string modes;
            for (const auto* r : rep.find_runs(s))
                if (!r->diverged && r->stat("max_abs") <= 1.0)
                    modes += (modes.empty() ? "" : ", ") + std::string("pre_merge=") + on_off(r->pre_merge);
            out.push_back(fmt::format("{}: bounded (max|U| <= 1) with {}", to_string(s),
                                      modes.empty() ? "no mode" : modes));
        }
        break;
    case 6:
        for (const auto& r : rep.runs) {
            if (r.scheme == Scheme::srd)
                out.push_back(fmt::format(
                    "srd: step-1 neighborhood value Q = {} (5/3), max drift {}",
                    format_number(r.stat("step1_q_hat")), format_number(r.stat("drift1_linf"))));
            else
                out.push_back(fmt::format("{}: max drift over {} steps = {}", r.label(), r.steps,
                                          format_number(r.stat("max_drift_linf"))));
        }
        break;
    case 8:
        for (const auto& r : rep.runs)
            out.push_back(fmt::format("{}: L1 drift at step 1 {:.6e}, max {:.6e}, max change {:.3e}",
                                      r.label(), r.stat("drift1_l1"), r.stat("max_drift_l1"),
                                      r.stat("max_drift_change")));
        break;
    case 9:
        for (const auto& r : rep.runs)
            out.push_back(fmt::format("{} cfl={}: final L1 {:.6e}, s range [{:.6f}, {:.6f}]",
                                      r.label(), r.param("cfl"), r.stat("l1"), r.stat("s_min"),
                                      r.stat("s_max")));
        break;
    default:
        break;
    }

    for (const auto& r : rep.runs)
        out.push_back(fmt::format("{} N={} cfl={}: {} steps, mass residual {:.3e}, {:.3f} s{}",
                                  r.label(), static_cast<long>(r.param("N")), r.param("cfl"),
                                  r.steps, r.mass_residual, r.wall_seconds,
                                  r.diverged ? fmt::format(", DIVERGED at step {}", r.divergence_step)
                                             : ""));
}

void add_checks(ExperimentReport& rep) {
    Check cons{"conservation", true, ""};
    double worst = 0;
    for (const auto& r : rep.runs) {
        if (r.diverged) {
            rep.checks.push_back({"divergence", false,
                                  fmt::format("{} diverged at step {}", r.label(), r.divergence_step)});
            continue;
        }
        if (!r.periodic || !std::isfinite(r.mass_residual)) continue;
        worst = std::max(worst, r.mass_residual);
        if (r.mass_residual > 1e-13) {
            cons.passed = false;
            cons.detail += fmt::format("{} residual {:.3e}; ", r.label(), r.mass_residual);
        }
    }
    if (cons.passed) cons.detail = fmt::format("max relative residual {:.3e}", worst);
    rep.checks.push_back(cons);

    if (rep.spec.record_range) {
        for (const auto& r : rep.runs) {
            if (r.scheme == Scheme::base || !r.pre_merge) continue;
            const bool ok = r.stat("max_tv_increase") <= 1e-12 && r.stat("max_range_excess") <= 1e-12;
            rep.checks.push_back({"tvd", ok,
                                  fmt::format("{}: max TV increase {:.3e}", r.label(),
                                              r.stat("max_tv_increase"))});
        }
    }
    if (rep.spec.zero_flux) {
        for (const auto& r : rep.runs) {
            if (r.scheme != Scheme::umsrd) continue;
            const bool ok = r.stat("max_drift_linf") <= 1e-13;
            rep.checks.push_back({"steady_state", ok,
                                  fmt::format("{}: max drift {:.3e}", r.label(),
                                              r.stat("max_drift_linf"))});
        }
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Table / report accessors
// ---------------------------------------------------------------------------

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{:.17g}", v);
}

std::string Table::filename(int experiment_id) const {
    std::string name = fmt::format("exp{}_{}", experiment_id, scheme);
    for (const auto& [k, v] : keys) name += fmt::format("_{}={}", k, v);
    return name + ".csv";
}

std::string Table::key(const std::string& name) const {
    for (const auto& [k, v] : keys)
        if (k == name) return v;
    return {};
}

std::size_t Table::column_index(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw std::out_of_range("table has no column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> Table::column(const std::string& name) const {
    const auto c = column_index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
}

double RunSummary::param(const std::string& name, double fallback) const {
    for (const auto& [k, v] : params)
        if (k == name) return v;
    return fallback;
}

double RunSummary::stat(const std::string& name, double fallback) const {
    for (const auto& [k, v] : stats)
        if (k == name) return v;
    return fallback;
}

std::string RunSummary::label() const {
    std::string s(to_string(scheme));
    if (scheme != Scheme::base) s += " pre_merge=" + on_off(pre_merge);
    return s;
}

const Table* ExperimentReport::find_table(
    const std::string& scheme, const std::vector<std::pair<std::string, std::string>>& keys) const {
    for (const auto& t : tables) {
        if (t.scheme != scheme) continue;
        const bool match = std::all_of(keys.begin(), keys.end(),
                                       [&](const auto& kv) { return t.key(kv.first) == kv.second; });
        if (match) return &t;
    }
    return nullptr;
}

const Table& ExperimentReport::table(
    const std::string& scheme, const std::vector<std::pair<std::string, std::string>>& keys) const {
    if (const auto* t = find_table(scheme, keys)) return *t;
    std::string what = "no table for scheme " + scheme;
    for (const auto& [k, v] : keys) what += " " + k + "=" + v;
    throw std::out_of_range(what);
}

std::vector<const RunSummary*> ExperimentReport::find_runs(Scheme scheme) const {
    std::vector<const RunSummary*> out;
    for (const auto& r : runs)
        if (r.scheme == scheme) out.push_back(&r);
    return out;
}

bool ExperimentReport::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

json ExperimentReport::metadata() const {
    json j;
    j["experiment"] = id;
    j["spec"] = describe(spec);
    json runs_json = json::array();
    for (const auto& r : runs) {
        json jr;
        jr["scheme"] = std::string(to_string(r.scheme));
        jr["pre_merge"] = r.pre_merge;
        for (const auto& [k, v] : r.params) jr["params"][k] = v;
        jr["steps"] = r.steps;
        jr["mass_residual"] = r.mass_residual;
        jr["periodic"] = r.periodic;
        jr["diverged"] = r.diverged;
        if (r.diverged) jr["divergence_step"] = r.divergence_step;
        for (const auto& [k, v] : r.stats)
            jr["stats"][k] = std::isfinite(v) ? json(v) : json(format_number(v));
        runs_json.push_back(std::move(jr));
    }
    j["runs"] = std::move(runs_json);
    json checks_json = json::array();
    for (const auto& c : checks)
        checks_json.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    j["checks"] = std::move(checks_json);
    std::vector<std::string> files;
    for (const auto& t : tables) files.push_back(t.filename(id));
    j["files"] = files;
    return j;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

std::vector<int> registered_ids() { return {1, 2, 3, 4, 5, 6, 7, 8, 9}; }

ExperimentSpec registered_spec(int id) {
    using IC = InitialCondition::Kind;
    ExperimentSpec s;
    s.id = id;
    switch (id) {
    case 1:
        s.title = "smooth advection convergence";
        s.grid_sizes = {40, 80, 160, 320};
        s.ic.kind = IC::sine;
        s.cfls = {0.5};
        s.basis = CflBasis::small_cell;
        s.final_time = 1;
        break;
    case 2:
        s.title = "shut-off under CFL refinement";
        s.grid_sizes = {200};
        s.ic.kind = IC::cosine_pulse;
        s.cfls = {0.5, 0.01};
        s.basis = CflBasis::small_cell;
        s.final_time = 1;
        s.schemes = {Scheme::umsrd};
        break;
    case 3:
        s.title = "step profile near the cut cell";
        s.grid_sizes = {100};
        s.ic.kind = IC::step;
        s.ic.x0 = 0.5;
        s.cfls = {0.5};
        s.final_time = 0.25;
        s.pre_merge_modes = {true, false};
        s.record_range = true;
        break;
    case 4:
        s.title = "blend parameter sensitivity";
        s.grid_sizes = {160};
        s.ic.kind = IC::sine;
        s.cfls = {0.5};
        s.basis = CflBasis::small_cell;
        s.final_time = 1;
        s.schemes = {Scheme::umsrd};
        s.sweep = {{1, 0.05}, {1, 0.1}, {2, 0.05}, {2, 0.1}, {4, 0.05}, {4, 0.1}};
        break;
    case 5:
        s.title = "small-cell instability";
        s.grid_sizes = {100};
        s.alpha = 0.05;
        s.ic.kind = IC::sine;
        s.cfls = {0.5};
        s.steps = 200;
        s.pre_merge_modes = {false, true};
        break;
    case 6:
        s.title = "steady-state preservation";
        s.grid_sizes = {50};
        s.zero_flux = true;
        s.neighborhood_state = std::array<double, 2>{1.5, 2.5};
        s.steps = 100;
        s.schemes = {Scheme::srd, Scheme::umsrd};
        break;
    case 7:
        s.title = "two-dimensional convergence";
        s.geometry = Geometry::single_cut_2d;
        s.grid_sizes = {40, 80, 160, 320};
        s.ic.kind = IC::product_sine;
        s.velocity_x = 1;
        s.velocity_y = 0.5;
        s.cfls = {0.4};
        s.final_time = 1;
        s.profile_n = 160;
        break;
    case 8:
        s.title = "long-time drift";
        s.grid_sizes = {100};
        s.ic.kind = IC::sine;
        s.zero_flux = true;
        s.steps = 5000;
        s.schemes = {Scheme::srd, Scheme::umsrd};
        break;
    case 9:
        s.title = "tilted embedded boundary";
        s.geometry = Geometry::tilted_2d;
        s.grid_sizes = {74};
        s.ic.kind = IC::tilted_field;
        s.velocity_x = 1;
        s.velocity_y = 0;
        s.cfls = {0.4, 0.005};
        s.final_time = 10;
        s.schemes = {Scheme::srd, Scheme::umsrd};
        s.error_samples = 200;
        s.profile_n = 74;
        break;
    default:
        throw std::invalid_argument(fmt::format("no experiment registered with id {}", id));
    }
    return s;
}

json describe(const ExperimentSpec& s) {
    auto geometry_name = [](Geometry g) {
        switch (g) {
        case Geometry::line_1d: return "line_1d";
        case Geometry::single_cut_2d: return "single_cut_2d";
        case Geometry::tilted_2d: return "tilted_2d";
        }
        return "?";
    };
    json j;
    j["id"] = s.id;
    j["title"] = s.title;
    j["geometry"] = geometry_name(s.geometry);
    j["N"] = s.grid_sizes;
    if (s.geometry == Geometry::tilted_2d) {
        j["slope"] = s.slope;
        j["intercept"] = s.intercept;
        j["min_frac"] = s.min_frac;
    } else {
        j["alpha"] = s.alpha;
        if (s.geometry == Geometry::line_1d) j["cut_position"] = s.cut_position;
    }
    j["ic"] = to_string(s.ic.kind);
    if (s.ic.kind == InitialCondition::Kind::step) j["x0"] = s.ic.x0;
    if (s.ic.kind == InitialCondition::Kind::cosine_pulse) {
        j["center"] = s.ic.center;
        j["half_width"] = s.ic.half_width;
    }
    if (s.neighborhood_state) j["neighborhood_state"] = *s.neighborhood_state;
    j["velocity"] = s.is_2d() ? json::array({s.velocity_x, s.velocity_y}) : json(s.velocity_x);
    j["cfl"] = s.cfls;
    j["cfl_basis"] = std::string(to_string(s.basis));
    if (s.steps > 0)
        j["steps"] = s.steps;
    else
        j["T"] = s.final_time;
    j["bc"] = std::string(to_string(s.bc));
    j["p"] = s.params.p;
    j["tau"] = s.params.tau;
    j["eps"] = s.params.eps;
    j["indicator"] = s.params.indicator == Indicator::normalized ? "normalized" : "unnormalized";
    if (s.params.indicator == Indicator::unnormalized) j["tau_abs"] = s.params.tau_abs;
    if (!s.sweep.empty()) {
        json combos = json::array();
        for (const auto& [p, tau] : s.sweep) combos.push_back({{"p", p}, {"tau", tau}});
        j["sweep"] = std::move(combos);
    }
    json schemes = json::array();
    for (Scheme sc : s.schemes) schemes.push_back(std::string(to_string(sc)));
    j["schemes"] = std::move(schemes);
    json modes = json::array();
    for (bool m : s.pre_merge_modes) modes.push_back(on_off(m));
    j["pre_merge"] = std::move(modes);
    j["zero_flux"] = s.zero_flux;
    return j;
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

ExperimentReport run_experiment(const ExperimentSpec& spec, int jobs) {
    validate(spec);
    ExperimentReport rep;
    rep.id = spec.id;
    rep.spec = spec;

    std::vector<std::pair<double, double>> combos = spec.sweep;
    if (combos.empty()) combos.emplace_back(spec.params.p, spec.params.tau);

    const bool vary_n = spec.grid_sizes.size() > 1;
    const bool vary_cfl = spec.cfls.size() > 1;
    const bool vary_params = combos.size() > 1;
    const bool vary_pm = spec.pre_merge_modes.size() > 1;

    // Convergence rows grouped by everything except N.
    struct ErrorRow { Index n; double h, l1, linf; };
    std::map<std::string, std::vector<ErrorRow>> error_rows;
    std::map<std::string, Table> error_tables;

    with_meshes(spec, [&](const auto& meshes, const std::vector<Neighborhoods<double>>& nbhds) {
        struct Unit {
            std::size_t mesh;
            RunKey key;
            long nsteps;
            double dt;
            long stride;
        };
        std::vector<Unit> units;
        for (std::size_t mi = 0; mi < meshes.size(); ++mi) {
            const auto& mesh = meshes[mi];
            std::vector<std::pair<long, double>> plans;
            for (double cfl : spec.cfls) plans.push_back(plan_steps(spec, mesh_dt(spec, mesh, cfl)));
            long min_steps = plans.front().first;
            for (const auto& p : plans) min_steps = std::min(min_steps, p.first);
            for (std::size_t ci = 0; ci < spec.cfls.size(); ++ci) {
                const auto [nsteps, dt] = plans[ci];
                // Sample every run at the time levels of the coarsest one.
                const long stride =
                    min_steps > 0 && nsteps % min_steps == 0 ? nsteps / min_steps : 1;
                for (const auto& [p, tau] : combos)
                    for (Scheme scheme : spec.schemes)
                        for (bool pm : spec.pre_merge_modes) {
                            if (scheme == Scheme::base && pm) continue;
                            units.push_back({mi, {spec.grid_sizes[mi], spec.cfls[ci], p, tau, scheme, pm},
                                             nsteps, dt, stride});
                        }
            }
        }

        std::vector<RunResult> results(units.size());
        parallel_for(units.size(), jobs, [&](std::size_t i) {
            const auto& u = units[i];
            results[i] = simulate(spec, meshes[u.mesh], nbhds[u.mesh], u.key, u.dt, u.nsteps,
                                  u.stride, true);
        });

        for (std::size_t i = 0; i < units.size(); ++i) {
            const auto& key = units[i].key;
            RunResult& rr = results[i];
            std::vector<std::pair<std::string, std::string>> keys;
            if (vary_n) keys.emplace_back("N", std::to_string(key.n));
            if (vary_cfl) keys.emplace_back("cfl", key_value(key.cfl));
            if (vary_params) {
                keys.emplace_back("p", key_value(key.p));
                keys.emplace_back("tau", key_value(key.tau));
            }
            if (vary_pm && key.scheme != Scheme::base) keys.emplace_back("pre_merge", on_off(key.pre_merge));
            for (auto& t : rr.tables) {
                t.keys.insert(t.keys.begin(), keys.begin(), keys.end());
                rep.tables.push_back(std::move(t));
            }
            if (std::isfinite(rr.error.l1)) {
                auto group_keys = keys;
                if (vary_n) group_keys.erase(group_keys.begin());
                group_keys.emplace_back("table", "errors");
                Table t;
                t.scheme = std::string(to_string(key.scheme));
                t.keys = group_keys;
                const std::string gid = t.filename(spec.id);
                error_tables.emplace(gid, std::move(t));
                error_rows[gid].push_back({key.n, meshes[units[i].mesh].h, rr.error.l1, rr.error.linf});
            }
            rep.runs.push_back(std::move(rr.summary));
        }
    });

    // Error tables, ordered by file name.
    for (auto& [gid, t] : error_tables) {
        t.columns = {"N", "h", "L1", "rate_L1", "Linf", "rate_Linf"};
        const auto& rows = error_rows.at(gid);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            double r1 = nan, ri = nan;
            if (k > 0 && rows[k].l1 > 0 && rows[k - 1].l1 > 0) {
                const double ratio = rows[k - 1].h / rows[k].h;
                r1 = std::log(rows[k - 1].l1 / rows[k].l1) / std::log(ratio);
                ri = std::log(rows[k - 1].linf / rows[k].linf) / std::log(ratio);
            }
            t.rows.push_back({static_cast<double>(rows[k].n), rows[k].h, rows[k].l1, r1,
                              rows[k].linf, ri});
        }
        rep.tables.push_back(std::move(t));
    }

    if (!spec.sweep.empty()) {
        for (Scheme scheme : spec.schemes) {
            Table t;
            t.scheme = std::string(to_string(scheme));
            t.keys = {{"table", "sensitivity"}};
            t.columns = {"p", "tau", "L1", "Linf", "rel_dev_from_mean"};
            std::vector<std::array<double, 4>> rows;
            for (const auto& r : rep.runs)
                if (r.scheme == scheme && std::isfinite(r.stat("l1")))
                    rows.push_back({r.param("p"), r.param("tau"), r.stat("l1"), r.stat("linf")});
            double mean = 0;
            for (const auto& r : rows) mean += r[2];
            mean /= rows.empty() ? 1.0 : static_cast<double>(rows.size());
            for (const auto& r : rows)
                t.rows.push_back({r[0], r[1], r[2], r[3], (r[2] - mean) / mean});
            rep.tables.push_back(std::move(t));
        }
    }

    summarize(rep);
    add_checks(rep);
    return rep;
}

double time_run_1d(const ExperimentSpec& spec, Index n, Scheme scheme, int repeats) {
    validate(spec);
    if (spec.geometry != Geometry::line_1d)
        throw std::invalid_argument("time_run_1d needs a 1D experiment");
    const auto mesh =
        build_mesh_1d<double>(n, spec.alpha, spec.cut_position, spec.bc == BoundaryCondition::periodic);
    const auto nbhds = build_neighborhoods(mesh);
    const auto [nsteps, dt] = plan_steps(spec, mesh_dt(spec, mesh, spec.cfls.front()));
    std::vector<double> times;
    for (int k = 0; k < std::max(1, repeats); ++k) {
        RunKey key{n, spec.cfls.front(), spec.params.p, spec.params.tau, scheme,
                   spec.pre_merge_modes.front()};
        times.push_back(simulate(spec, mesh, nbhds, key, dt, nsteps, 1, false).summary.wall_seconds);
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

} // namespace umsrd::exp
