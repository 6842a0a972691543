// Acceptance suite. Each criterion prints one "PASS name: ..." or
// "FAIL name: ..." line; the exit status is nonzero if any selected
// criterion fails. Tolerances are the constants next to each check.
//
//   acceptance [--criterion NAME]...   (default: all criteria)

#include "umsrd/diagnostics.hpp"
#include "umsrd/experiments.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

using namespace umsrd;
using namespace umsrd::exp;

namespace {

struct Outcome {
    bool passed = true;
    std::vector<std::string> notes;

    /// Records one sub-check; the criterion passes only if all of them do.
    void expect(bool ok, std::string what) {
        passed = passed && ok;
        notes.push_back((ok ? "" : "[failed] ") + std::move(what));
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

ExperimentReport timed_run(int id, double& seconds) {
    const auto t0 = Clock::now();
    auto rep = run_experiment(registered_spec(id), 1);
    seconds = seconds_since(t0);
    return rep;
}

double rel_diff(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0 ? 0.0 : std::abs(a - b) / scale;
}

bool bitwise_equal(const Field<double>& a, const Field<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

/// Random 1D cut mesh and field, for the randomized criteria.
struct RandomCase {
    Mesh1D<double> mesh;
    Neighborhoods<double> nbhds;
    Field<double> u;
};

RandomCase random_case(std::mt19937_64& rng) {
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    const Index n = std::uniform_int_distribution<Index>(6, 120)(rng);
    const double alpha = uni(0.01, 0.49);
    const Index cell = std::uniform_int_distribution<Index>(1, n - 2)(rng);
    const double cut = (static_cast<double>(cell) + uni(0.0, 0.999)) / static_cast<double>(n);
    RandomCase c{build_mesh_1d<double>(n, alpha, cut), {}, Field<double>(n)};
    c.nbhds = build_neighborhoods(c.mesh);
    const double scale = std::pow(10.0, uni(-4, 4));
    for (Index i = 0; i < n; ++i) c.u(i) = scale * uni(-1, 1);
    return c;
}

// --------------------------------------------------------------------------

Outcome steady_state() {
    Outcome o;
    double secs = 0;
    const auto rep = timed_run(6, secs);
    const auto& srd = *rep.find_runs(Scheme::srd).at(0);

    const double q = srd.stat("step1_q_hat");
    o.expect(std::abs(q - 5.0 / 3.0) <= 1e-12, fmt::format("SRD step-1 Q = {:.17g}", q));
    const double d = srd.stat("max_drift_linf");
    o.expect(std::abs(d - 2.5 / 3.0) <= 1e-12, fmt::format("SRD max drift {:.17g}", d));

    const auto& drift = rep.table("umsrd", {{"series", "drift"}});
    const auto linf = drift.column("drift_linf");
    const double worst = *std::max_element(linf.begin(), linf.end());
    o.expect(linf.size() >= 100 && worst <= 1e-13,
             fmt::format("UM-SRD max drift {:.3g} over {} steps", worst, linf.size()));
    o.expect(secs < 1.0, fmt::format("runtime {:.3f} s", secs));
    return o;
}

Outcome conservation() {
    Outcome o;
    double worst = 0;
    int runs = 0, skipped = 0;
    std::string worst_label;
    for (int id : registered_ids()) {
        const auto rep = run_experiment(registered_spec(id), 1);
        for (const auto& r : rep.runs) {
            if (!r.periodic) continue;
            // The unstabilized scheme on experiment 5 overflows to inf; mass is
            // not defined once the state is non-finite.
            if (!std::isfinite(r.mass_residual) || !std::isfinite(r.stat("max_abs", 0))) {
                ++skipped;
                continue;
            }
            ++runs;
            if (r.mass_residual > worst) {
                worst = r.mass_residual;
                worst_label = fmt::format("e{} {}", id, r.label());
            }
        }
    }
    o.expect(worst <= 1e-13, fmt::format("{} periodic runs, max relative mass residual {:.3g} ({}); "
                                         "{} overflowed runs excluded",
                                         runs, worst, worst_label.empty() ? "-" : worst_label, skipped));

    std::mt19937_64 rng(20240601);
    double worst_nb = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto c = random_case(rng);
        const double s = std::uniform_real_distribution<double>(0, 1)(rng);
        const auto out = blended_apply(c.nbhds, c.u, {{0, 0, 0, s}}, c.mesh);
        double before = 0, after = 0, scale = 0;
        for (Index i : c.nbhds[0].members) {
            before += c.mesh.widths(i) * c.u(i);
            after += c.mesh.widths(i) * out(i);
            scale += c.mesh.widths(i) * std::abs(c.u(i));
        }
        worst_nb = std::max(worst_nb, std::abs(after - before) / scale);
    }
    o.expect(worst_nb <= 1e-13,
             fmt::format("1000 random (field, alpha, s): max neighborhood mass error {:.3g}", worst_nb));
    return o;
}

Outcome shutoff_identity() {
    Outcome o;
    std::mt19937_64 rng(777);
    int identity_ok = 0, low_ok = 0, high_ok = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto c = random_case(rng);
        StepOptions<double> opt;
        opt.zero_flux = true;
        identity_ok += bitwise_equal(umsrd_step(c.mesh, c.nbhds, c.u, 0.5 * c.mesh.h, 1.0, opt).u, c.u);

        opt = {};
        opt.pre_merge = trial % 2 == 1;
        const double dt = cfl_dt(c.mesh, 0.5, 1.0);
        opt.scheme = Scheme::base;
        const auto base = umsrd_step(c.mesh, c.nbhds, c.u, dt, 1.0, opt).u;
        opt.scheme = Scheme::srd;
        const auto srd = umsrd_step(c.mesh, c.nbhds, c.u, dt, 1.0, opt).u;
        opt.scheme = Scheme::umsrd;
        opt.forced_blend = 0.0;
        low_ok += bitwise_equal(umsrd_step(c.mesh, c.nbhds, c.u, dt, 1.0, opt).u, base);
        opt.forced_blend = 1.0;
        high_ok += bitwise_equal(umsrd_step(c.mesh, c.nbhds, c.u, dt, 1.0, opt).u, srd);
    }
    o.expect(identity_ok == 1000, fmt::format("U* = U^n identity {}/1000", identity_ok));
    o.expect(low_ok == 1000, fmt::format("s = 0 equals base {}/1000", low_ok));
    o.expect(high_ok == 1000, fmt::format("s = 1 equals SRD {}/1000", high_ok));
    return o;
}

Outcome tvd() {
    Outcome o;
    const auto rep = run_experiment(registered_spec(3), 1);
    for (const char* scheme : {"srd", "umsrd"}) {
        const auto& t = rep.table(scheme, {{"pre_merge", "on"}, {"series", "tvd"}});
        const auto inc = t.column("tv_increase");
        const auto excess = t.column("range_excess");
        const double max_inc = *std::max_element(inc.begin(), inc.end());
        const double max_exc = *std::max_element(excess.begin(), excess.end());
        o.expect(max_inc <= 1e-12 && max_exc <= 0.0,
                 fmt::format("{} pre_merge=on: {} steps, max TV increase {:.3g}, max range excess {:.3g}",
                             scheme, t.rows.size() - 1, max_inc, max_exc));
    }
    return o;
}

Outcome convergence() {
    Outcome o;
    double secs = 0;
    const auto rep = timed_run(1, secs);
    const auto& um = rep.table("umsrd", {{"table", "errors"}});
    const auto& srd = rep.table("srd", {{"table", "errors"}});
    const std::vector<double> ref_l1{2.438e-1, 1.341e-1, 7.027e-2, 3.592e-2};
    const std::vector<double> ref_rate{0.86, 0.93, 0.97};
    const auto l1 = um.column("L1"), rate = um.column("rate_L1"), srd_l1 = srd.column("L1");

    std::string rates;
    bool rates_ok = true;
    for (std::size_t k = 1; k < l1.size(); ++k) {
        rates += fmt::format(" {:.3f}", rate[k]);
        rates_ok = rates_ok && std::abs(rate[k] - ref_rate[k - 1]) <= 0.10;
    }
    o.expect(rates_ok && l1.size() == 4, "UM-SRD L1 rates" + rates);

    std::string ratios;
    bool ratio_ok = true, same_ok = true;
    double worst_same = 0;
    for (std::size_t k = 0; k < l1.size(); ++k) {
        const double r = l1[k] / ref_l1[k];
        ratios += fmt::format(" {:.3f}", r);
        ratio_ok = ratio_ok && r >= 0.5 && r <= 2.0;
        worst_same = std::max(worst_same, rel_diff(l1[k], srd_l1[k]));
    }
    same_ok = worst_same <= 1e-3;
    o.expect(ratio_ok, "L1 / reference" + ratios);
    o.expect(same_ok, fmt::format("max UM-SRD vs SRD relative difference {:.3g}", worst_same));
    o.expect(secs < 30.0, fmt::format("runtime {:.2f} s", secs));
    return o;
}

Outcome instability() {
    Outcome o;
    const auto rep = run_experiment(registered_spec(5), 1);
    const auto& base = rep.table("base", {{"series", "diagnostics"}});
    const auto n = base.column("n");
    const auto max_abs = base.column("max_abs");

    long first_big = -1;
    for (std::size_t k = 0; k < n.size() && n[k] <= 10; ++k)
        if (max_abs[k] > 1e6 && first_big < 0) first_big = static_cast<long>(n[k]);
    o.expect(first_big > 0, fmt::format("base max|U| > 1e6 first at step {}", first_big));

    // Growth settles after a short transient while the spike forms in the
    // small cell; steps 3 to 10 are the asymptotic regime.
    std::string growth;
    bool growth_ok = true;
    for (std::size_t k = 1; k < n.size() && n[k] <= 10; ++k) {
        const double g = max_abs[k] / max_abs[k - 1];
        growth += fmt::format(" {:.3f}", g);
        if (n[k] >= 3) growth_ok = growth_ok && g >= 8.0 && g <= 10.0;
    }
    o.expect(growth_ok, "base growth factors steps 1-10:" + growth);

    for (Scheme sc : {Scheme::srd, Scheme::umsrd}) {
        std::vector<std::string> good;
        for (const auto* r : rep.find_runs(sc))
            if (!r->diverged && r->steps == 200 && r->stat("max_abs") <= 1.0)
                good.push_back(fmt::format("pre_merge={} (max|U| {:.6g})", r->pre_merge ? "on" : "off",
                                           r->stat("max_abs")));
        std::string modes;
        for (const auto& g : good) modes += (modes.empty() ? "" : ", ") + g;
        o.expect(!good.empty(), fmt::format("{} bounded over 200 steps with {}", to_string(sc),
                                            modes.empty() ? "no mode" : modes));
    }
    return o;
}

Outcome shutoff_history() {
    Outcome o;
    const auto rep = run_experiment(registered_spec(2), 1);
    const auto& fine = rep.table("umsrd", {{"cfl", "0.01"}, {"series", "diagnostics"}});
    const auto& coarse = rep.table("umsrd", {{"cfl", "0.5"}, {"series", "diagnostics"}});

    // The pulse occupies [0.06, 0.14] and the neighborhood [0.495, 0.501]:
    // the first contact is at t = 0.355 and the pulse has left at t = 0.441.
    constexpr double quiet_until = 0.14, cross_from = 0.355, cross_to = 0.441, exit_after = 0.85;
    constexpr double s_active = 0.98, history_tol = 0.01, ratio_lo = 40, ratio_hi = 60;

    double peak_fine = 0, peak_coarse = 0, worst_history = 0;
    for (const auto* t : {&coarse, &fine}) {
        const auto time = t->column("t"), s = t->column("s_0"), du = t->column("du_max_0");
        double before = 0, during = 1, after = 0, peak = 0;
        for (std::size_t k = 1; k < time.size(); ++k) {
            if (time[k] <= quiet_until) before = std::max(before, s[k]);
            if (time[k] >= cross_from && time[k] <= cross_to) {
                during = std::min(during, s[k]);
                peak = std::max(peak, du[k]);
            }
            if (time[k] >= exit_after) after = std::max(after, s[k]);
        }
        const std::string cfl = t->key("cfl");
        o.expect(before == 0.0, fmt::format("cfl={}: max s for t <= {} is {:.3g}", cfl, quiet_until, before));
        o.expect(during >= s_active,
                 fmt::format("cfl={}: min s during crossing is {:.6g}", cfl, during));
        o.expect(after == 0.0, fmt::format("cfl={}: max s for t >= {} is {:.3g}", cfl, exit_after, after));
        (t == &fine ? peak_fine : peak_coarse) = peak;
    }

    const auto sa = coarse.column("s_0"), sb = fine.column("s_0");
    const auto ta = coarse.column("t"), tb = fine.column("t");
    bool aligned = sa.size() == sb.size();
    for (std::size_t k = 0; aligned && k < sa.size(); ++k) {
        aligned = std::abs(ta[k] - tb[k]) <= 1e-12;
        if (k > 0) worst_history = std::max(worst_history, std::abs(sa[k] - sb[k]));
    }
    o.expect(aligned && worst_history <= history_tol,
             fmt::format("{} aligned samples, max |s(0.5) - s(0.01)| = {:.3g}", sa.size(), worst_history));

    const double ratio = peak_coarse / peak_fine;
    o.expect(ratio >= ratio_lo && ratio <= ratio_hi,
             fmt::format("peak dU ratio cfl 0.5 / 0.01 during crossing = {:.2f}", ratio));
    return o;
}

Outcome parameter_sensitivity() {
    Outcome o;
    const auto rep = run_experiment(registered_spec(4), 1);
    const auto& t = rep.table("umsrd", {{"table", "sensitivity"}});
    const auto l1 = t.column("L1");
    const auto [lo, hi] = std::minmax_element(l1.begin(), l1.end());
    const double mean = std::accumulate(l1.begin(), l1.end(), 0.0) / static_cast<double>(l1.size());
    const double spread = (*hi - *lo) / mean;
    o.expect(l1.size() == 6 && spread <= 5e-4,
             fmt::format("{} combos, L1 in [{:.6e}, {:.6e}], spread {:.3g}%", l1.size(), *lo, *hi, 100 * spread));
    bool within = true;
    for (double v : l1) within = within && v / 7.027e-2 >= 0.5 && v / 7.027e-2 <= 2.0;
    o.expect(within, fmt::format("L1 / 7.027e-2 in [{:.3f}, {:.3f}]", *lo / 7.027e-2, *hi / 7.027e-2));
    return o;
}

Outcome convergence_2d() {
    Outcome o;
    double secs = 0;
    const auto rep = timed_run(7, secs);
    const std::vector<double> ref_rate{0.81, 0.90, 0.95};
    const auto um = rep.table("umsrd", {{"table", "errors"}}).column("L1");
    const auto srd = rep.table("srd", {{"table", "errors"}}).column("L1");
    const auto base = rep.table("base", {{"table", "errors"}}).column("L1");
    const auto rate = rep.table("umsrd", {{"table", "errors"}}).column("rate_L1");

    std::string rates;
    bool rates_ok = um.size() == 4;
    for (std::size_t k = 1; k < rate.size(); ++k) {
        rates += fmt::format(" {:.3f}", rate[k]);
        rates_ok = rates_ok && std::abs(rate[k] - ref_rate[k - 1]) <= 0.10;
    }
    o.expect(rates_ok, "UM-SRD L1 rates" + rates);

    double worst = 0;
    for (std::size_t k = 0; k < um.size(); ++k)
        worst = std::max({worst, rel_diff(um[k], srd[k]), rel_diff(um[k], base[k]), rel_diff(srd[k], base[k])});
    o.expect(worst <= 1e-3, fmt::format("max pairwise relative L1 difference {:.3g}", worst));
    o.expect(secs < 300.0, fmt::format("runtime {:.1f} s", secs));
    return o;
}

Outcome drift() {
    Outcome o;
    const auto rep = run_experiment(registered_spec(8), 1);
    const auto srd = rep.table("srd", {{"series", "drift"}}).column("drift_l1");
    const auto um = rep.table("umsrd", {{"series", "drift"}}).column("drift_l1");
    const auto steps = rep.table("umsrd", {{"series", "drift"}}).column("n");

    double change = 0;
    for (double v : srd) change = std::max(change, std::abs(v - srd.front()));
    o.expect(srd.front() > 1e-3 && change <= 1e-12,
             fmt::format("SRD L1 drift {:.6e}, max change after step 1 {:.3g}", srd.front(), change));
    const double worst = *std::max_element(um.begin(), um.end());
    o.expect(worst <= 1e-13 && steps.back() >= 5000,
             fmt::format("UM-SRD max L1 drift {:.3g} through step {}", worst, steps.back()));
    return o;
}

Outcome active_regime() {
    Outcome o;
    const auto rep = run_experiment(registered_spec(9), 1);
    for (const char* cfl : {"0.4", "0.005"}) {
        const auto& um = rep.table("umsrd", {{"cfl", cfl}, {"series", "error"}});
        const auto& srd = rep.table("srd", {{"cfl", cfl}, {"series", "error"}});
        const auto a = um.column("l1"), b = srd.column("l1"), smin = um.column("s_min");
        double worst = 0, lowest_s = 1;
        for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) {
            worst = std::max(worst, rel_diff(a[k], b[k]));
            if (k > 0) lowest_s = std::min(lowest_s, smin[k]);
        }
        o.expect(a.size() == b.size() && a.size() > 1 && worst <= 1e-3,
                 fmt::format("cfl={}: {} samples, max relative L1 difference {:.3g}", cfl, a.size(), worst));
        o.expect(lowest_s >= 0.98, fmt::format("cfl={}: min s over all cut cells and steps {:.6g}", cfl, lowest_s));
    }
    return o;
}

Outcome overhead() {
    Outcome o;
    const auto spec = registered_spec(1);
    constexpr int repeats = 9;
    // Interleave the two schemes so that drifting machine load hits both.
    std::vector<double> srd, um;
    for (int k = 0; k < repeats; ++k) {
        srd.push_back(time_run_1d(spec, 320, Scheme::srd, 1));
        um.push_back(time_run_1d(spec, 320, Scheme::umsrd, 1));
    }
    std::sort(srd.begin(), srd.end());
    std::sort(um.begin(), um.end());
    const double ratio = um[repeats / 2] / srd[repeats / 2];
    o.expect(ratio <= 1.10, fmt::format("median of {}: SRD {:.4f} s, UM-SRD {:.4f} s, overhead {:+.1f}%", repeats,
                                        srd[repeats / 2], um[repeats / 2], 100 * (ratio - 1)));
    return o;
}

const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
    {"steady_state", steady_state},
    {"conservation", conservation},
    {"shutoff_identity", shutoff_identity},
    {"tvd", tvd},
    {"convergence", convergence},
    {"instability", instability},
    {"shutoff_history", shutoff_history},
    {"parameter_sensitivity", parameter_sensitivity},
    {"convergence_2d", convergence_2d},
    {"drift", drift},
    {"active_regime", active_regime},
    {"overhead", overhead},
};

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> selected;
    for (int k = 1; k < argc; ++k) {
        if (std::strcmp(argv[k], "--criterion") == 0 && k + 1 < argc) {
            selected.emplace_back(argv[++k]);
        } else {
            std::cerr << "usage: acceptance [--criterion NAME]...\n";
            return 2;
        }
    }
    for (const auto& name : selected) {
        const bool known = std::any_of(criteria.begin(), criteria.end(),
                                       [&](const auto& c) { return c.first == name; });
        if (!known) {
            std::cerr << "unknown criterion '" << name << "'\n";
            return 2;
        }
    }

    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        if (!selected.empty() && std::find(selected.begin(), selected.end(), name) == selected.end()) continue;
        Outcome out;
        try {
            out = fn();
        } catch (const std::exception& e) {
            out.expect(false, std::string("exception: ") + e.what());
        }
        std::string detail;
        for (const auto& n : out.notes) detail += (detail.empty() ? "" : "; ") + n;
        std::cout << (out.passed ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
        failures += !out.passed;
    }
    return failures == 0 ? 0 : 1;
}
