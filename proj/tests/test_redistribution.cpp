#include "umsrd/redistribution.hpp"

#include <doctest.h>

#include <cmath>

using namespace umsrd;

namespace {

struct Setup {
    Mesh1D<double> mesh;
    Neighborhoods<double> nbhds;
    Field<double> u;
};

/// N = 50, alpha = 0.2: U_{j-1} = 1.5, U_j = 2.5, zero elsewhere.
Setup steady_state_data() {
    Setup s{build_mesh_1d<double>(50, 0.2, 0.5), {}, Field<double>::Zero(50)};
    s.nbhds = build_neighborhoods(s.mesh);
    s.u(24) = 1.5;
    s.u(25) = 2.5;
    return s;
}

} // namespace

TEST_SUITE("redistribution") {

TEST_CASE("neighborhood average of the steady-state data is 5/3") {
    const auto s = steady_state_data();
    const double q = neighborhood_average(s.nbhds[0], s.u, s.mesh);
    CHECK(std::abs(q - 5.0 / 3.0) <= 1e-15);
    // The simplified form (1 - alpha) U_{j-1} + alpha U_j = 1.7 is not the
    // volume-weighted average.
    CHECK(std::abs(q - (0.8 * 1.5 + 0.2 * 2.5)) > 1e-2);
}

TEST_CASE("neighborhood average of a constant field") {
    const auto m = build_mesh_1d<double>(20, 0.3, 0.5);
    const auto nb = build_neighborhoods(m);
    CHECK(neighborhood_average(nb[0], Field<double>::Constant(20, 3.25), m) == doctest::Approx(3.25));
}

TEST_CASE("neighborhood average at alpha = 0.05") {
    const auto m = build_mesh_1d<double>(100, 0.05, 0.5);
    const auto nb = build_neighborhoods(m);
    Field<double> u = Field<double>::Zero(100);
    u(50) = 1.0;
    // (h * 0 + 0.05h * 1) / (1.05h)
    CHECK(neighborhood_average(nb[0], u, m) == doctest::Approx(0.05 / 1.05).epsilon(1e-14));
}

TEST_CASE("neighborhood average rejects non-positive weighted volume") {
    Neighborhood<double> nb;
    nb.members = {0};
    nb.weights = {1};
    nb.weighted_volume = 0;
    const Field<double> ones = Field<double>::Ones(2);
    CHECK_THROWS_AS(neighborhood_average(nb, ones, ones),
                    std::invalid_argument);
}

TEST_CASE("SRD flattens the neighborhood") {
    const auto s = steady_state_data();
    const auto out = srd_apply(s.nbhds, s.u, s.mesh);
    CHECK(out(24) == doctest::Approx(5.0 / 3.0));
    CHECK(out(25) == doctest::Approx(5.0 / 3.0));
    CHECK(std::max(std::abs(out(24) - 1.5), std::abs(out(25) - 2.5)) ==
          doctest::Approx(0.8333333333333333));
    for (Index i = 0; i < 50; ++i)
        if (i != 24 && i != 25) CHECK(out(i) == 0.0);
}

TEST_CASE("SRD is the identity without neighborhoods and on constants") {
    const auto m = build_uniform_mesh_1d<double>(10);
    Field<double> u = Field<double>::LinSpaced(10, -1, 1);
    CHECK(srd_apply(Neighborhoods<double>{}, u, m) == u);
    const auto m2 = build_mesh_1d<double>(10, 0.2, 0.5);
    const Field<double> c = Field<double>::Constant(10, 0.4);
    CHECK((srd_apply(build_neighborhoods(m2), c, m2) - c).cwiseAbs().maxCoeff() <= 1e-16);
}

TEST_CASE("pre-merge") {
    const auto s = steady_state_data();
    const auto pm = pre_merge(s.nbhds, s.u, s.mesh);
    CHECK(pm(24) == doctest::Approx(5.0 / 3.0));
    CHECK(pm(25) == doctest::Approx(5.0 / 3.0));

    // Equal values across the partner interface: the small cell sees no
    // inflow jump at any local CFL, so it keeps the merged value.
    const auto m = build_mesh_1d<double>(100, 0.05, 0.5);
    const auto nb = build_neighborhoods(m);
    Field<double> u = Field<double>::Zero(100);
    u(49) = 0.3;
    u(50) = 1.0;
    const auto merged = pre_merge(nb, u, m);
    const auto star = fv_step_1d(m, merged, cfl_dt(m, 0.5, 1.0), 1.0);
    CHECK(star(50) == doctest::Approx(merged(50)).epsilon(1e-15));
}

TEST_CASE("update magnitude") {
    const auto m = build_mesh_1d<double>(10, 0.2, 0.5);
    const auto nb = build_neighborhoods(m)[0];
    Field<double> un = Field<double>::Zero(10), us = Field<double>::Zero(10);
    CHECK(update_magnitude(nb, us, un) == 0.0);
    us(nb.members[0]) = 0.1;
    us(nb.members[1]) = -0.3;
    CHECK(update_magnitude(nb, us, un) == doctest::Approx(0.3));
}

TEST_CASE("indicator") {
    CHECK(indicator_eta(0.0, 1e-14) == 0.0);
    CHECK(indicator_eta(1e-14, 1e-14) == doctest::Approx(0.5));
    const double eta = indicator_eta(0.1, 1e-14);
    CHECK(std::abs(eta - (1 - 1e-13)) <= 1e-15);
}

TEST_CASE("blend parameter") {
    BlendParams<double> bp;
    CHECK(blend_parameter(0.0, bp) == 0.0);
    CHECK(blend_parameter(1.0, bp) == doctest::Approx(1.0 / 1.01));
    CHECK(blend_parameter(1.0, bp) == doctest::Approx(0.9901).epsilon(1e-4));
    for (double p : {1.0, 2.0, 3.5, 8.0}) {
        bp.p = p;
        CHECK(blend_parameter(bp.tau, bp) == doctest::Approx(0.5));
    }
    CHECK(blend_parameter_unnormalized(0.0, 0.5) == 0.0);
    CHECK(blend_parameter_unnormalized(0.25, 0.5) == 0.5);
    CHECK(blend_parameter_unnormalized(2.0, 0.5) == 1.0);
}

TEST_CASE("blend parameters are validated") {
    BlendParams<double> bp;
    bp.p = 0.5;
    CHECK_THROWS_AS(bp.validate(), std::invalid_argument);
    bp = {};
    bp.tau = 0;
    CHECK_THROWS_AS(bp.validate(), std::invalid_argument);
    bp = {};
    bp.eps = 0;
    CHECK_THROWS_AS(bp.validate(), std::invalid_argument);
    bp = {};
    CHECK_NOTHROW(bp.validate());
}

TEST_CASE("blended apply at s = 0, 1/2 and 1") {
    const auto s = steady_state_data();
    std::vector<BlendRecord<double>> rec{{0, 0, 0, 0.0}};
    const auto id = blended_apply(s.nbhds, s.u, rec, s.mesh);
    CHECK(id == s.u);

    rec[0].s = 1.0;
    CHECK(blended_apply(s.nbhds, s.u, rec, s.mesh) == srd_apply(s.nbhds, s.u, s.mesh));

    rec[0].s = 0.5;
    const auto half = blended_apply(s.nbhds, s.u, rec, s.mesh);
    CHECK(half(24) == doctest::Approx(0.5 * 1.5 + 0.5 * 5.0 / 3.0));
    CHECK(half(24) == doctest::Approx(1.5833333333333333));
    CHECK(half(25) == doctest::Approx(0.5 * 2.5 + 0.5 * 5.0 / 3.0));

    CHECK_THROWS_AS(blended_apply(s.nbhds, s.u, {}, s.mesh), std::invalid_argument);
}

TEST_CASE("zero-flux step: UM-SRD keeps the state, SRD flattens it") {
    const auto s = steady_state_data();
    StepOptions<double> opt;
    opt.zero_flux = true;
    const auto um = umsrd_step(s.mesh, s.nbhds, s.u, 0.01, 1.0, opt);
    CHECK(um.u == s.u);
    REQUIRE(um.records.size() == 1);
    CHECK(um.records[0].s == 0.0);
    CHECK(um.records[0].eta == 0.0);

    opt.scheme = Scheme::srd;
    const auto srd = umsrd_step(s.mesh, s.nbhds, s.u, 0.01, 1.0, opt);
    CHECK(std::abs(srd.u(24) - 5.0 / 3.0) <= 1e-15);
    CHECK(std::abs(srd.u(25) - 5.0 / 3.0) <= 1e-15);
    CHECK(srd.u != s.u);
}

TEST_CASE("step conserves mass for every scheme") {
    const auto m = build_mesh_1d<double>(64, 0.1, 0.3);
    const auto nb = build_neighborhoods(m);
    const auto u = initial_condition(m, InitialCondition{});
    const double m0 = m.volumes().dot(u);
    for (Scheme sc : {Scheme::base, Scheme::srd, Scheme::umsrd}) {
        for (bool pm : {false, true}) {
            StepOptions<double> opt;
            opt.scheme = sc;
            opt.pre_merge = pm;
            const auto r = umsrd_step(m, nb, u, cfl_dt(m, 0.5, 1.0), 1.0, opt);
            CHECK(std::abs(m.volumes().dot(r.u) - m0) <= 1e-13 * m.volumes().dot(u.cwiseAbs()));
        }
    }
}

TEST_CASE("base scheme records s = 0 and returns U*") {
    const auto m = build_mesh_1d<double>(32, 0.2, 0.5);
    const auto nb = build_neighborhoods(m);
    const auto u = initial_condition(m, InitialCondition{});
    StepOptions<double> opt;
    opt.scheme = Scheme::base;
    const double dt = cfl_dt(m, 0.5, 1.0);
    const auto r = umsrd_step(m, nb, u, dt, 1.0, opt);
    CHECK(r.u == fv_step_1d(m, u, dt, 1.0));
    CHECK(r.records[0].s == 0.0);
    CHECK(r.records[0].du_max > 0);
}

TEST_CASE("non-finite stabilized output is reported as divergence") {
    const auto m = build_mesh_1d<double>(16, 0.2, 0.5);
    const auto nb = build_neighborhoods(m);
    Field<double> u = Field<double>::Zero(16);
    u(3) = std::numeric_limits<double>::infinity();
    StepOptions<double> opt;
    opt.scheme = Scheme::srd;
    CHECK_THROWS_AS(umsrd_step(m, nb, u, 0.01, 1.0, opt), DivergenceError);
    opt.scheme = Scheme::base;
    CHECK_NOTHROW(umsrd_step(m, nb, u, 0.01, 1.0, opt));
}

TEST_CASE("unnormalized indicator mode") {
    const auto m = build_mesh_1d<double>(20, 0.2, 0.5);
    const auto nb = build_neighborhoods(m);
    const auto u = initial_condition(m, InitialCondition{});
    StepOptions<double> opt;
    opt.params.indicator = Indicator::unnormalized;
    opt.params.tau_abs = 10.0;
    const auto r = umsrd_step(m, nb, u, cfl_dt(m, 0.5, 1.0), 1.0, opt);
    CHECK(r.records[0].s == doctest::Approx(r.records[0].du_max / 10.0));
    CHECK(r.records[0].s < 0.1);
}

TEST_CASE("two-dimensional step on the tilted mesh") {
    const auto m = build_mesh_2d_tilted<double>(20, 0.3, 0.5, 0.05);
    const auto nb = build_neighborhoods(m);
    REQUIRE(!nb.empty());
    const auto u = initial_condition(m, InitialCondition{InitialCondition::Kind::tilted_field});
    StepOptions<double> opt;
    const auto r = umsrd_step(m, nb, u, cfl_dt(m, 0.4, 1.0, 0.0), 1.0, 0.0, opt);
    CHECK(r.records.size() == nb.size());
    CHECK(std::abs(m.volumes().dot(r.u) - m.volumes().dot(u)) <= 1e-15);
    for (const auto& rec : r.records) CHECK(rec.s > 0.98);
}

} // TEST_SUITE
