#pragma once

// First-order upwind finite-volume updates for u_t + a . grad u = 0, plus the
// initial conditions and exact solutions used by the experiments.

#include "umsrd/mesh.hpp"
#include "umsrd/types.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

namespace umsrd {

template <typename Scalar>
constexpr Scalar upwind_flux(Scalar u_left, Scalar a) {
    return a * u_left;
}

/// U*_i = U_i - (a dt / V_i) (U_i - U_{i-1}), every cell with its own volume.
/// On a non-periodic mesh `inflow` supplies U_{-1}.
template <typename Scalar>
Field<Scalar> fv_step_1d(const Mesh1D<Scalar>& mesh, const Field<Scalar>& u, Scalar dt,
                         Scalar a, std::optional<Scalar> inflow = std::nullopt) {
    const Index n = mesh.size();
    if (u.size() != n) throw std::invalid_argument("fv_step_1d: field size mismatch");
    if (!mesh.periodic && !inflow)
        throw std::invalid_argument("fv_step_1d: non-periodic mesh needs an inflow value");
    Field<Scalar> out(n);
    const Field<Scalar>& v = mesh.volumes();
    for (Index i = 0; i < n; ++i) {
        const Scalar left = i > 0 ? u(i - 1) : (mesh.periodic ? u(n - 1) : *inflow);
        out(i) = u(i) - (dt / v(i)) * (upwind_flux(u(i), a) - upwind_flux(left, a));
    }
    return out;
}

/// Inflow state for boundary faces. It is evaluated at the centroid of the
/// ghost cell behind the face (the face midpoint moved h/2 outward), so the
/// boundary flux lags by half a cell exactly like the interior upwind fluxes.
template <typename Scalar>
using InflowFn = std::function<Scalar(const Vec2<Scalar>&)>;

namespace detail {

/// One upwind sweep with the constant velocity `vel` over every face.
template <typename Scalar>
void upwind_sweep(const Mesh2D<Scalar>& mesh, Field<Scalar>& u, Scalar dt,
                  const Vec2<Scalar>& vel, const InflowFn<Scalar>* inflow) {
    Field<Scalar> net = Field<Scalar>::Zero(u.size());
    for (const auto& f : mesh.faces) {
        const Scalar vn = vel.dot(f.normal);
        const Scalar flux = vn > 0 ? vn * u(f.a) : vn * u(f.b);
        net(f.a) -= flux;
        net(f.b) += flux;
    }
    for (const auto& bf : mesh.boundary_faces) {
        const Scalar vn = vel.dot(bf.normal);
        if (vn > 0) {
            net(bf.cell) -= vn * u(bf.cell);
        } else if (vn < 0) {
            if (!inflow) throw std::invalid_argument("inflow boundary needs an inflow state");
            const Vec2<Scalar> ghost = bf.midpoint + bf.normal.normalized() * (mesh.h / 2);
            net(bf.cell) -= vn * (*inflow)(ghost);
        }
    }
    u.array() += dt * net.array() / mesh.volumes().array();
}

} // namespace detail

/// Godunov splitting: a full x-sweep followed by a full y-sweep.
template <typename Scalar>
Field<Scalar> fv_step_2d_split(const Mesh2D<Scalar>& mesh, const Field<Scalar>& u,
                               Scalar dt, Scalar ax, Scalar ay,
                               const InflowFn<Scalar>* inflow = nullptr) {
    if (u.size() != mesh.size())
        throw std::invalid_argument("fv_step_2d_split: field size mismatch");
    Field<Scalar> out = u;
    if (ax != 0) detail::upwind_sweep(mesh, out, dt, Vec2<Scalar>(ax, 0), inflow);
    if (ay != 0) detail::upwind_sweep(mesh, out, dt, Vec2<Scalar>(0, ay), inflow);
    return out;
}

template <typename Scalar>
Scalar cfl_dt(const Mesh1D<Scalar>& mesh, Scalar cfl, Scalar a,
              CflBasis basis = CflBasis::full_mesh) {
    if (!(cfl > 0)) throw std::invalid_argument("cfl_dt: CFL number must be positive");
    const Scalar width = basis == CflBasis::small_cell && mesh.has_cut() ? mesh.alpha * mesh.h
                                                                         : mesh.h;
    return cfl * width / std::abs(a);
}

template <typename Scalar>
Scalar cfl_dt(const Mesh2D<Scalar>& mesh, Scalar cfl, Scalar ax, Scalar ay,
              CflBasis basis = CflBasis::full_mesh) {
    if (!(cfl > 0)) throw std::invalid_argument("cfl_dt: CFL number must be positive");
    const Scalar width = basis == CflBasis::small_cell ? mesh.min_fraction() * mesh.h : mesh.h;
    return cfl * width / (std::abs(ax) + std::abs(ay));
}

// ---------------------------------------------------------------------------
// Initial conditions and exact solutions
// ---------------------------------------------------------------------------

struct InitialCondition {
    enum class Kind { sine, step, cosine_pulse, product_sine, tilted_field };
    Kind kind = Kind::sine;
    double x0 = 0.5;          // step: u = 1 for x < x0
    double center = 0.10;     // cosine_pulse
    double half_width = 0.04; // cosine_pulse

    int dimension() const {
        return kind == Kind::product_sine || kind == Kind::tilted_field ? 2 : 1;
    }
};

inline std::string to_string(InitialCondition::Kind kind);
inline InitialCondition::Kind parse_ic_kind(const std::string& name);

namespace detail {

template <typename Scalar>
Scalar wrap_unit(Scalar x) {
    Scalar r = x - std::floor(x);
    return r >= 1 ? r - 1 : r;
}

template <typename Scalar>
Scalar profile_1d(const InitialCondition& ic, Scalar x) {
    constexpr Scalar two_pi = 2 * std::numbers::pi_v<Scalar>;
    switch (ic.kind) {
    case InitialCondition::Kind::sine:
        return std::sin(two_pi * x);
    case InitialCondition::Kind::step:
        return wrap_unit(x) < Scalar(ic.x0) ? Scalar(1) : Scalar(0);
    case InitialCondition::Kind::cosine_pulse: {
        const Scalar d = wrap_unit(x) - Scalar(ic.center);
        const Scalar hw = Scalar(ic.half_width);
        if (std::abs(d) > hw) return 0;
        return Scalar(0.5) * (1 + std::cos(std::numbers::pi_v<Scalar> * d / hw));
    }
    default:
        throw std::invalid_argument("two-dimensional initial condition on a 1D mesh");
    }
}

template <typename Scalar>
Scalar profile_2d(const InitialCondition& ic, Scalar x, Scalar y) {
    constexpr Scalar two_pi = 2 * std::numbers::pi_v<Scalar>;
    switch (ic.kind) {
    case InitialCondition::Kind::product_sine:
        return std::sin(two_pi * x) * std::sin(two_pi * y);
    case InitialCondition::Kind::tilted_field:
        return std::sin(two_pi * x) * std::cos(two_pi * y);
    default:
        throw std::invalid_argument("one-dimensional initial condition on a 2D mesh");
    }
}

} // namespace detail

/// Exact solution u(x - a t) sampled at cell centroids.
template <typename Scalar>
Field<Scalar> exact_solution(const Mesh1D<Scalar>& mesh, const InitialCondition& ic,
                             Scalar a, Scalar t) {
    if (ic.dimension() != 1)
        throw std::invalid_argument("two-dimensional initial condition on a 1D mesh");
    Field<Scalar> u(mesh.size());
    for (Index i = 0; i < mesh.size(); ++i)
        u(i) = detail::profile_1d(ic, mesh.centers(i) - a * t);
    return u;
}

template <typename Scalar>
Field<Scalar> initial_condition(const Mesh1D<Scalar>& mesh, const InitialCondition& ic) {
    return exact_solution(mesh, ic, Scalar(0), Scalar(0));
}

template <typename Scalar>
Scalar exact_value_2d(const InitialCondition& ic, Scalar x, Scalar y, Scalar ax, Scalar ay,
                      Scalar t) {
    return detail::profile_2d(ic, x - ax * t, y - ay * t);
}

template <typename Scalar>
Field<Scalar> exact_solution(const Mesh2D<Scalar>& mesh, const InitialCondition& ic,
                             Scalar ax, Scalar ay, Scalar t) {
    if (ic.dimension() != 2)
        throw std::invalid_argument("one-dimensional initial condition on a 2D mesh");
    Field<Scalar> u(mesh.size());
    for (Index c = 0; c < mesh.size(); ++c)
        u(c) = exact_value_2d(ic, mesh.centroids(c, 0), mesh.centroids(c, 1), ax, ay, t);
    return u;
}

template <typename Scalar>
Field<Scalar> initial_condition(const Mesh2D<Scalar>& mesh, const InitialCondition& ic) {
    return exact_solution(mesh, ic, Scalar(0), Scalar(0), Scalar(0));
}

inline std::string to_string(InitialCondition::Kind kind) {
    switch (kind) {
    case InitialCondition::Kind::sine: return "sine";
    case InitialCondition::Kind::step: return "step";
    case InitialCondition::Kind::cosine_pulse: return "cosine_pulse";
    case InitialCondition::Kind::product_sine: return "product_sine";
    case InitialCondition::Kind::tilted_field: return "tilted_field";
    }
    return "?";
}

inline InitialCondition::Kind parse_ic_kind(const std::string& name) {
    using K = InitialCondition::Kind;
    if (name == "sine") return K::sine;
    if (name == "step") return K::step;
    if (name == "cosine_pulse") return K::cosine_pulse;
    if (name == "product_sine") return K::product_sine;
    if (name == "tilted_field") return K::tilted_field;
    throw std::invalid_argument("unknown initial condition '" + name + "'");
}

} // namespace umsrd
