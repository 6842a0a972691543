#pragma once

// State redistribution (SRD) and its update-magnitude blended variant.
//
// One step maps U^n to U^{n+1}:
//   U*      = B(U^n)                                  finite-volume update
//   dU_j    = max_{i in M_j} |U*_i - U^n_i|
//   eta_j   = dU_j / (eps + dU_j)
//   s_j     = eta_j^p / (eta_j^p + tau^p)
//   Q_j     = sum_{i in M_j} w_{i,j} V_i U*_i / Vhat_j
//   U^{n+1}_i = (1 - s_j) U*_i + s_j w_{i,j} Q_j      for i in M_j
// and U^{n+1}_i = U*_i outside every neighborhood. Neighborhoods are disjoint,
// so the set W_i of neighborhoods feeding cell i is {j}.

#include "umsrd/advection.hpp"
#include "umsrd/mesh.hpp"
#include "umsrd/types.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <stdexcept>
#include <vector>

namespace umsrd {

template <typename M>
concept CellMesh = requires(const M& m) {
    typename M::scalar_type;
    { m.volumes() } -> std::convertible_to<const Field<typename M::scalar_type>&>;
};

enum class Indicator { normalized, unnormalized };

template <typename Scalar = double>
struct BlendParams {
    Scalar p = 2;
    Scalar tau = Scalar(0.1);
    Scalar eps = Scalar(1e-14);
    Indicator indicator = Indicator::normalized;
    Scalar tau_abs = 1; ///< scale of the unnormalized indicator

    void validate() const {
        if (!(p >= 1)) throw std::invalid_argument("blend exponent p must be >= 1");
        if (!(tau > 0)) throw std::invalid_argument("blend threshold tau must be > 0");
        if (!(eps > 0)) throw std::invalid_argument("indicator floor eps must be > 0");
        if (indicator == Indicator::unnormalized && !(tau_abs > 0))
            throw std::invalid_argument("unnormalized indicator scale must be > 0");
    }
};

template <typename Scalar>
struct BlendRecord {
    Index j = 0;
    Scalar du_max = 0;
    Scalar eta = 0;
    Scalar s = 0;
};

/// Q*_j: weighted volume average of `u` over one neighborhood.
template <typename Scalar>
Scalar neighborhood_average(const Neighborhood<Scalar>& nb, const Field<Scalar>& u,
                            const Field<Scalar>& volumes) {
    if (!(nb.weighted_volume > 0))
        throw std::invalid_argument("neighborhood_average: non-positive weighted volume");
    Scalar mass = 0;
    for (std::size_t k = 0; k < nb.members.size(); ++k) {
        const Index i = nb.members[k];
        mass += nb.weights[k] * volumes(i) * u(i);
    }
    return mass / nb.weighted_volume;
}

template <CellMesh M>
auto neighborhood_average(const Neighborhood<typename M::scalar_type>& nb,
                          const Field<typename M::scalar_type>& u, const M& mesh) {
    return neighborhood_average(nb, u, mesh.volumes());
}

/// Standard SRD: every member of M_j receives w_{i,j} Q*_j.
template <typename Scalar>
Field<Scalar> srd_apply(const Neighborhoods<Scalar>& nbhds, const Field<Scalar>& u_star,
                        const Field<Scalar>& volumes) {
    Field<Scalar> out = u_star;
    for (const auto& nb : nbhds) {
        const Scalar q = neighborhood_average(nb, u_star, volumes);
        for (std::size_t k = 0; k < nb.members.size(); ++k)
            out(nb.members[k]) = nb.weights[k] * q;
    }
    return out;
}

template <CellMesh M>
auto srd_apply(const Neighborhoods<typename M::scalar_type>& nbhds,
               const Field<typename M::scalar_type>& u_star, const M& mesh) {
    return srd_apply(nbhds, u_star, mesh.volumes());
}

/// Replace member values by their neighborhood average before the
/// finite-volume update.
template <typename Scalar>
Field<Scalar> pre_merge(const Neighborhoods<Scalar>& nbhds, const Field<Scalar>& u,
                        const Field<Scalar>& volumes) {
    return srd_apply(nbhds, u, volumes);
}

template <CellMesh M>
auto pre_merge(const Neighborhoods<typename M::scalar_type>& nbhds,
               const Field<typename M::scalar_type>& u, const M& mesh) {
    return pre_merge(nbhds, u, mesh.volumes());
}

template <typename Scalar>
Scalar update_magnitude(const Neighborhood<Scalar>& nb, const Field<Scalar>& u_star,
                        const Field<Scalar>& u_n) {
    Scalar du = 0;
    for (Index i : nb.members) du = std::max(du, Scalar(std::abs(u_star(i) - u_n(i))));
    return du;
}

template <typename Scalar>
Scalar indicator_eta(Scalar du_max, Scalar eps) {
    return du_max / (eps + du_max);
}

/// Normalized shut-off s = eta^p / (eta^p + tau^p).
template <typename Scalar>
Scalar blend_parameter(Scalar eta, const BlendParams<Scalar>& params) {
    const Scalar ep = std::pow(eta, params.p);
    return ep / (ep + std::pow(params.tau, params.p));
}

/// Unnormalized shut-off driven by the raw update magnitude.
template <typename Scalar>
Scalar blend_parameter_unnormalized(Scalar du_max, Scalar tau_abs) {
    return std::min(Scalar(1), du_max / tau_abs);
}

template <typename Scalar>
BlendRecord<Scalar> blend_record(const Neighborhood<Scalar>& nb, const Field<Scalar>& u_star,
                                 const Field<Scalar>& u_n, const BlendParams<Scalar>& params) {
    BlendRecord<Scalar> r;
    r.j = nb.id;
    r.du_max = update_magnitude(nb, u_star, u_n);
    r.eta = indicator_eta(r.du_max, params.eps);
    r.s = params.indicator == Indicator::normalized
              ? blend_parameter(r.eta, params)
              : blend_parameter_unnormalized(r.du_max, params.tau_abs);
    return r;
}

/// R(s) = (1 - s) Id + s S applied per neighborhood. Neighborhoods with s == 0
/// are left untouched, so their members equal U* bit for bit.
template <typename Scalar>
Field<Scalar> blended_apply(const Neighborhoods<Scalar>& nbhds, const Field<Scalar>& u_star,
                            const std::vector<BlendRecord<Scalar>>& records,
                            const Field<Scalar>& volumes) {
    if (records.size() != nbhds.size())
        throw std::invalid_argument("blended_apply: one blend record per neighborhood required");
    Field<Scalar> out = u_star;
    for (std::size_t n = 0; n < nbhds.size(); ++n) {
        const Scalar s = records[n].s;
        if (s == 0) continue;
        const auto& nb = nbhds[n];
        const Scalar q = neighborhood_average(nb, u_star, volumes);
        for (std::size_t k = 0; k < nb.members.size(); ++k) {
            const Index i = nb.members[k];
            out(i) = (1 - s) * u_star(i) + s * (nb.weights[k] * q);
        }
    }
    return out;
}

template <CellMesh M>
auto blended_apply(const Neighborhoods<typename M::scalar_type>& nbhds,
                   const Field<typename M::scalar_type>& u_star,
                   const std::vector<BlendRecord<typename M::scalar_type>>& records,
                   const M& mesh) {
    return blended_apply(nbhds, u_star, records, mesh.volumes());
}

// ---------------------------------------------------------------------------
// Full step
// ---------------------------------------------------------------------------

template <typename Scalar>
struct StepOptions {
    Scheme scheme = Scheme::umsrd;
    bool pre_merge = false;
    BlendParams<Scalar> params{};
    /// Skip the finite-volume update (U* = U^n, or the pre-merged state).
    bool zero_flux = false;
    /// Override every s_j (umsrd only); used to check the endpoint reductions.
    std::optional<Scalar> forced_blend{};
};

template <typename Scalar>
struct StepResult {
    Field<Scalar> u;
    std::vector<BlendRecord<Scalar>> records;
};

/// Redistribution half of the step: blend records from (U*, U^n) and the
/// blended assignment. Records are produced for every scheme; `s` is 0 for
/// base and 1 for srd.
template <typename Scalar>
StepResult<Scalar> redistribute(const Field<Scalar>& volumes, const Neighborhoods<Scalar>& nbhds,
                                const Field<Scalar>& u_n, const Field<Scalar>& u_star,
                                const StepOptions<Scalar>& opt) {
    StepResult<Scalar> res;
    res.records.reserve(nbhds.size());
    for (const auto& nb : nbhds) {
        auto r = blend_record(nb, u_star, u_n, opt.params);
        switch (opt.scheme) {
        case Scheme::base: r.s = 0; break;
        case Scheme::srd: r.s = 1; break;
        case Scheme::umsrd:
            if (opt.forced_blend) r.s = *opt.forced_blend;
            break;
        }
        res.records.push_back(r);
    }
    res.u = opt.scheme == Scheme::base ? u_star : blended_apply(nbhds, u_star, res.records, volumes);
    return res;
}

/// One time step with an arbitrary base update `base : Field -> Field`.
template <typename Scalar, typename BaseUpdate>
StepResult<Scalar> advance(const Field<Scalar>& volumes, const Neighborhoods<Scalar>& nbhds,
                           const Field<Scalar>& u_n, BaseUpdate&& base,
                           const StepOptions<Scalar>& opt) {
    Field<Scalar> u_star = opt.pre_merge ? pre_merge(nbhds, u_n, volumes) : u_n;
    if (!opt.zero_flux) u_star = base(u_star);
    auto res = redistribute(volumes, nbhds, u_n, u_star, opt);
    if (opt.scheme != Scheme::base && !res.u.allFinite())
        throw DivergenceError("non-finite cell values after a stabilized step", -1);
    return res;
}

template <typename Scalar>
StepResult<Scalar> umsrd_step(const Mesh1D<Scalar>& mesh, const Neighborhoods<Scalar>& nbhds,
                              const Field<Scalar>& u_n, Scalar dt, Scalar a,
                              const StepOptions<Scalar>& opt,
                              std::optional<Scalar> inflow = std::nullopt) {
    return advance(mesh.volumes(), nbhds, u_n,
                   [&](const Field<Scalar>& u) { return fv_step_1d(mesh, u, dt, a, inflow); },
                   opt);
}

template <typename Scalar>
StepResult<Scalar> umsrd_step(const Mesh2D<Scalar>& mesh, const Neighborhoods<Scalar>& nbhds,
                              const Field<Scalar>& u_n, Scalar dt, Scalar ax, Scalar ay,
                              const StepOptions<Scalar>& opt,
                              const InflowFn<Scalar>* inflow = nullptr) {
    return advance(mesh.volumes(), nbhds, u_n,
                   [&](const Field<Scalar>& u) {
                       return fv_step_2d_split(mesh, u, dt, ax, ay, inflow);
                   },
                   opt);
}

} // namespace umsrd
