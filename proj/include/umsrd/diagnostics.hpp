#pragma once

#include "umsrd/mesh.hpp"
#include "umsrd/redistribution.hpp"
#include "umsrd/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace umsrd {

template <typename Scalar>
struct ErrorNorms {
    Scalar l1 = 0;
    Scalar linf = 0;
};

/// Volume-weighted L1 and max-norm of U - exact.
template <typename Scalar>
ErrorNorms<Scalar> error_norms(const Field<Scalar>& u, const Field<Scalar>& exact,
                               const Field<Scalar>& volumes) {
    if (u.size() != exact.size() || u.size() != volumes.size())
        throw std::invalid_argument("error_norms: field sizes differ");
    const auto diff = (u - exact).array().abs();
    return {(volumes.array() * diff).sum(), diff.size() ? diff.maxCoeff() : Scalar(0)};
}

template <CellMesh M>
auto error_norms(const Field<typename M::scalar_type>& u,
                 const Field<typename M::scalar_type>& exact, const M& mesh) {
    return error_norms(u, exact, mesh.volumes());
}

/// Observed order between two refinement levels with h halved.
template <typename Scalar>
Scalar convergence_order(Scalar e_coarse, Scalar e_fine) {
    if (!(e_coarse > 0) || !(e_fine > 0))
        throw std::invalid_argument("convergence_order: errors must be positive");
    return std::log(e_coarse / e_fine) / std::log(Scalar(2));
}

/// sum_i |U_i - U_{i-1}| including the periodic wrap term.
template <typename Scalar>
Scalar total_variation(const Field<Scalar>& u) {
    const Index n = u.size();
    if (n < 2) return 0;
    Scalar tv = std::abs(u(0) - u(n - 1));
    for (Index i = 1; i < n; ++i) tv += std::abs(u(i) - u(i - 1));
    return tv;
}

template <typename Scalar>
Scalar total_variation(const Field<Scalar>& u, const Mesh1D<Scalar>& mesh) {
    if (!mesh.periodic) {
        Scalar tv = 0;
        for (Index i = 1; i < u.size(); ++i) tv += std::abs(u(i) - u(i - 1));
        return tv;
    }
    return total_variation(u);
}

/// Sum of jumps across interior faces.
template <typename Scalar>
Scalar total_variation(const Field<Scalar>& u, const Mesh2D<Scalar>& mesh) {
    Scalar tv = 0;
    for (const auto& f : mesh.faces) tv += std::abs(u(f.a) - u(f.b));
    return tv;
}

template <typename Scalar>
Scalar mass(const Field<Scalar>& u, const Field<Scalar>& volumes) {
    return volumes.dot(u);
}

/// Scale of the mass sum: sum_i V_i |U_i|.
template <typename Scalar>
Scalar absolute_mass(const Field<Scalar>& u, const Field<Scalar>& volumes) {
    return (volumes.array() * u.array().abs()).sum();
}

template <typename Scalar>
struct Drift {
    Scalar l1_cells = 0;  ///< sum_i |U^k_i - U^0_i|
    Scalar l1_volume = 0; ///< sum_i V_i |U^k_i - U^0_i|
    Scalar linf = 0;
};

template <typename Scalar>
Drift<Scalar> drift(const Field<Scalar>& u_k, const Field<Scalar>& u_0,
                    const Field<Scalar>& volumes) {
    const auto diff = (u_k - u_0).array().abs();
    return {diff.sum(), (volumes.array() * diff).sum(), diff.size() ? diff.maxCoeff() : Scalar(0)};
}

template <typename Scalar>
struct StepDiagnostics {
    long n = 0;
    Scalar t = 0;
    Scalar tv = 0;
    Scalar mass = 0;
    Scalar max_abs = 0;
    std::vector<BlendRecord<Scalar>> blend_records;
};

template <typename Scalar, typename Mesh>
StepDiagnostics<Scalar> record_step(long n, Scalar t, const Field<Scalar>& u, const Mesh& mesh,
                                    std::vector<BlendRecord<Scalar>> records = {}) {
    StepDiagnostics<Scalar> d;
    d.n = n;
    d.t = t;
    d.tv = total_variation(u, mesh);
    d.mass = mass(u, mesh.volumes());
    d.max_abs = u.size() ? u.array().abs().maxCoeff() : Scalar(0);
    d.blend_records = std::move(records);
    return d;
}

/// Per-run step history plus the running conservation residual.
template <typename Scalar>
class Recorder {
public:
    void append(StepDiagnostics<Scalar> d, Scalar abs_mass) {
        observe(d.mass, abs_mass);
        rows_.push_back(std::move(d));
    }

    /// Update the conservation residual without storing a row.
    void observe(Scalar mass, Scalar abs_mass) {
        if (!started_) {
            mass0_ = mass;
            started_ = true;
        }
        scale_ = std::max(scale_, abs_mass);
        if (scale_ > 0)
            max_residual_ = std::max(max_residual_, Scalar(std::abs(mass - mass0_) / scale_));
    }

    const std::vector<StepDiagnostics<Scalar>>& rows() const { return rows_; }
    /// max_n |M_n - M_0| / max_k sum_i V_i |U^k_i|
    Scalar max_mass_residual() const { return max_residual_; }

private:
    std::vector<StepDiagnostics<Scalar>> rows_;
    bool started_ = false;
    Scalar mass0_ = 0;
    Scalar scale_ = 0;
    Scalar max_residual_ = 0;
};

} // namespace umsrd
