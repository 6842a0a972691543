#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace umsrd {

using Index = Eigen::Index;

/// Cell averages over a mesh, one entry per cell in mesh order.
template <typename Scalar>
using Field = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

/// Post-processing applied after the finite-volume update.
enum class Scheme { base, srd, umsrd };

/// Which cell width a CFL number refers to.
enum class CflBasis { full_mesh, small_cell };

enum class BoundaryCondition { periodic, dirichlet_exact };

inline std::string_view to_string(Scheme s) {
    switch (s) {
    case Scheme::base: return "base";
    case Scheme::srd: return "srd";
    case Scheme::umsrd: return "umsrd";
    }
    return "?";
}

inline Scheme parse_scheme(std::string_view name) {
    if (name == "base") return Scheme::base;
    if (name == "srd") return Scheme::srd;
    if (name == "umsrd" || name == "um-srd") return Scheme::umsrd;
    throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

inline std::string_view to_string(CflBasis b) {
    return b == CflBasis::full_mesh ? "full_mesh" : "small_cell";
}

inline std::string_view to_string(BoundaryCondition bc) {
    return bc == BoundaryCondition::periodic ? "periodic" : "dirichlet_exact";
}

/// Raised when a stabilized run produces non-finite cell values.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, long step)
        : std::runtime_error(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

} // namespace umsrd
