#pragma once

// Convex polygon helpers used to build cut-cell geometry.

#include "umsrd/types.hpp"

#include <cmath>
#include <vector>

namespace umsrd::geometry {

template <typename Scalar>
using Polygon = std::vector<Vec2<Scalar>>;

/// Signed area (positive for counter-clockwise vertex order).
template <typename Scalar>
Scalar signed_area(const Polygon<Scalar>& poly) {
    Scalar twice = 0;
    const std::size_t n = poly.size();
    for (std::size_t k = 0; k < n; ++k) {
        const auto& p = poly[k];
        const auto& q = poly[(k + 1) % n];
        twice += p.x() * q.y() - q.x() * p.y();
    }
    return twice / 2;
}

template <typename Scalar>
Vec2<Scalar> centroid(const Polygon<Scalar>& poly) {
    Scalar twice = 0;
    Vec2<Scalar> acc = Vec2<Scalar>::Zero();
    const std::size_t n = poly.size();
    for (std::size_t k = 0; k < n; ++k) {
        const auto& p = poly[k];
        const auto& q = poly[(k + 1) % n];
        const Scalar cross = p.x() * q.y() - q.x() * p.y();
        twice += cross;
        acc += (p + q) * cross;
    }
    return acc / (3 * twice);
}

template <typename Scalar>
Polygon<Scalar> rectangle(Scalar x0, Scalar y0, Scalar x1, Scalar y1) {
    return {Vec2<Scalar>(x0, y0), Vec2<Scalar>(x1, y0), Vec2<Scalar>(x1, y1),
            Vec2<Scalar>(x0, y1)};
}

/// Clip a convex polygon to the half-plane {p : side(p) <= 0}. Values of
/// `side` within `tol` of zero are treated as lying on the clipping line.
template <typename Scalar, typename SideFn>
Polygon<Scalar> clip(const Polygon<Scalar>& poly, SideFn side, Scalar tol) {
    Polygon<Scalar> out;
    const std::size_t n = poly.size();
    auto snapped = [&](const Vec2<Scalar>& p) {
        const Scalar f = side(p);
        return std::abs(f) <= tol ? Scalar(0) : f;
    };
    for (std::size_t k = 0; k < n; ++k) {
        const auto& p = poly[k];
        const auto& q = poly[(k + 1) % n];
        const Scalar fp = snapped(p);
        const Scalar fq = snapped(q);
        if (fp <= 0) out.push_back(p);
        if ((fp < 0 && fq > 0) || (fp > 0 && fq < 0)) {
            const Scalar t = fp / (fp - fq);
            out.push_back(p + t * (q - p));
        }
    }
    return out;
}

} // namespace umsrd::geometry
