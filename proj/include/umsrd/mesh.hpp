#pragma once

// Cut-cell meshes in one and two dimensions and the merging neighborhoods
// built on top of them.

#include "umsrd/geometry.hpp"
#include "umsrd/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace umsrd {

// ---------------------------------------------------------------------------
// Neighborhoods
// ---------------------------------------------------------------------------

/// A merging neighborhood M_j: member cells with their weights w_{i,j} and
/// the weighted volume sum_i w_{i,j} V_i.
template <typename Scalar>
struct Neighborhood {
    Index id = 0;
    std::vector<Index> members;
    std::vector<Scalar> weights; ///< aligned with `members`
    Scalar weighted_volume = 0;

    Scalar weight(Index cell) const {
        for (std::size_t k = 0; k < members.size(); ++k)
            if (members[k] == cell) return weights[k];
        return Scalar(0);
    }
    bool contains(Index cell) const {
        return std::find(members.begin(), members.end(), cell) != members.end();
    }
};

template <typename Scalar>
using Neighborhoods = std::vector<Neighborhood<Scalar>>;

/// Unit-weight neighborhood over `members`.
template <typename Scalar>
Neighborhood<Scalar> make_neighborhood(Index id, std::vector<Index> members,
                                       const Field<Scalar>& volumes) {
    Neighborhood<Scalar> nb;
    nb.id = id;
    nb.members = std::move(members);
    nb.weights.assign(nb.members.size(), Scalar(1));
    for (std::size_t k = 0; k < nb.members.size(); ++k)
        nb.weighted_volume += nb.weights[k] * volumes(nb.members[k]);
    if (!(nb.weighted_volume > 0))
        throw std::invalid_argument("neighborhood has non-positive weighted volume");
    return nb;
}

/// Throws if any cell appears in more than one neighborhood.
template <typename Scalar>
void check_disjoint(const Neighborhoods<Scalar>& nbhds, Index n_cells) {
    std::vector<char> seen(static_cast<std::size_t>(n_cells), 0);
    for (const auto& nb : nbhds)
        for (Index i : nb.members) {
            if (i < 0 || i >= n_cells)
                throw std::out_of_range("neighborhood member outside mesh");
            if (seen[static_cast<std::size_t>(i)]++)
                throw std::invalid_argument("neighborhoods overlap at cell " +
                                            std::to_string(i));
        }
}

// ---------------------------------------------------------------------------
// 1D mesh
// ---------------------------------------------------------------------------

/// Uniform background grid on [0, L] with at most one small cut cell. The
/// small cell is anchored at the left edge of its background cell and its
/// right neighbor absorbs the remainder, so the domain length is unchanged.
template <typename Scalar>
struct Mesh1D {
    using scalar_type = Scalar;

    Index n_cells = 0;
    Field<Scalar> widths;
    Field<Scalar> centers;
    Scalar h = 0;
    Index cut_index = -1; ///< -1 when the mesh has no small cell
    Scalar alpha = 1;
    Scalar domain_length = 1;
    bool periodic = true;

    const Field<Scalar>& volumes() const { return widths; }
    Index size() const { return n_cells; }
    bool has_cut() const { return cut_index >= 0; }
    Index absorber_index() const { return has_cut() ? cut_index + 1 : -1; }
    Index merge_partner() const { return has_cut() ? cut_index - 1 : -1; }
    /// Left edge of every cell; edges(n_cells) is the right end of the domain.
    Field<Scalar> edges() const {
        Field<Scalar> e(n_cells + 1);
        e(0) = 0;
        for (Index i = 0; i < n_cells; ++i) e(i + 1) = e(i) + widths(i);
        return e;
    }
};

template <typename Scalar>
Mesh1D<Scalar> build_uniform_mesh_1d(Index n, bool periodic = true) {
    if (n < 2) throw std::invalid_argument("need at least two cells");
    Mesh1D<Scalar> m;
    m.n_cells = n;
    m.h = Scalar(1) / Scalar(n);
    m.widths = Field<Scalar>::Constant(n, m.h);
    m.centers.resize(n);
    for (Index i = 0; i < n; ++i) m.centers(i) = (Scalar(i) + Scalar(0.5)) / Scalar(n);
    m.periodic = periodic;
    return m;
}

template <typename Scalar>
Mesh1D<Scalar> build_mesh_1d(Index n, Scalar alpha, Scalar cut_position,
                             bool periodic = true) {
    if (n < 4) throw std::invalid_argument("build_mesh_1d: N must be at least 4");
    if (!(alpha > 0 && alpha < Scalar(0.5)))
        throw std::invalid_argument("build_mesh_1d: alpha must lie in (0, 1/2)");
    if (!(cut_position > 0 && cut_position < 1))
        throw std::invalid_argument("build_mesh_1d: cut position must lie inside (0, 1)");

    Mesh1D<Scalar> m;
    m.n_cells = n;
    m.h = Scalar(1) / Scalar(n);
    m.alpha = alpha;
    m.periodic = periodic;
    const auto j = static_cast<Index>(std::floor(cut_position * Scalar(n)));
    if (j <= 0 || j >= n - 1)
        throw std::invalid_argument(
            "build_mesh_1d: cut cell at the domain edge has no merge partner");
    m.cut_index = j;

    m.widths = Field<Scalar>::Constant(n, m.h);
    m.widths(j) = alpha * m.h;
    m.widths(j + 1) = (2 - alpha) * m.h;

    // Edges are placed from the background grid so that every untouched cell
    // keeps its exact node positions.
    m.centers.resize(n);
    for (Index i = 0; i < n; ++i) {
        const Scalar left = Scalar(i) / Scalar(n);
        if (i == j)
            m.centers(i) = left + m.widths(i) / 2;
        else if (i == j + 1)
            m.centers(i) = Scalar(j) / Scalar(n) + alpha * m.h + m.widths(i) / 2;
        else
            m.centers(i) = left + m.h / 2;
    }
    return m;
}

/// One neighborhood {j-1, j} per small cell, unit weights.
template <typename Scalar>
Neighborhoods<Scalar> build_neighborhoods(const Mesh1D<Scalar>& mesh) {
    Neighborhoods<Scalar> out;
    if (!mesh.has_cut()) return out;
    const Index partner = mesh.merge_partner();
    if (partner < 0)
        throw std::invalid_argument("small cell has no merge partner");
    out.push_back(make_neighborhood<Scalar>(0, {partner, mesh.cut_index}, mesh.volumes()));
    return out;
}

// ---------------------------------------------------------------------------
// 2D mesh
// ---------------------------------------------------------------------------

enum class MergeDirection { none, down, up };

/// A background cell touched by the embedded boundary. `cell` is the subcell
/// with the smaller volume fraction (the lower one on ties), `sibling` the
/// rest of the background cell (-1 when it is not a separate subcell).
template <typename Scalar>
struct CutCell {
    std::array<Index, 2> index{}; ///< (ix, iy) of the background cell
    Index cell = -1;
    Index sibling = -1;
    Scalar fraction = 1;
    MergeDirection merge = MergeDirection::none;
    Index partner = -1;
};

struct BoundarySpec {
    enum class Kind { none, single_horizontal_cut, tilted_line };
    Kind kind = Kind::none;
    double alpha = 1;     // single_horizontal_cut
    double slope = 0;     // tilted_line
    double intercept = 0; // tilted_line, value at x = 0.5
    double min_frac = 0;  // tilted_line clamp
};

/// Face between cells `a` and `b`. `normal` is the face normal pointing from
/// a to b, scaled by the face length.
template <typename Scalar>
struct Face {
    Index a = -1;
    Index b = -1;
    Vec2<Scalar> normal = Vec2<Scalar>::Zero();
};

/// Face on the non-periodic domain boundary; `normal` points out of the domain.
template <typename Scalar>
struct BoundaryFace {
    Index cell = -1;
    Vec2<Scalar> normal = Vec2<Scalar>::Zero();
    Vec2<Scalar> midpoint = Vec2<Scalar>::Zero();
};

template <typename Scalar>
struct Mesh2D {
    using scalar_type = Scalar;
    using Polygon = geometry::Polygon<Scalar>;

    Index nx = 0, ny = 0;
    Scalar h = 0;
    bool periodic_x = true;
    bool periodic_y = true;
    BoundarySpec boundary_spec;

    Field<Scalar> cell_volumes;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 2> centroids;
    std::vector<Polygon> polygons;
    std::vector<std::array<Index, 2>> background; ///< per cell (ix, iy)
    std::vector<Face<Scalar>> faces;
    std::vector<BoundaryFace<Scalar>> boundary_faces;
    std::vector<CutCell<Scalar>> cut_cells;

    const Field<Scalar>& volumes() const { return cell_volumes; }
    Index size() const { return cell_volumes.size(); }

    /// Total cell volume per background cell, ny rows by nx columns.
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> volume_map() const {
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> map =
            Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(ny, nx);
        for (Index c = 0; c < size(); ++c)
            map(background[c][1], background[c][0]) += cell_volumes(c);
        return map;
    }

    Scalar min_fraction() const {
        Scalar f = 1;
        for (const auto& cc : cut_cells) f = std::min(f, cc.fraction);
        return f;
    }
};

namespace detail {

template <typename Scalar>
struct EdgeRecord {
    Index cell;
    Scalar lo, hi;       // interval along the supporting line
    Scalar stretch;      // physical length per unit of parameter
    Vec2<Scalar> normal; // unit outward normal of the owner cell
    bool on_low_side;    // owner lies on the low side of the line
    Scalar matched = 0;
    Vec2<Scalar> a, b;   // endpoints, for boundary faces
};

/// Pair up polygon edges lying on common supporting lines and emit one face
/// per overlapping interval. Edges on a periodic boundary are matched across
/// the domain; unmatched edges on a non-periodic boundary become boundary
/// faces.
template <typename Scalar>
void assemble_faces(Mesh2D<Scalar>& mesh) {
    using Key = std::tuple<int, long long, long long>;
    const Scalar q = Scalar(1e10);
    const Scalar tol = Scalar(1e-12);
    auto quant = [&](Scalar v) { return static_cast<long long>(std::llround(v * q)); };
    auto wrap = [&](Scalar v, bool periodic) {
        if (periodic && std::abs(v - 1) < tol) return Scalar(0);
        return v;
    };

    std::map<Key, std::vector<EdgeRecord<Scalar>>> groups;
    for (Index c = 0; c < mesh.size(); ++c) {
        const auto& poly = mesh.polygons[static_cast<std::size_t>(c)];
        const std::size_t n = poly.size();
        for (std::size_t k = 0; k < n; ++k) {
            const Vec2<Scalar> p = poly[k];
            const Vec2<Scalar> r = poly[(k + 1) % n];
            const Vec2<Scalar> d = r - p;
            const Scalar len = d.norm();
            if (len <= tol) continue;
            const Vec2<Scalar> nrm(d.y() / len, -d.x() / len); // outward for CCW
            EdgeRecord<Scalar> e{c, 0, 0, 1, nrm, false, 0, p, r};
            Key key;
            if (std::abs(d.x()) <= tol) {
                key = {0, quant(wrap(p.x(), mesh.periodic_x)), 0};
                e.lo = std::min(p.y(), r.y());
                e.hi = std::max(p.y(), r.y());
                e.on_low_side = nrm.x() > 0;
            } else if (std::abs(d.y()) <= tol) {
                key = {1, quant(wrap(p.y(), mesh.periodic_y)), 0};
                e.lo = std::min(p.x(), r.x());
                e.hi = std::max(p.x(), r.x());
                e.on_low_side = nrm.y() > 0;
            } else {
                // Sloped edges only separate the two parts of one background cell.
                const Scalar slope = d.y() / d.x();
                const auto& bg = mesh.background[static_cast<std::size_t>(c)];
                key = {2, bg[0], bg[1]};
                e.lo = std::min(p.x(), r.x());
                e.hi = std::max(p.x(), r.x());
                e.stretch = std::sqrt(1 + slope * slope);
                e.on_low_side = nrm.y() > 0;
            }
            groups[key].push_back(e);
        }
    }

    mesh.faces.clear();
    mesh.boundary_faces.clear();
    for (auto& [key, edges] : groups) {
        std::vector<EdgeRecord<Scalar>*> low, high;
        for (auto& e : edges) (e.on_low_side ? low : high).push_back(&e);
        auto by_lo = [](const auto* x, const auto* y) { return x->lo < y->lo; };
        std::sort(low.begin(), low.end(), by_lo);
        std::sort(high.begin(), high.end(), by_lo);
        std::size_t i = 0, k = 0;
        while (i < low.size() && k < high.size()) {
            auto* l = low[i];
            auto* r = high[k];
            const Scalar overlap = std::min(l->hi, r->hi) - std::max(l->lo, r->lo);
            if (overlap > tol) {
                const Scalar length = overlap * l->stretch;
                mesh.faces.push_back({l->cell, r->cell, l->normal * length});
                l->matched += length;
                r->matched += length;
            }
            if (l->hi < r->hi) ++i; else ++k;
        }
        for (auto& e : edges) {
            const Scalar full = (e.hi - e.lo) * e.stretch;
            if (full - e.matched <= Scalar(1e-9) * mesh.h) continue;
            const bool on_x_boundary = std::get<0>(key) == 0 && !mesh.periodic_x;
            const bool on_y_boundary = std::get<0>(key) == 1 && !mesh.periodic_y;
            if ((on_x_boundary || on_y_boundary) && e.matched == 0) {
                mesh.boundary_faces.push_back(
                    {e.cell, e.normal * full, (e.a + e.b) / 2});
                continue;
            }
            throw std::logic_error("mesh assembly: edge of cell " + std::to_string(e.cell) +
                                   " is not fully covered by faces");
        }
    }
}

template <typename Scalar>
void finish_cells(Mesh2D<Scalar>& mesh) {
    const Index n = static_cast<Index>(mesh.polygons.size());
    mesh.centroids.resize(n, 2);
    for (Index c = 0; c < n; ++c)
        mesh.centroids.row(c) = geometry::centroid(mesh.polygons[static_cast<std::size_t>(c)]).transpose();
    assemble_faces(mesh);
}

template <typename Scalar>
Mesh2D<Scalar> uniform_cells(Index n) {
    Mesh2D<Scalar> m;
    m.nx = m.ny = n;
    m.h = Scalar(1) / Scalar(n);
    m.cell_volumes = Field<Scalar>::Constant(n * n, m.h * m.h);
    m.polygons.reserve(static_cast<std::size_t>(n * n));
    m.background.reserve(static_cast<std::size_t>(n * n));
    for (Index iy = 0; iy < n; ++iy)
        for (Index ix = 0; ix < n; ++ix) {
            m.polygons.push_back(geometry::rectangle<Scalar>(
                Scalar(ix) / Scalar(n), Scalar(iy) / Scalar(n),
                Scalar(ix + 1) / Scalar(n), Scalar(iy + 1) / Scalar(n)));
            m.background.push_back({ix, iy});
        }
    return m;
}

} // namespace detail

/// Periodic uniform Cartesian mesh on the unit square, no cut cells.
template <typename Scalar>
Mesh2D<Scalar> build_mesh_2d_uniform(Index n) {
    if (n < 2) throw std::invalid_argument("need at least two cells per direction");
    auto m = detail::uniform_cells<Scalar>(n);
    detail::finish_cells(m);
    return m;
}

/// Unit square with one cut cell at (N/2, N/2) of height alpha*h, anchored at
/// its bottom edge. The cell above absorbs the remaining height and the cut
/// cell merges downward.
template <typename Scalar>
Mesh2D<Scalar> build_mesh_2d_single_cut(Index n, Scalar alpha) {
    if (n < 4) throw std::invalid_argument("build_mesh_2d_single_cut: N must be at least 4");
    if (n % 2 != 0) throw std::invalid_argument("build_mesh_2d_single_cut: N must be even");
    if (!(alpha > 0 && alpha < Scalar(0.5)))
        throw std::invalid_argument("build_mesh_2d_single_cut: alpha must lie in (0, 1/2)");

    auto m = detail::uniform_cells<Scalar>(n);
    m.boundary_spec.kind = BoundarySpec::Kind::single_horizontal_cut;
    m.boundary_spec.alpha = static_cast<double>(alpha);

    const Index ic = n / 2;
    const Index cut = ic * n + ic;
    const Index above = (ic + 1) * n + ic;
    const Index below = (ic - 1) * n + ic;
    const Scalar x0 = Scalar(ic) / Scalar(n);
    const Scalar x1 = Scalar(ic + 1) / Scalar(n);
    const Scalar y0 = Scalar(ic) / Scalar(n);
    const Scalar y_cut = y0 + alpha * m.h;
    const Scalar y_top = Scalar(ic + 2) / Scalar(n);
    m.polygons[static_cast<std::size_t>(cut)] = geometry::rectangle(x0, y0, x1, y_cut);
    m.polygons[static_cast<std::size_t>(above)] = geometry::rectangle(x0, y_cut, x1, y_top);
    m.cell_volumes(cut) = alpha * m.h * m.h;
    m.cell_volumes(above) = (2 - alpha) * m.h * m.h;

    CutCell<Scalar> cc;
    cc.index = {ic, ic};
    cc.cell = cut;
    cc.fraction = alpha;
    cc.merge = MergeDirection::down;
    cc.partner = below;
    m.cut_cells.push_back(cc);

    detail::finish_cells(m);
    return m;
}

/// Unit square cut by the line y = intercept + slope (x - 1/2). Every crossed
/// background cell is split into the parts below and above the line; volume
/// fractions are clamped to [min_frac, 1 - min_frac] and subcells with
/// fraction below 1/2 merge with their vertical neighbor on the same side.
/// The line is a geometric partition only: fluxes cross it.
template <typename Scalar>
Mesh2D<Scalar> build_mesh_2d_tilted(Index n, Scalar slope, Scalar intercept,
                                    Scalar min_frac, bool periodic_x = true) {
    if (n < 4) throw std::invalid_argument("build_mesh_2d_tilted: N must be at least 4");
    if (!(std::abs(slope) < 1))
        throw std::invalid_argument("build_mesh_2d_tilted: |slope| must be below 1");
    if (!(min_frac > 0 && min_frac < Scalar(0.5)))
        throw std::invalid_argument("build_mesh_2d_tilted: min_frac must lie in (0, 1/2)");
    auto line_y = [&](Scalar x) { return intercept + slope * (x - Scalar(0.5)); };
    const Scalar y_left = line_y(0), y_right = line_y(1);
    if (!(y_left > 0 && y_left < 1 && y_right > 0 && y_right < 1))
        throw std::invalid_argument(
            "build_mesh_2d_tilted: line leaves the domain through the top or bottom");

    auto m = detail::uniform_cells<Scalar>(n);
    m.periodic_x = periodic_x;
    m.boundary_spec.kind = BoundarySpec::Kind::tilted_line;
    m.boundary_spec.slope = static_cast<double>(slope);
    m.boundary_spec.intercept = static_cast<double>(intercept);
    m.boundary_spec.min_frac = static_cast<double>(min_frac);

    const Scalar h = m.h;
    const Scalar h2 = h * h;
    const Scalar tol = Scalar(1e-12) * h;
    auto side = [&](const Vec2<Scalar>& p) { return p.y() - line_y(p.x()); };
    auto negated = [&](const Vec2<Scalar>& p) { return -side(p); };

    struct Split { Index below, above; Scalar frac_below; };
    std::map<std::pair<Index, Index>, Split> crossed;

    for (Index ix = 0; ix < n; ++ix) {
        for (Index iy = 0; iy < n; ++iy) {
            const Index id = iy * n + ix;
            const auto square = m.polygons[static_cast<std::size_t>(id)];
            Scalar fmin = side(square[0]), fmax = fmin;
            for (const auto& p : square) {
                fmin = std::min(fmin, side(p));
                fmax = std::max(fmax, side(p));
            }
            if (!(fmin < -tol && fmax > tol)) continue;

            auto below = geometry::clip<Scalar>(square, side, tol);
            auto above = geometry::clip<Scalar>(square, negated, tol);
            const Scalar raw = geometry::signed_area(below) / h2;
            const Scalar frac = std::clamp(raw, min_frac, 1 - min_frac);
            const Index above_id = static_cast<Index>(m.polygons.size());
            m.polygons[static_cast<std::size_t>(id)] = std::move(below);
            m.polygons.push_back(std::move(above));
            m.background.push_back({ix, iy});
            crossed[{ix, iy}] = {id, above_id, frac};
        }
    }

    const Index total = static_cast<Index>(m.polygons.size());
    m.cell_volumes.conservativeResize(total);
    for (const auto& [key, s] : crossed) {
        m.cell_volumes(s.below) = s.frac_below * h2;
        m.cell_volumes(s.above) = h2 - m.cell_volumes(s.below);
    }

    auto same_side_neighbor = [&](Index ix, Index iy, bool below_side) -> Index {
        const Index ny = below_side ? iy - 1 : iy + 1;
        if (ny < 0 || ny >= n) return -1;
        auto it = crossed.find({ix, ny});
        if (it == crossed.end()) return ny * n + ix;
        return below_side ? it->second.below : it->second.above;
    };

    for (const auto& [key, s] : crossed) {
        const auto [ix, iy] = key;
        CutCell<Scalar> cc;
        cc.index = {ix, iy};
        const bool below_small = s.frac_below <= Scalar(0.5);
        cc.cell = below_small ? s.below : s.above;
        cc.sibling = below_small ? s.above : s.below;
        cc.fraction = below_small ? s.frac_below : 1 - s.frac_below;
        if (cc.fraction < Scalar(0.5)) {
            cc.merge = below_small ? MergeDirection::down : MergeDirection::up;
            cc.partner = same_side_neighbor(ix, iy, below_small);
            if (cc.partner < 0)
                throw std::invalid_argument("build_mesh_2d_tilted: small subcell at (" +
                                            std::to_string(ix) + ", " + std::to_string(iy) +
                                            ") has no vertical neighbor");
            if (m.cell_volumes(cc.partner) < h2 / 2)
                throw std::invalid_argument(
                    "build_mesh_2d_tilted: merge partner is itself a small cell");
        }
        m.cut_cells.push_back(cc);
    }

    detail::finish_cells(m);
    return m;
}

/// One unit-weight neighborhood {small cell, partner} per merging cut cell.
template <typename Scalar>
Neighborhoods<Scalar> build_neighborhoods(const Mesh2D<Scalar>& mesh) {
    Neighborhoods<Scalar> out;
    for (const auto& cc : mesh.cut_cells) {
        if (cc.merge == MergeDirection::none) continue;
        if (cc.partner < 0) throw std::invalid_argument("small cell has no merge partner");
        // Members listed bottom to top.
        std::vector<Index> members = cc.merge == MergeDirection::down
                                         ? std::vector<Index>{cc.partner, cc.cell}
                                         : std::vector<Index>{cc.cell, cc.partner};
        out.push_back(make_neighborhood<Scalar>(static_cast<Index>(out.size()),
                                                std::move(members), mesh.volumes()));
    }
    check_disjoint(out, mesh.size());
    return out;
}

} // namespace umsrd
