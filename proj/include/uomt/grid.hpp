#pragma once

// Space-time grid, the staggered field kinds and the discrete differential
// operators acting on them.
//
// Storage order for every field kind is channel-major, then cell, then time:
//
//     index(channel, cell, t) = (channel * cells + cell) * times + t
//
// with cell = j * nx + i (row-major, x fastest). Face fields use the same
// order with the face index in place of the cell index.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "uomt/error.hpp"

namespace uomt {

struct GridSpec {
    std::size_t nx = 1;
    std::size_t ny = 1;
    std::size_t nt = 1;
    double Lx = 1.0;
    double Ly = 1.0;

    GridSpec() = default;
    GridSpec(std::size_t nx_, std::size_t ny_, std::size_t nt_, double Lx_ = 1.0, double Ly_ = 1.0)
        : nx(nx_), ny(ny_), nt(nt_), Lx(Lx_), Ly(Ly_) {
        validate();
    }

    void validate() const {
        if (nx < 1 || ny < 1 || nt < 1)
            throw InputError("grid: nx, ny and nt must all be at least 1");
        if (!(Lx > 0.0) || !(Ly > 0.0) || !std::isfinite(Lx) || !std::isfinite(Ly))
            throw InputError("grid: domain extents must be positive and finite");
    }

    double hx() const { return Lx / static_cast<double>(nx); }
    double hy() const { return Ly / static_cast<double>(ny); }
    double ht() const { return 1.0 / static_cast<double>(nt); }

    std::size_t cells() const { return nx * ny; }
    std::size_t nodes() const { return nt + 1; }
    std::size_t slabs() const { return nt; }
    std::size_t x_faces() const { return (nx + 1) * ny; }
    std::size_t y_faces() const { return nx * (ny + 1); }

    std::size_t cell(std::size_t i, std::size_t j) const { return j * nx + i; }
    double cell_x(std::size_t i) const { return (static_cast<double>(i) + 0.5) * hx(); }
    double cell_y(std::size_t j) const { return (static_cast<double>(j) + 0.5) * hy(); }

    /// t_k = k * ht for time node k.
    double node_time(std::size_t k) const { return static_cast<double>(k) * ht(); }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct CellSites {};
struct EdgeSites {};

/// Values on (site, cell, time) where a site is a channel or a graph edge.
template <class Sites>
struct SiteField {
    std::size_t times = 0;
    std::size_t cells = 0;
    std::size_t sites = 0;
    std::vector<double> values;

    SiteField() = default;
    SiteField(std::size_t times_, std::size_t cells_, std::size_t sites_, double fill = 0.0)
        : times(times_), cells(cells_), sites(sites_), values(times_ * cells_ * sites_, fill) {}

    std::size_t index(std::size_t site, std::size_t cell, std::size_t t) const {
        return (site * cells + cell) * times + t;
    }
    double& operator()(std::size_t site, std::size_t cell, std::size_t t) {
        return values[index(site, cell, t)];
    }
    double operator()(std::size_t site, std::size_t cell, std::size_t t) const {
        return values[index(site, cell, t)];
    }

    std::span<double> line(std::size_t site, std::size_t cell) {
        return {values.data() + index(site, cell, 0), times};
    }
    std::span<const double> line(std::size_t site, std::size_t cell) const {
        return {values.data() + index(site, cell, 0), times};
    }

    bool same_shape(const SiteField& o) const {
        return times == o.times && cells == o.cells && sites == o.sites;
    }

    friend bool operator==(const SiteField&, const SiteField&) = default;
};

/// Density-like values per (channel, cell, time). Node fields have nt+1
/// times, slab fields nt, endpoint slices 1.
using CellField = SiteField<CellSites>;

/// Inter-channel flux per (edge, cell, slab).
using EdgeFluxField = SiteField<EdgeSites>;

inline std::size_t channels_of(const CellField& f) { return f.sites; }
inline std::size_t edges_of(const EdgeFluxField& f) { return f.sites; }

/// Spatial momentum on x- and y-faces per (channel, face, slab). Faces on the
/// domain boundary are pinned to zero: operators never read them and adjoints
/// never write them.
struct FaceField {
    std::size_t nt = 0;
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::size_t channels = 0;
    std::vector<double> x;
    std::vector<double> y;

    FaceField() = default;
    FaceField(const GridSpec& g, std::size_t channels_)
        : nt(g.nt), nx(g.nx), ny(g.ny), channels(channels_),
          x(g.nt * g.x_faces() * channels_, 0.0), y(g.nt * g.y_faces() * channels_, 0.0) {}

    std::size_t x_index(std::size_t c, std::size_t i, std::size_t j, std::size_t k) const {
        return (c * (nx + 1) * ny + j * (nx + 1) + i) * nt + k;
    }
    std::size_t y_index(std::size_t c, std::size_t i, std::size_t j, std::size_t k) const {
        return (c * nx * (ny + 1) + j * nx + i) * nt + k;
    }

    bool conforms(const GridSpec& g, std::size_t ch) const {
        return nt == g.nt && nx == g.nx && ny == g.ny && channels == ch &&
               x.size() == g.nt * g.x_faces() * ch && y.size() == g.nt * g.y_faces() * ch;
    }

    /// Largest magnitude on a boundary face; zero for a valid field.
    double boundary_max() const {
        double m = 0.0;
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t k = 0; k < nt; ++k) {
                for (std::size_t j = 0; j < ny; ++j) {
                    m = std::max(m, std::abs(x[x_index(c, 0, j, k)]));
                    m = std::max(m, std::abs(x[x_index(c, nx, j, k)]));
                }
                for (std::size_t i = 0; i < nx; ++i) {
                    m = std::max(m, std::abs(y[y_index(c, i, 0, k)]));
                    m = std::max(m, std::abs(y[y_index(c, i, ny, k)]));
                }
            }
        return m;
    }

    friend bool operator==(const FaceField&, const FaceField&) = default;
};

/// The complete staggered unknown: density at nodes, momentum on faces and
/// inter-channel flux at cell centres.
struct StateFields {
    CellField rho;
    FaceField p;
    EdgeFluxField u;

    StateFields() = default;
    StateFields(const GridSpec& g, std::size_t channels, std::size_t edges)
        : rho(g.nodes(), g.cells(), channels), p(g, channels), u(g.slabs(), g.cells(), edges) {}

    std::size_t channels() const { return rho.sites; }
    std::size_t edges() const { return u.sites; }
};

/// Flat views over every array of a state, in a fixed order.
inline std::array<std::vector<double>*, 4> arrays(StateFields& s) {
    return {&s.rho.values, &s.p.x, &s.p.y, &s.u.values};
}
inline std::array<const std::vector<double>*, 4> arrays(const StateFields& s) {
    return {&s.rho.values, &s.p.x, &s.p.y, &s.u.values};
}

namespace detail {

inline void require(bool ok, const char* what) {
    if (!ok) throw DimensionError(what);
}

inline void check_nodes(const CellField& rho, const GridSpec& g, const char* op) {
    if (rho.times != g.nodes() || rho.cells != g.cells())
        throw DimensionError(std::string(op) + ": density field does not match the grid");
}

inline void check_slabs(const CellField& f, const GridSpec& g, const char* op) {
    if (f.times != g.slabs() || f.cells != g.cells())
        throw DimensionError(std::string(op) + ": slab field does not match the grid");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Spatial divergence  (p_{i+1/2} - p_{i-1/2}) / hx + (p_{j+1/2} - p_{j-1/2}) / hy

inline CellField spatial_divergence(const FaceField& p, const GridSpec& g) {
    if (!p.conforms(g, p.channels))
        throw DimensionError("spatial_divergence: face field does not match the grid");
    CellField out(g.slabs(), g.cells(), p.channels);
    const double ihx = 1.0 / g.hx();
    const double ihy = 1.0 / g.hy();
    for (std::size_t c = 0; c < p.channels; ++c)
        for (std::size_t j = 0; j < g.ny; ++j)
            for (std::size_t i = 0; i < g.nx; ++i) {
                auto dst = out.line(c, g.cell(i, j));
                const bool has_left = i > 0, has_right = i + 1 < g.nx;
                const bool has_down = j > 0, has_up = j + 1 < g.ny;
                for (std::size_t k = 0; k < g.nt; ++k) {
                    double d = 0.0;
                    if (has_right) d += p.x[p.x_index(c, i + 1, j, k)] * ihx;
                    if (has_left) d -= p.x[p.x_index(c, i, j, k)] * ihx;
                    if (has_up) d += p.y[p.y_index(c, i, j + 1, k)] * ihy;
                    if (has_down) d -= p.y[p.y_index(c, i, j, k)] * ihy;
                    dst[k] = d;
                }
            }
    return out;
}

inline FaceField spatial_divergence_adjoint(const CellField& q, const GridSpec& g) {
    detail::check_slabs(q, g, "spatial_divergence_adjoint");
    FaceField p(g, q.sites);
    const double ihx = 1.0 / g.hx();
    const double ihy = 1.0 / g.hy();
    for (std::size_t c = 0; c < q.sites; ++c)
        for (std::size_t k = 0; k < g.nt; ++k) {
            for (std::size_t j = 0; j < g.ny; ++j)
                for (std::size_t i = 1; i < g.nx; ++i)
                    p.x[p.x_index(c, i, j, k)] =
                        (q(c, g.cell(i - 1, j), k) - q(c, g.cell(i, j), k)) * ihx;
            for (std::size_t j = 1; j < g.ny; ++j)
                for (std::size_t i = 0; i < g.nx; ++i)
                    p.y[p.y_index(c, i, j, k)] =
                        (q(c, g.cell(i, j - 1), k) - q(c, g.cell(i, j), k)) * ihy;
        }
    return p;
}

// ---------------------------------------------------------------------------
// Time operators between nodes (nt+1) and slabs (nt).

inline CellField time_difference(const CellField& rho, const GridSpec& g) {
    detail::check_nodes(rho, g, "time_difference");
    CellField out(g.slabs(), g.cells(), rho.sites);
    const double ht = g.ht();
    for (std::size_t s = 0; s < rho.sites; ++s)
        for (std::size_t c = 0; c < g.cells(); ++c) {
            auto src = rho.line(s, c);
            auto dst = out.line(s, c);
            for (std::size_t k = 0; k < g.nt; ++k) dst[k] = (src[k + 1] - src[k]) / ht;
        }
    return out;
}

inline CellField time_difference_adjoint(const CellField& q, const GridSpec& g) {
    detail::check_slabs(q, g, "time_difference_adjoint");
    CellField out(g.nodes(), g.cells(), q.sites);
    const double iht = 1.0 / g.ht();
    for (std::size_t s = 0; s < q.sites; ++s)
        for (std::size_t c = 0; c < g.cells(); ++c) {
            auto src = q.line(s, c);
            auto dst = out.line(s, c);
            for (std::size_t k = 0; k <= g.nt; ++k) {
                const double before = k > 0 ? src[k - 1] : 0.0;
                const double after = k < g.nt ? src[k] : 0.0;
                dst[k] = (before - after) * iht;
            }
        }
    return out;
}

inline CellField time_average(const CellField& rho) {
    if (rho.times < 2) throw DimensionError("time_average: need at least two time nodes");
    CellField out(rho.times - 1, rho.cells, rho.sites);
    for (std::size_t s = 0; s < rho.sites; ++s)
        for (std::size_t c = 0; c < rho.cells; ++c) {
            auto src = rho.line(s, c);
            auto dst = out.line(s, c);
            for (std::size_t k = 0; k + 1 < rho.times; ++k) dst[k] = 0.5 * (src[k] + src[k + 1]);
        }
    return out;
}

inline CellField time_average_adjoint(const CellField& q) {
    CellField out(q.times + 1, q.cells, q.sites);
    for (std::size_t s = 0; s < q.sites; ++s)
        for (std::size_t c = 0; c < q.cells; ++c) {
            auto src = q.line(s, c);
            auto dst = out.line(s, c);
            for (std::size_t k = 0; k < q.times; ++k) {
                dst[k] += 0.5 * src[k];
                dst[k + 1] += 0.5 * src[k];
            }
        }
    return out;
}

enum class LinearOp { spatial_divergence, time_difference };

inline LinearOp parse_linear_op(std::string_view name) {
    if (name == "spatial_divergence") return LinearOp::spatial_divergence;
    if (name == "time_difference") return LinearOp::time_difference;
    throw InputError("adjoint_of: unknown operator '" + std::string(name) + "'");
}

/// Adjoint of a named operator applied to a per-slab field. The spatial
/// divergence adjoint yields a FaceField, the time difference adjoint a node
/// CellField.
inline std::variant<FaceField, CellField> adjoint_of(std::string_view opname, const CellField& q,
                                                     const GridSpec& g) {
    switch (parse_linear_op(opname)) {
    case LinearOp::spatial_divergence: return spatial_divergence_adjoint(q, g);
    case LinearOp::time_difference: return time_difference_adjoint(q, g);
    }
    throw InputError("adjoint_of: unknown operator");
}

// ---------------------------------------------------------------------------
// Flat vector helpers.

inline double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline double sum(std::span<const double> a) { return std::accumulate(a.begin(), a.end(), 0.0); }

/// Total of one channel over all cells at time index t.
inline double channel_total(const CellField& f, std::size_t channel, std::size_t t) {
    double m = 0.0;
    for (std::size_t c = 0; c < f.cells; ++c) m += f(channel, c, t);
    return m;
}

inline double total_mass(const CellField& f, std::size_t t) {
    double m = 0.0;
    for (std::size_t s = 0; s < f.sites; ++s) m += channel_total(f, s, t);
    return m;
}

} // namespace uomt
