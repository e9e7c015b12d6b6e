#pragma once

// Weighted kinetic + inter-channel energy and its pointwise proximal map.
//
// The energy is evaluated on cell-centred slab variables: the time average of
// the density, the face momenta averaged to cell centres, and one copy of each
// edge flux per endpoint channel that "sees" the edge. Each copy is charged to
// exactly one channel's density, which keeps the energy separable per
// (slab, cell, channel).

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "uomt/error.hpp"
#include "uomt/graph.hpp"
#include "uomt/grid.hpp"
#include "uomt/parallel.hpp"

namespace uomt {

enum class EdgeDensityMode {
    two_point,       // 1/rho_edge = 1/rho_source + 1/rho_sink
    primary_endpoint // rho_edge = density of the non-source-layer endpoint
};

inline const char* to_string(EdgeDensityMode m) {
    return m == EdgeDensityMode::two_point ? "two_point" : "primary_endpoint";
}

inline EdgeDensityMode parse_edge_density_mode(const std::string& s) {
    if (s == "two_point") return EdgeDensityMode::two_point;
    if (s == "primary_endpoint") return EdgeDensityMode::primary_endpoint;
    throw InputError("unknown edge density mode '" + s + "' (expected two_point or primary_endpoint)");
}

/// Edge density mode per edge class.
struct EdgeDensityModes {
    EdgeDensityMode original = EdgeDensityMode::two_point;
    EdgeDensityMode augmentation = EdgeDensityMode::primary_endpoint;

    EdgeDensityMode of(const ChannelGraph& g, std::size_t e) const {
        return g.kind(e) == EdgeKind::augmentation ? augmentation : original;
    }
};

/// Channel whose density stands in for the edge under primary_endpoint.
inline std::size_t designated_endpoint(const ChannelGraph& g, std::size_t e) {
    const auto sl = g.source_layer();
    const auto& ed = g.edge(e);
    if (sl && ed.source == *sl) return ed.sink;
    if (sl && ed.sink == *sl) return ed.source;
    throw InputError("primary_endpoint edge density needs an edge touching the source layer (edge " +
                     g.names()[ed.source] + "->" + g.names()[ed.sink] + ")");
}

struct CopySites {};

/// Edge-flux copies: one value per (copy, cell, slab).
using CopyField = SiteField<CopySites>;

/// Which channel each edge-flux copy is charged to.
struct CouplingLayout {
    struct Copy {
        std::size_t edge;
        std::size_t channel;
        double weight;
    };
    std::vector<Copy> copies;
    std::vector<std::vector<std::size_t>> copies_of_channel;
    std::vector<std::vector<std::size_t>> copies_of_edge;

    CouplingLayout() = default;
    CouplingLayout(const ChannelGraph& g, const EdgeDensityModes& modes)
        : copies_of_channel(g.n_channels()), copies_of_edge(g.n_edges()) {
        for (std::size_t e = 0; e < g.n_edges(); ++e) {
            const auto& ed = g.edge(e);
            if (modes.of(g, e) == EdgeDensityMode::two_point) {
                add({e, ed.source, g.w2()[e]});
                add({e, ed.sink, g.w2()[e]});
            } else {
                add({e, designated_endpoint(g, e), g.w2()[e]});
            }
        }
    }

private:
    void add(Copy c) {
        copies_of_channel[c.channel].push_back(copies.size());
        copies_of_edge[c.edge].push_back(copies.size());
        copies.push_back(c);
    }
};

/// Cell-centred slab variables on which the energy is pointwise.
struct CenteredFields {
    CellField r;  // density, time-averaged
    CellField mx; // x-momentum averaged to the cell centre
    CellField my; // y-momentum averaged to the cell centre
    CopyField q;  // edge flux copies

    CenteredFields() = default;
    CenteredFields(const GridSpec& g, std::size_t channels, std::size_t copies)
        : r(g.slabs(), g.cells(), channels), mx(g.slabs(), g.cells(), channels),
          my(g.slabs(), g.cells(), channels), q(g.slabs(), g.cells(), copies) {}
};

inline std::array<std::vector<double>*, 4> arrays(CenteredFields& v) {
    return {&v.r.values, &v.mx.values, &v.my.values, &v.q.values};
}
inline std::array<const std::vector<double>*, 4> arrays(const CenteredFields& v) {
    return {&v.r.values, &v.mx.values, &v.my.values, &v.q.values};
}

struct EnergyBreakdown {
    std::vector<double> spatial_by_channel;
    std::vector<double> edge_by_edge;
    double total = 0.0;

    double spatial_total() const {
        double s = 0.0;
        for (double v : spatial_by_channel) s += v;
        return s;
    }
    double edge_total(const ChannelGraph& g, EdgeKind kind) const {
        double s = 0.0;
        for (std::size_t e = 0; e < edge_by_edge.size(); ++e)
            if (g.kind(e) == kind) s += edge_by_edge[e];
        return s;
    }
    bool finite() const { return std::isfinite(total); }
};

/// Perspective m^2 / rho with the closure 0^2/0 = 0 and +inf elsewhere off the domain.
inline double perspective(double m2, double rho) {
    if (rho > 0.0) return m2 / rho;
    if (rho == 0.0 && m2 == 0.0) return 0.0;
    return std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------

/// Per-edge density from per-slab channel densities.
inline EdgeFluxField edge_density(const CellField& rho_mid, const ChannelGraph& graph,
                                  const EdgeDensityModes& modes) {
    if (rho_mid.sites != graph.n_channels())
        throw DimensionError("edge_density: density has the wrong number of channels");
    for (double v : rho_mid.values)
        if (v < 0.0) throw InputError("edge_density: negative density");
    EdgeFluxField out(rho_mid.times, rho_mid.cells, graph.n_edges());
    for (std::size_t e = 0; e < graph.n_edges(); ++e) {
        const auto& ed = graph.edge(e);
        const auto mode = modes.of(graph, e);
        const std::size_t primary = mode == EdgeDensityMode::primary_endpoint ? designated_endpoint(graph, e) : 0;
        for (std::size_t c = 0; c < rho_mid.cells; ++c)
            for (std::size_t k = 0; k < rho_mid.times; ++k) {
                if (mode == EdgeDensityMode::primary_endpoint) {
                    out(e, c, k) = rho_mid(primary, c, k);
                } else {
                    const double a = rho_mid(ed.source, c, k), b = rho_mid(ed.sink, c, k);
                    out(e, c, k) = (a > 0.0 && b > 0.0) ? a * b / (a + b) : 0.0;
                }
            }
    }
    return out;
}

/// Centred image K(U) of a staggered state; endpoint densities enter the
/// first and last slab averages.
inline CenteredFields interpolate(const StateFields& s, const CouplingLayout& layout, const GridSpec& g) {
    detail::check_nodes(s.rho, g, "interpolate");
    if (!s.p.conforms(g, s.channels())) throw DimensionError("interpolate: momentum does not match the grid");
    CenteredFields v(g, s.channels(), layout.copies.size());
    v.r = time_average(s.rho);
    const std::size_t nt = g.nt;
    for (std::size_t c = 0; c < s.channels(); ++c)
        for (std::size_t j = 0; j < g.ny; ++j)
            for (std::size_t i = 0; i < g.nx; ++i) {
                const std::size_t cell = g.cell(i, j);
                auto mx = v.mx.line(c, cell);
                auto my = v.my.line(c, cell);
                const double* xl = &s.p.x[s.p.x_index(c, i, j, 0)];
                const double* xr = &s.p.x[s.p.x_index(c, i + 1, j, 0)];
                const double* yd = &s.p.y[s.p.y_index(c, i, j, 0)];
                const double* yu = &s.p.y[s.p.y_index(c, i, j + 1, 0)];
                const bool l = i > 0, r = i + 1 < g.nx, d = j > 0, u = j + 1 < g.ny;
                for (std::size_t k = 0; k < nt; ++k) {
                    mx[k] = 0.5 * ((l ? xl[k] : 0.0) + (r ? xr[k] : 0.0));
                    my[k] = 0.5 * ((d ? yd[k] : 0.0) + (u ? yu[k] : 0.0));
                }
            }
    for (std::size_t q = 0; q < layout.copies.size(); ++q) {
        const std::size_t e = layout.copies[q].edge;
        for (std::size_t cell = 0; cell < g.cells(); ++cell) {
            auto src = s.u.line(e, cell);
            auto dst = v.q.line(q, cell);
            std::copy(src.begin(), src.end(), dst.begin());
        }
    }
    return v;
}

/// Energy of centred variables, midpoint quadrature in time.
inline EnergyBreakdown centered_energy(const CenteredFields& v, const CouplingLayout& layout,
                                       const ChannelGraph& graph, const GridSpec& g) {
    EnergyBreakdown out;
    out.spatial_by_channel.assign(graph.n_channels(), 0.0);
    out.edge_by_edge.assign(graph.n_edges(), 0.0);
    const double ht = g.ht();
    for (std::size_t c = 0; c < graph.n_channels(); ++c) {
        double acc = 0.0;
        for (std::size_t cell = 0; cell < g.cells(); ++cell) {
            auto r = v.r.line(c, cell);
            auto mx = v.mx.line(c, cell);
            auto my = v.my.line(c, cell);
            for (std::size_t k = 0; k < g.nt; ++k) acc += perspective(mx[k] * mx[k] + my[k] * my[k], r[k]);
        }
        out.spatial_by_channel[c] = ht * graph.w1()[c] * acc;
    }
    for (std::size_t q = 0; q < layout.copies.size(); ++q) {
        const auto& cp = layout.copies[q];
        double acc = 0.0;
        for (std::size_t cell = 0; cell < g.cells(); ++cell) {
            auto r = v.r.line(cp.channel, cell);
            auto u = v.q.line(q, cell);
            for (std::size_t k = 0; k < g.nt; ++k) acc += perspective(u[k] * u[k], r[k]);
        }
        out.edge_by_edge[cp.edge] += ht * cp.weight * acc;
    }
    out.total = out.spatial_total();
    for (double e : out.edge_by_edge) out.total += e;
    return out;
}

/// Energy of a staggered state. Returns +inf parts where flux crosses vacuum.
inline EnergyBreakdown total_energy(const StateFields& s, const ChannelGraph& graph, const GridSpec& g,
                                    const EdgeDensityModes& modes) {
    if (s.channels() != graph.n_channels() || s.edges() != graph.n_edges())
        throw DimensionError("total_energy: state does not match the graph");
    const CouplingLayout layout(graph, modes);
    return centered_energy(interpolate(s, layout, g), layout, graph, g);
}

// ---------------------------------------------------------------------------
// Proximal map of (rho, m_1..m_n) -> sum_j w_j m_j^2 / rho.

struct Momentum {
    double value;
    double weight;
};

struct ProxResult {
    double rho = 0.0;
    std::vector<double> momenta;
    int iterations = 0;
};

namespace detail {

/// Core of the perspective prox on raw arrays. Returns rho*, writes m*.
inline double prox_perspective_raw(double rho_bar, const double* m, const double* w, std::size_t n,
                                   double lambda, double* m_out, int* iters = nullptr) {
    double s2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) s2 += m[j] * m[j];
    if (iters) *iters = 0;
    if (s2 == 0.0) {
        for (std::size_t j = 0; j < n; ++j) m_out[j] = 0.0;
        return rho_bar > 0.0 ? rho_bar : 0.0;
    }
    auto g = [&](double rho, double* dg) {
        double val = (rho - rho_bar) / lambda, der = 1.0 / lambda;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = rho + 2.0 * w[j] * lambda;
            const double t = w[j] * m[j] * m[j] / (d * d);
            val -= t;
            der += 2.0 * t / d;
        }
        *dg = der;
        return val;
    };
    double lo = rho_bar > 0.0 ? rho_bar : 0.0;
    double dg = 0.0;
    double glo = g(lo, &dg);
    if (glo >= 0.0) {
        // Minimiser sits on the boundary rho = 0, where the closure forces m = 0.
        for (std::size_t j = 0; j < n; ++j) m_out[j] = 0.0;
        return 0.0;
    }
    double hi = rho_bar + 1.0;
    for (std::size_t j = 0; j < n; ++j) hi += m[j] * m[j] / (4.0 * w[j] * lambda);
    if (hi <= lo) hi = lo + 1.0;

    // Replacing every 2 w_j lambda by its smallest (largest) value turns
    // g = 0 into a cubic whose root bounds the true root from above (below).
    double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0, S = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (m[j] == 0.0) continue;
        cmin = std::min(cmin, 2.0 * w[j] * lambda);
        cmax = std::max(cmax, 2.0 * w[j] * lambda);
        S += w[j] * m[j] * m[j];
    }
    auto cubic_root = [&](double c) {
        // (x - rho_bar)(x + c)^2 = lambda S is convex increasing right of the
        // root, so Newton from the right descends monotonically.
        double x = lo + std::cbrt(lambda * S);
        for (int k = 0; k < 100; ++k) {
            const double a = x - rho_bar, b = x + c;
            const double f = a * b * b - lambda * S;
            const double df = b * b + 2.0 * a * b;
            const double nx = x - f / df;
            if (!(nx < x)) break;
            x = nx;
            if (f <= 1e-15 * lambda * S) break;
        }
        return x;
    };
    const double upper = cubic_root(cmin);
    if (upper < hi) hi = upper * (1.0 + 1e-12) + 1e-300;
    const double lower = cubic_root(cmax);
    double rho = lo, grho = glo;
    if (lower > lo && lower < hi) {
        double dl = 0.0;
        const double gl = g(lower, &dl);
        if (gl < 0.0) {
            lo = rho = lower;
            grho = gl;
            dg = dl;
        } else {
            hi = lower;
        }
    }

    // g is increasing and concave, so Newton from the left stays left of the
    // root; bisection guards against round-off.
    int it = 0;
    for (; it < 200; ++it) {
        double step = -grho / dg;
        double next = rho + step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double gn = g(next, &dg);
        if (gn < 0.0)
            lo = next;
        else
            hi = next;
        const double moved = std::abs(next - rho);
        rho = next;
        grho = gn;
        if (gn == 0.0 || moved <= 1e-15 * (1.0 + rho) || hi - lo <= 1e-15 * (1.0 + hi)) break;
    }
    if (iters) *iters = it + 1;
    for (std::size_t j = 0; j < n; ++j) m_out[j] = rho * m[j] / (rho + 2.0 * w[j] * lambda);
    return rho;
}

} // namespace detail

/// argmin over rho >= 0, m of  sum_j w_j m_j^2/rho + ((rho - rho_bar)^2 + |m - m_bar|^2) / (2 lambda).
inline ProxResult prox_perspective(double rho_bar, std::span<const Momentum> momenta, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InputError("prox_perspective: step must be positive");
    if (!std::isfinite(rho_bar)) throw InputError("prox_perspective: non-finite density");
    std::vector<double> m, w;
    m.reserve(momenta.size());
    w.reserve(momenta.size());
    for (const auto& mo : momenta) {
        if (!std::isfinite(mo.value)) throw InputError("prox_perspective: non-finite momentum");
        if (!(mo.weight > 0.0) || !std::isfinite(mo.weight)) throw InputError("prox_perspective: weights must be positive");
        m.push_back(mo.value);
        w.push_back(mo.weight);
    }
    ProxResult out;
    out.momenta.resize(m.size());
    out.rho = detail::prox_perspective_raw(rho_bar, m.data(), w.data(), m.size(), lambda, out.momenta.data(),
                                           &out.iterations);
    return out;
}

/// Pointwise prox of lambda * centered_energy, independently per (slab, cell, channel).
inline CenteredFields apply_prox(const CenteredFields& v, const CouplingLayout& layout, const ChannelGraph& graph,
                                 const GridSpec& g, double lambda, unsigned threads = 1) {
    if (!(lambda > 0.0)) throw InputError("apply_prox: step must be positive");
    if (v.r.sites != graph.n_channels()) throw DimensionError("apply_prox: centred state does not match the graph");
    for (double x : v.r.values)
        if (!std::isfinite(x)) throw InputError("apply_prox: non-finite density");
    CenteredFields out = v;
    const double step = lambda * g.ht();
    const bool use_x = g.nx > 1, use_y = g.ny > 1;
    const std::size_t channels = graph.n_channels();
    std::size_t max_terms = 2;
    for (const auto& list : layout.copies_of_channel) max_terms = std::max(max_terms, list.size() + 2);

    parallel_for(g.cells(), threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> m(max_terms), w(max_terms), mo(max_terms);
        for (std::size_t c = 0; c < channels; ++c) {
            const auto& mine = layout.copies_of_channel[c];
            const double w1 = graph.w1()[c];
            for (std::size_t cell = begin; cell < end; ++cell)
                for (std::size_t k = 0; k < g.nt; ++k) {
                    std::size_t n = 0;
                    if (use_x) { m[n] = v.mx(c, cell, k); w[n++] = w1; }
                    if (use_y) { m[n] = v.my(c, cell, k); w[n++] = w1; }
                    for (auto q : mine) { m[n] = v.q(q, cell, k); w[n++] = layout.copies[q].weight; }
                    const double rho = detail::prox_perspective_raw(v.r(c, cell, k), m.data(), w.data(), n, step, mo.data());
                    out.r(c, cell, k) = rho;
                    n = 0;
                    out.mx(c, cell, k) = use_x ? mo[n++] : 0.0;
                    out.my(c, cell, k) = use_y ? mo[n++] : 0.0;
                    for (auto q : mine) out.q(q, cell, k) = mo[n++];
                }
        }
    });
    return out;
}

} // namespace uomt
