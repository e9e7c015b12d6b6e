#pragma once

// Channel graph: channels are the layers of a vector-valued density, edges
// carry inter-channel flux. Also hosts the source-layer augmentation that
// turns an unbalanced problem (scalar or vector) into a balanced vector one.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uomt/error.hpp"
#include "uomt/grid.hpp"

namespace uomt {

struct Edge {
    std::size_t source = 0;
    std::size_t sink = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

enum class EdgeKind { original, augmentation };

class ChannelGraph {
public:
    ChannelGraph() = default;

    ChannelGraph(std::vector<std::string> names, std::vector<Edge> edges)
        : names_(std::move(names)), edges_(std::move(edges)),
          kinds_(edges_.size(), EdgeKind::original), w1_(names_.size(), 1.0),
          w2_(edges_.size(), 1.0) {
        validate();
    }

    /// Channels with no edges between them.
    static ChannelGraph isolated(std::vector<std::string> names) {
        return ChannelGraph(std::move(names), {});
    }

    /// One edge per unordered channel pair, oriented from lower to higher index.
    static ChannelGraph complete(std::vector<std::string> names) {
        std::vector<Edge> edges;
        for (std::size_t a = 0; a < names.size(); ++a)
            for (std::size_t b = a + 1; b < names.size(); ++b) edges.push_back({a, b});
        return ChannelGraph(std::move(names), std::move(edges));
    }

    std::size_t n_channels() const { return names_.size(); }
    std::size_t n_edges() const { return edges_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const Edge& edge(std::size_t e) const { return edges_.at(e); }
    EdgeKind kind(std::size_t e) const { return kinds_.at(e); }
    const std::vector<double>& w1() const { return w1_; }
    const std::vector<double>& w2() const { return w2_; }
    std::optional<std::size_t> source_layer() const { return source_layer_; }
    bool is_augmented() const { return source_layer_.has_value(); }

    std::optional<std::size_t> channel_index(const std::string& name) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return i;
        return std::nullopt;
    }

    /// Channels other than the source layer.
    std::size_t n_original_channels() const { return n_channels() - (is_augmented() ? 1 : 0); }

    void set_channel_weights(std::vector<double> w1) {
        if (w1.size() != n_channels()) throw DimensionError("graph: one spatial weight per channel");
        w1_ = std::move(w1);
        validate();
    }

    void set_edge_weights(std::vector<double> w2) {
        if (w2.size() != n_edges()) throw DimensionError("graph: one flux weight per edge");
        w2_ = std::move(w2);
        validate();
    }

    /// Incidence F (channels x edges, row-major): +1 at the edge source, -1 at its sink.
    std::vector<int> incidence() const {
        std::vector<int> F(n_channels() * n_edges(), 0);
        for (std::size_t e = 0; e < n_edges(); ++e) {
            F[edges_[e].source * n_edges() + e] = 1;
            F[edges_[e].sink * n_edges() + e] = -1;
        }
        return F;
    }

    /// F1: indicator of edge sources.
    std::vector<int> source_incidence() const {
        std::vector<int> F1(n_channels() * n_edges(), 0);
        for (std::size_t e = 0; e < n_edges(); ++e) F1[edges_[e].source * n_edges() + e] = 1;
        return F1;
    }

    /// F2 = F1 - F: indicator of edge sinks.
    std::vector<int> sink_incidence() const {
        std::vector<int> F2(n_channels() * n_edges(), 0);
        for (std::size_t e = 0; e < n_edges(); ++e) F2[edges_[e].sink * n_edges() + e] = 1;
        return F2;
    }

    /// Connected-component label per channel.
    std::vector<std::size_t> components() const {
        std::vector<std::size_t> parent(n_channels());
        std::iota(parent.begin(), parent.end(), std::size_t{0});
        auto find = [&](std::size_t a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        for (const auto& e : edges_) parent[find(e.source)] = find(e.sink);
        std::vector<std::size_t> label(n_channels());
        std::vector<std::size_t> root_label(n_channels(), n_channels());
        std::size_t next = 0;
        for (std::size_t c = 0; c < n_channels(); ++c) {
            const auto r = find(c);
            if (root_label[r] == n_channels()) root_label[r] = next++;
            label[c] = root_label[r];
        }
        return label;
    }

    bool is_connected() const {
        const auto lab = components();
        for (auto l : lab)
            if (l != 0) return false;
        return true;
    }

private:
    friend struct GraphAugmenter;

    void validate() const {
        if (names_.empty()) throw InputError("graph: at least one channel is required");
        for (const auto& e : edges_) {
            if (e.source >= names_.size() || e.sink >= names_.size())
                throw InputError("graph: edge endpoint out of range");
            if (e.source == e.sink) throw InputError("graph: self-loop edges are not allowed");
        }
        for (double w : w1_)
            if (!(w > 0.0) || !std::isfinite(w))
                throw InputError("graph: channel weights must be positive and finite");
        for (double w : w2_)
            if (!(w > 0.0) || !std::isfinite(w))
                throw InputError("graph: edge weights must be positive and finite");
    }

    std::vector<std::string> names_;
    std::vector<Edge> edges_;
    std::vector<EdgeKind> kinds_;
    std::vector<double> w1_;
    std::vector<double> w2_;
    std::optional<std::size_t> source_layer_;
};

// ---------------------------------------------------------------------------
// Graph divergence  (F2 - F1) u : positive flow leaves the source channel of
// an edge and arrives at its sink channel.

inline CellField graph_divergence(const EdgeFluxField& u, const ChannelGraph& graph) {
    if (u.sites != graph.n_edges())
        throw DimensionError("graph_divergence: flux field has the wrong number of edges");
    CellField out(u.times, u.cells, graph.n_channels());
    for (std::size_t e = 0; e < graph.n_edges(); ++e) {
        const auto [a, b] = graph.edge(e);
        for (std::size_t c = 0; c < u.cells; ++c) {
            auto src = u.line(e, c);
            auto from = out.line(a, c);
            auto to = out.line(b, c);
            for (std::size_t k = 0; k < u.times; ++k) {
                from[k] -= src[k];
                to[k] += src[k];
            }
        }
    }
    return out;
}

inline EdgeFluxField graph_divergence_adjoint(const CellField& q, const ChannelGraph& graph) {
    if (q.sites != graph.n_channels())
        throw DimensionError("graph_divergence_adjoint: field has the wrong number of channels");
    EdgeFluxField u(q.times, q.cells, graph.n_edges());
    for (std::size_t e = 0; e < graph.n_edges(); ++e) {
        const auto [a, b] = graph.edge(e);
        for (std::size_t c = 0; c < q.cells; ++c) {
            auto from = q.line(a, c);
            auto to = q.line(b, c);
            auto dst = u.line(e, c);
            for (std::size_t k = 0; k < q.times; ++k) dst[k] = to[k] - from[k];
        }
    }
    return u;
}

// ---------------------------------------------------------------------------
// Source-layer augmentation.

enum class PlacementKind { uniform, mask };

/// Where the mass deficit is put inside the source layer.
struct Placement {
    PlacementKind kind = PlacementKind::uniform;
    std::vector<double> mask; // one nonnegative value per cell when kind == mask

    static Placement uniform() { return {}; }
    static Placement masked(std::vector<double> m) { return {PlacementKind::mask, std::move(m)}; }

    /// Nonnegative per-cell fractions summing to one.
    std::vector<double> fractions(std::size_t cells) const {
        if (kind == PlacementKind::uniform) return std::vector<double>(cells, 1.0 / static_cast<double>(cells));
        if (mask.size() != cells) throw DimensionError("placement: mask size does not match the grid");
        double total = 0.0;
        for (double v : mask) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("placement: mask must be nonnegative");
            total += v;
        }
        if (!(total > 0.0)) throw InputError("placement: mask is identically zero");
        std::vector<double> f(cells);
        for (std::size_t c = 0; c < cells; ++c) f[c] = mask[c] / total;
        return f;
    }
};

struct AugmentationReport {
    std::size_t source_channel_index = 0;
    std::vector<std::size_t> added_edges;
    /// Signed total-mass difference, target total minus source total.
    double mass_deficit = 0.0;
    PlacementKind placement = PlacementKind::uniform;
};

struct AugmentedProblem {
    ChannelGraph graph;
    CellField rho0;
    CellField rho1;
    AugmentationReport report;
};

struct GraphAugmenter {
    static AugmentedProblem run(const CellField& rho0, const CellField& rho1, const ChannelGraph& base,
                                const Placement& placement, double epsilon, double gamma, double eta) {
        if (base.is_augmented())
            throw InputError("augment: graph already carries a source layer; refusing to augment twice");
        if (rho0.times != 1 || rho1.times != 1)
            throw DimensionError("augment: endpoints must be single time slices");
        if (!rho0.same_shape(rho1)) throw DimensionError("augment: endpoint shapes differ");
        if (rho0.sites != base.n_channels())
            throw DimensionError("augment: endpoint channel count does not match the graph");
        if (base.n_channels() > 1 && !base.is_connected())
            throw InputError("augment: base channel graph must be connected");
        for (double w : {epsilon, gamma, eta})
            if (!(w > 0.0) || !std::isfinite(w))
                throw InputError("augment: epsilon, gamma and eta must be positive");

        double m0 = 0.0, m1 = 0.0;
        for (double v : rho0.values) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("augment: negative or non-finite density in source");
            m0 += v;
        }
        for (double v : rho1.values) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("augment: negative or non-finite density in target");
            m1 += v;
        }
        if (m0 == 0.0 && m1 == 0.0) throw InputError("augment: both endpoint totals are zero");

        const std::size_t n = base.n_channels();
        const std::size_t cells = rho0.cells;
        const auto frac = placement.fractions(cells);

        ChannelGraph g;
        g.names_ = base.names_;
        g.names_.push_back("source");
        g.edges_ = base.edges_;
        g.kinds_.assign(base.n_edges(), EdgeKind::original);
        g.w1_ = base.w1_;
        g.w1_.push_back(epsilon);
        g.w2_.assign(base.n_edges(), gamma);
        AugmentationReport report;
        report.source_channel_index = n;
        report.placement = placement.kind;
        for (std::size_t c = 0; c < n; ++c) {
            report.added_edges.push_back(g.edges_.size());
            g.edges_.push_back({n, c});
            g.kinds_.push_back(EdgeKind::augmentation);
            g.w2_.push_back(eta);
        }
        g.source_layer_ = n;
        g.validate();

        auto extend = [&](const CellField& f) {
            CellField out(1, cells, n + 1);
            std::copy(f.values.begin(), f.values.end(), out.values.begin());
            return out;
        };
        AugmentedProblem out{std::move(g), extend(rho0), extend(rho1), report};
        out.report.mass_deficit = m1 - m0;
        // The lighter side receives the difference in its source layer.
        CellField& lighter = m0 > m1 ? out.rho1 : out.rho0;
        const double deficit = std::abs(m1 - m0);
        for (std::size_t c = 0; c < cells; ++c) lighter(n, c, 0) = deficit * frac[c];
        return out;
    }
};

/// Scalar unbalanced problem as a two-layer vector problem: channel 0 is the
/// input, channel 1 the source layer, one edge source-layer -> input with
/// weight gamma, spatial weights (1, epsilon).
inline AugmentedProblem augment_scalar(const CellField& rho0, const CellField& rho1, const Placement& placement,
                                       double epsilon, double gamma) {
    if (rho0.sites != 1 || rho1.sites != 1)
        throw DimensionError("augment_scalar: endpoints must have exactly one channel");
    return GraphAugmenter::run(rho0, rho1, ChannelGraph::isolated({"density"}), placement, epsilon, gamma, gamma);
}

/// Vector unbalanced problem: adds one source layer connected to every
/// original channel. Original edges get weight gamma, new edges eta.
inline AugmentedProblem augment_vector(const CellField& rho0, const CellField& rho1, const ChannelGraph& base,
                                       const Placement& placement, double epsilon, double gamma, double eta) {
    return GraphAugmenter::run(rho0, rho1, base, placement, epsilon, gamma, eta);
}

/// Source field s per (original channel, cell, slab): the flux on the edge
/// source-layer -> channel. Positive values create mass.
inline CellField recover_source(const EdgeFluxField& u, const ChannelGraph& graph) {
    if (!graph.is_augmented()) throw InputError("recover_source: problem has no source layer");
    if (u.sites != graph.n_edges()) throw DimensionError("recover_source: flux field does not match the graph");
    const std::size_t sl = *graph.source_layer();
    CellField s(u.times, u.cells, graph.n_original_channels());
    for (std::size_t e = 0; e < graph.n_edges(); ++e) {
        if (graph.kind(e) != EdgeKind::augmentation) continue;
        const auto& ed = graph.edge(e);
        if (ed.source != sl) throw InputError("recover_source: augmentation edge is not oriented from the source layer");
        for (std::size_t c = 0; c < u.cells; ++c) {
            auto src = u.line(e, c);
            auto dst = s.line(ed.sink, c);
            for (std::size_t k = 0; k < u.times; ++k) dst[k] += src[k];
        }
    }
    return s;
}

} // namespace uomt
