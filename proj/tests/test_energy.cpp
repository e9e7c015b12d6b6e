#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "uomt/energy.hpp"
#include "uomt/oracles.hpp"

using namespace uomt;

namespace {

std::mt19937_64 rng(99);

double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

// Zooming grid search over (rho, m) for the single-momentum prox objective.
std::pair<double, double> grid_prox_2d(double rho_bar, double m_bar, double w, double lambda) {
    const auto f = [&](double r, double m) {
        const double e = r > 0.0 ? w * m * m / r : (m == 0.0 ? 0.0 : INFINITY);
        return e + ((r - rho_bar) * (r - rho_bar) + (m - m_bar) * (m - m_bar)) / (2.0 * lambda);
    };
    double r0 = 0.0, r1 = 5.0, m0 = -5.0, m1 = 5.0, br = 0.0, bm = 0.0;
    for (int level = 0; level < 12; ++level) {
        double best = INFINITY;
        const int n = 200;
        for (int a = 0; a <= n; ++a)
            for (int b = 0; b <= n; ++b) {
                const double r = r0 + (r1 - r0) * a / n, m = m0 + (m1 - m0) * b / n;
                const double v = f(r, m);
                if (v < best) {
                    best = v;
                    br = r;
                    bm = m;
                }
            }
        const double dr = 4.0 * (r1 - r0) / n, dm = 4.0 * (m1 - m0) / n;
        r0 = std::max(0.0, br - dr);
        r1 = br + dr;
        m0 = bm - dm;
        m1 = bm + dm;
    }
    return {br, bm};
}

GridSpec line_grid() { return GridSpec{4, 1, 3}; }

StateFields random_state(const GridSpec& g, const ChannelGraph& graph) {
    StateFields s(g, graph.n_channels(), graph.n_edges());
    for (auto& v : s.rho.values) v = uniform(0.2, 2.0);
    for (std::size_t c = 0; c < s.channels(); ++c)
        for (std::size_t k = 0; k < g.nt; ++k) {
            for (std::size_t j = 0; j < g.ny; ++j)
                for (std::size_t i = 1; i < g.nx; ++i) s.p.x[s.p.x_index(c, i, j, k)] = uniform(-1, 1);
            for (std::size_t j = 1; j < g.ny; ++j)
                for (std::size_t i = 0; i < g.nx; ++i) s.p.y[s.p.y_index(c, i, j, k)] = uniform(-1, 1);
        }
    for (auto& v : s.u.values) v = uniform(-1, 1);
    return s;
}

} // namespace

TEST(EdgeDensity, Modes) {
    const ChannelGraph g({"a", "b"}, {{0, 1}});
    CellField r(1, 2, 2);
    r(0, 0, 0) = 2.0;
    r(1, 0, 0) = 2.0;
    r(0, 1, 0) = 1.0;
    r(1, 1, 0) = 3.0;
    const auto d = edge_density(r, g, EdgeDensityModes{});
    EXPECT_DOUBLE_EQ(d(0, 0, 0), 1.0);
    EXPECT_DOUBLE_EQ(d(0, 1, 0), 0.75);

    CellField a(1, 1, 1, 0.5), b(1, 1, 1, 0.5);
    const auto ap = augment_scalar(a, b, Placement::uniform(), 1e-3, 1.0);
    CellField m(1, 1, 2);
    m(0, 0, 0) = 0.7;
    m(1, 0, 0) = 0.01;
    EXPECT_DOUBLE_EQ(edge_density(m, ap.graph, EdgeDensityModes{})(0, 0, 0), 0.7);

    r(1, 1, 0) = 0.0;
    EXPECT_EQ(edge_density(r, g, EdgeDensityModes{})(0, 1, 0), 0.0);
    r(1, 1, 0) = -1.0;
    EXPECT_THROW(edge_density(r, g, EdgeDensityModes{}), InputError);
}

TEST(EdgeDensity, PrimaryEndpointNeedsSourceLayer) {
    const ChannelGraph g({"a", "b"}, {{0, 1}});
    EdgeDensityModes modes;
    modes.original = EdgeDensityMode::primary_endpoint;
    EXPECT_THROW(CouplingLayout(g, modes), InputError);
    EXPECT_EQ(parse_edge_density_mode("two_point"), EdgeDensityMode::two_point);
    EXPECT_THROW(parse_edge_density_mode("harmonic"), InputError);
}

TEST(Energy, PerspectiveClosure) {
    EXPECT_EQ(perspective(0.0, 0.0), 0.0);
    EXPECT_EQ(perspective(4.0, 2.0), 2.0);
    EXPECT_TRUE(std::isinf(perspective(1.0, 0.0)));
    EXPECT_TRUE(std::isinf(perspective(1.0, -1.0)));
}

TEST(Energy, ZeroMomentaGiveZero) {
    const GridSpec g{3, 3, 4};
    const auto graph = ChannelGraph::complete({"a", "b"});
    StateFields s(g, 2, 1);
    for (auto& v : s.rho.values) v = uniform(0.0, 1.0);
    EXPECT_EQ(total_energy(s, graph, g, {}).total, 0.0);
}

TEST(Energy, SingleCellSpatialTerm) {
    const GridSpec g{1, 1, 1};
    const auto graph = ChannelGraph::isolated({"a"});
    const CouplingLayout layout(graph, {});
    CenteredFields v(g, 1, 0);
    v.r(0, 0, 0) = 2.0;
    v.mx(0, 0, 0) = 3.0;
    const auto e = centered_energy(v, layout, graph, g);
    EXPECT_DOUBLE_EQ(e.spatial_by_channel[0], 4.5);
    EXPECT_DOUBLE_EQ(e.total, 4.5);
}

TEST(Energy, VacuumFluxIsInfinite) {
    const GridSpec g{2, 1, 1};
    const auto graph = ChannelGraph::isolated({"a"});
    StateFields s(g, 1, 0);
    s.p.x[s.p.x_index(0, 1, 0, 0)] = 1.0;
    EXPECT_FALSE(total_energy(s, graph, g, {}).finite());
}

TEST(Energy, SourceLayerReproducesReactionIntegrand) {
    // Two-layer state: the transport part on channel 0, the source term
    // gamma s^2 / rho, and epsilon times the layer's own transport.
    const GridSpec g = line_grid();
    CellField a(1, g.cells(), 1, 0.25), b(1, g.cells(), 1, 0.5);
    const double eps = 1e-2, gamma = 3.0;
    const auto ap = augment_scalar(a, b, Placement::uniform(), eps, gamma);
    const auto s = random_state(g, ap.graph);
    const auto e = total_energy(s, ap.graph, g, {});

    const double ht = g.ht();
    double transport[2] = {0, 0}, reaction = 0.0;
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < g.nx; ++i)
            for (std::size_t k = 0; k < g.nt; ++k) {
                const double rm = 0.5 * (s.rho(c, i, k) + s.rho(c, i, k + 1));
                const double left = i > 0 ? s.p.x[s.p.x_index(c, i, 0, k)] : 0.0;
                const double right = i + 1 < g.nx ? s.p.x[s.p.x_index(c, i + 1, 0, k)] : 0.0;
                const double pm = 0.5 * (left + right);
                transport[c] += ht * pm * pm / rm;
                if (c == 0) reaction += ht * s.u(0, i, k) * s.u(0, i, k) / rm;
            }
    EXPECT_NEAR(e.spatial_by_channel[0], transport[0], 1e-13);
    EXPECT_NEAR(e.spatial_by_channel[1], eps * transport[1], 1e-13);
    EXPECT_NEAR(e.edge_by_edge[0], gamma * reaction, 1e-13);
    EXPECT_NEAR(e.total, transport[0] + gamma * reaction + eps * transport[1], 1e-13);
}

TEST(Energy, TwoPointIsHarmonicEdgeDensity) {
    const GridSpec g{3, 2, 2};
    const auto graph = ChannelGraph::complete({"a", "b", "c"});
    const auto s = random_state(g, graph);
    const auto e = total_energy(s, graph, g, {});
    const auto mid = time_average(s.rho);
    const auto rt = edge_density(mid, graph, {});
    for (std::size_t ed = 0; ed < graph.n_edges(); ++ed) {
        double acc = 0.0;
        for (std::size_t cell = 0; cell < g.cells(); ++cell)
            for (std::size_t k = 0; k < g.nt; ++k) acc += g.ht() * s.u(ed, cell, k) * s.u(ed, cell, k) / rt(ed, cell, k);
        EXPECT_NEAR(e.edge_by_edge[ed], acc, 1e-12 * acc);
    }
}

TEST(Energy, NonnegativeAndOneHomogeneous) {
    const GridSpec g{4, 3, 3};
    const auto graph = ChannelGraph::complete({"a", "b"});
    for (int trial = 0; trial < 5; ++trial) {
        auto s = random_state(g, graph);
        const double e = total_energy(s, graph, g, {}).total;
        EXPECT_GT(e, 0.0);
        for (auto* arr : arrays(s))
            for (auto& v : *arr) v *= 2.5;
        EXPECT_NEAR(total_energy(s, graph, g, {}).total, 2.5 * e, 1e-12 * e);
    }
}

TEST(Prox, TrivialCases) {
    const std::vector<Momentum> zero{{0.0, 1.0}};
    auto r = prox_perspective(5.0, zero, 1.0);
    EXPECT_EQ(r.rho, 5.0);
    EXPECT_EQ(r.momenta[0], 0.0);
    r = prox_perspective(-2.0, zero, 1.0);
    EXPECT_EQ(r.rho, 0.0);
    EXPECT_EQ(r.momenta[0], 0.0);
}

TEST(Prox, SingleMomentumExample) {
    // Objective m^2/rho + ((rho)^2 + (m-2)^2)/2: optimality gives rho(rho+2)^2 = 4.
    const std::vector<Momentum> mb{{2.0, 1.0}};
    const auto r = prox_perspective(0.0, mb, 1.0);
    const auto [gr, gm] = grid_prox_2d(0.0, 2.0, 1.0, 1.0);
    EXPECT_NEAR(r.rho, gr, 1e-6);
    EXPECT_NEAR(r.momenta[0], gm, 1e-6);
    EXPECT_NEAR(r.rho, 0.594313, 1e-6);
    EXPECT_NEAR(r.rho * (r.rho + 2) * (r.rho + 2), 4.0, 1e-12);
    EXPECT_NEAR(r.momenta[0], r.rho * 2.0 / (r.rho + 2.0), 1e-15);
}

TEST(Prox, MatchesBruteForce) {
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + trial % 3;
        const double rho_bar = uniform(-1.0, 2.0), lambda = uniform(0.05, 2.0);
        std::vector<double> m(n), w(n);
        std::vector<Momentum> mo;
        for (std::size_t j = 0; j < n; ++j) {
            m[j] = uniform(-2.0, 2.0);
            w[j] = uniform(0.01, 3.0);
            mo.push_back({m[j], w[j]});
        }
        const auto fast = prox_perspective(rho_bar, mo, lambda);
        const auto slow = oracles::prox_bruteforce(rho_bar, m, w, lambda);
        EXPECT_NEAR(fast.rho, slow.rho, 1e-6) << "trial " << trial;
        for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(fast.momenta[j], slow.momenta[j], 1e-6);
    }
}

TEST(Prox, FirmlyNonexpansive) {
    for (int trial = 0; trial < 200; ++trial) {
        const double lambda = uniform(0.1, 2.0), w = uniform(0.1, 2.0);
        const double ra = uniform(-1, 2), rb = uniform(-1, 2), ma = uniform(-2, 2), mb = uniform(-2, 2);
        const std::vector<Momentum> A{{ma, w}}, B{{mb, w}};
        const auto pa = prox_perspective(ra, A, lambda), pb = prox_perspective(rb, B, lambda);
        const double dx2 = (ra - rb) * (ra - rb) + (ma - mb) * (ma - mb);
        const double dp = pa.rho - pb.rho, dm = pa.momenta[0] - pb.momenta[0];
        const double inner = dp * (ra - rb) + dm * (ma - mb);
        EXPECT_LE(dp * dp + dm * dm, dx2 + 1e-12);
        EXPECT_LE(dp * dp + dm * dm, inner + 1e-12);
    }
}

TEST(Prox, RejectsBadInput) {
    const std::vector<Momentum> bad{{1.0, 0.0}};
    EXPECT_THROW(prox_perspective(1.0, bad, 1.0), InputError);
    const std::vector<Momentum> ok{{1.0, 1.0}};
    EXPECT_THROW(prox_perspective(NAN, ok, 1.0), InputError);
    EXPECT_THROW(prox_perspective(1.0, ok, 0.0), InputError);
}

TEST(ApplyProx, ZeroMomentaClamp) {
    const GridSpec g{3, 2, 2};
    const auto graph = ChannelGraph::complete({"a", "b"});
    const CouplingLayout layout(graph, {});
    CenteredFields v(g, 2, layout.copies.size());
    for (auto& x : v.r.values) x = uniform(-1, 1);
    const auto out = apply_prox(v, layout, graph, g, 0.7);
    for (std::size_t i = 0; i < v.r.values.size(); ++i) EXPECT_EQ(out.r.values[i], std::max(v.r.values[i], 0.0));
    for (double x : out.mx.values) EXPECT_EQ(x, 0.0);
    for (double x : out.q.values) EXPECT_EQ(x, 0.0);
}

TEST(ApplyProx, IsTheProximalPoint) {
    const GridSpec g{3, 3, 2};
    CellField a(1, g.cells(), 2, 0.1), b(1, g.cells(), 2, 0.2);
    const auto ap = augment_vector(a, b, ChannelGraph::complete({"x", "y"}), Placement::uniform(), 0.05, 2.0, 0.5);
    const CouplingLayout layout(ap.graph, {});
    const double lambda = 0.8;
    const auto objective = [&](const CenteredFields& y, const CenteredFields& x) {
        double d2 = 0.0;
        const auto ya = arrays(y), xa = arrays(x);
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t i = 0; i < ya[k]->size(); ++i) d2 += ((*ya[k])[i] - (*xa[k])[i]) * ((*ya[k])[i] - (*xa[k])[i]);
        return centered_energy(y, layout, ap.graph, g).total + d2 / (2.0 * lambda);
    };
    for (int trial = 0; trial < 5; ++trial) {
        CenteredFields v(g, ap.graph.n_channels(), layout.copies.size());
        for (auto* arr : arrays(v))
            for (auto& x : *arr) x = uniform(-1, 1);
        for (auto& x : v.r.values) x = uniform(0.05, 1.5);
        const auto p = apply_prox(v, layout, ap.graph, g, lambda);
        const double best = objective(p, v);
        EXPECT_LE(best, objective(v, v) + 1e-12);
        for (int k = 0; k < 20; ++k) {
            CenteredFields y = p;
            for (auto* arr : arrays(y))
                for (auto& x : *arr) x += 1e-3 * uniform(-1, 1);
            for (auto& x : y.r.values) x = std::max(x, 0.0);
            EXPECT_LE(best, objective(y, v) + 1e-12);
        }
    }
}

TEST(ApplyProx, ThreadCountDoesNotChangeResult) {
    const GridSpec g{5, 4, 3};
    const auto graph = ChannelGraph::complete({"a", "b", "c"});
    const CouplingLayout layout(graph, {});
    CenteredFields v(g, 3, layout.copies.size());
    for (auto* arr : arrays(v))
        for (auto& x : *arr) x = uniform(-1, 1);
    const auto one = apply_prox(v, layout, graph, g, 1.0, 1);
    const auto four = apply_prox(v, layout, graph, g, 1.0, 4);
    EXPECT_EQ(one.r.values, four.r.values);
    EXPECT_EQ(one.q.values, four.q.values);
}
