#pragma once

// Douglas-Rachford splitting for the discretised dynamic transport problem.
//
// The iterate lives in the product of the staggered space U = (rho, p, u) and
// the centred space V = (r, mx, my, q) on which the energy is pointwise. The
// two functions being split are
//
//     G1(U, V) = indicator{A U = 0 with endpoints}  +  J(V)
//     G2(U, V) = indicator{V = K U}
//
// where K is the staggered-to-centred interpolation. prox G1 is the exact
// continuity projection next to the exact pointwise perspective prox; prox G2
// is a set of constant-coefficient tridiagonal solves.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "uomt/energy.hpp"
#include "uomt/error.hpp"
#include "uomt/graph.hpp"
#include "uomt/grid.hpp"
#include "uomt/projection.hpp"

namespace uomt {

struct SolverOptions {
    double step = 1.0;        // lambda
    double relaxation = 1.8;  // alpha in (0, 2)
    int max_iters = 3000;
    double energy_rtol = 1e-5;
    double residual_tol = 1e-7;
    double cg_tol = 1e-10;
    int cg_maxiter = 500;
    int window = 10;
    unsigned threads = 1;
    bool deterministic = false;
    Preconditioner preconditioner = Preconditioner::spectral;

    void validate() const {
        if (!(step > 0.0) || !std::isfinite(step)) throw InputError("solver: step must be positive");
        if (!(relaxation > 0.0 && relaxation < 2.0)) throw InputError("solver: relaxation must lie in (0, 2)");
        if (max_iters < 1) throw InputError("solver: max_iters must be at least 1");
        if (!(energy_rtol > 0.0) || !(residual_tol > 0.0) || !(cg_tol > 0.0))
            throw InputError("solver: tolerances must be positive");
        if (cg_maxiter < 1 || window < 1) throw InputError("solver: cg_maxiter and window must be at least 1");
    }
};

struct Problem {
    GridSpec grid;
    ChannelGraph graph;
    CellField rho0; // one time slice, all channels of the graph
    CellField rho1;
    EdgeDensityModes modes;
    SolverOptions options;
    std::optional<AugmentationReport> augmentation;

    void validate() const {
        grid.validate();
        options.validate();
        if (rho0.times != 1 || rho1.times != 1 || rho0.cells != grid.cells() || rho1.cells != grid.cells())
            throw DimensionError("problem: endpoints do not match the grid");
        if (rho0.sites != graph.n_channels() || rho1.sites != graph.n_channels())
            throw DimensionError("problem: endpoints do not match the channel graph");
        for (const auto* f : {&rho0, &rho1})
            for (double v : f->values)
                if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("problem: endpoint densities must be nonnegative");
        // Every connected channel component must carry the same mass at both ends.
        const auto label = graph.components();
        std::vector<double> m0(graph.n_channels(), 0.0), m1(graph.n_channels(), 0.0), scale(graph.n_channels(), 0.0);
        for (std::size_t c = 0; c < graph.n_channels(); ++c) {
            const double a = channel_total(rho0, c, 0), b = channel_total(rho1, c, 0);
            m0[label[c]] += a;
            m1[label[c]] += b;
            scale[label[c]] += a + b;
        }
        for (std::size_t k = 0; k < graph.n_channels(); ++k)
            if (std::abs(m1[k] - m0[k]) > 1e-10 * std::max(scale[k], 1e-300))
                throw InfeasibleError("problem: endpoint totals differ (" + std::to_string(m0[k]) + " vs " +
                                      std::to_string(m1[k]) + "); augment the problem with a source layer");
        (void)CouplingLayout(graph, modes); // rejects invalid edge density modes
    }
};

struct IterationRecord {
    int iteration = 0;
    double energy = 0.0;
    double spatial = 0.0;
    double edge = 0.0;   // original inter-channel edges
    double source = 0.0; // source-layer edges
    double residual = 0.0;
    double gap = 0.0; // max |K U - V| between the two halves of the split
};

struct Solution {
    GridSpec grid;
    ChannelGraph graph;
    StateFields state;
    EnergyBreakdown energy;
    std::vector<IterationRecord> history;
    std::optional<CellField> source;
    std::optional<AugmentationReport> augmentation;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
    double gap = 0.0;
    double wall_time = 0.0;
};

namespace detail {

/// Symmetric tridiagonal solve with constant diagonal b and off-diagonal a,
/// applied to n unknowns spaced by stride, each a batch of contiguous values.
class ConstantTridiagonal {
public:
    ConstantTridiagonal(double off, double diag, std::size_t n) : a_(off), cprime_(n), denom_(n) {
        for (std::size_t i = 0; i < n; ++i) {
            denom_[i] = diag - (i > 0 ? off * cprime_[i - 1] : 0.0);
            cprime_[i] = off / denom_[i];
        }
    }

    void solve(double* x, std::size_t n, std::size_t stride, std::size_t batch) const {
        if (n == 0) return;
        for (std::size_t t = 0; t < batch; ++t) x[t] /= denom_[0];
        for (std::size_t i = 1; i < n; ++i) {
            double* cur = x + i * stride;
            const double* prev = x + (i - 1) * stride;
            for (std::size_t t = 0; t < batch; ++t) cur[t] = (cur[t] - a_ * prev[t]) / denom_[i];
        }
        for (std::size_t i = n - 1; i-- > 0;) {
            double* cur = x + i * stride;
            const double* next = x + (i + 1) * stride;
            for (std::size_t t = 0; t < batch; ++t) cur[t] -= cprime_[i] * next[t];
        }
    }

private:
    double a_;
    std::vector<double> cprime_;
    std::vector<double> denom_;
};

} // namespace detail

/// Projection onto the graph of the interpolation, {(U, V) : V = K U}.
class InterpolationCoupling {
public:
    InterpolationCoupling(const GridSpec& g, const CouplingLayout& layout)
        : g_(g), layout_(layout), time_(0.25, 1.5, g.nt > 1 ? g.nt - 1 : 0),
          x_(0.25, 1.5, g.nx > 1 ? g.nx - 1 : 0), y_(0.25, 1.5, g.ny > 1 ? g.ny - 1 : 0) {}

    CenteredFields apply(const StateFields& u) const { return interpolate(u, layout_, g_); }

    void project(StateFields& U, CenteredFields& V) const {
        const std::size_t nt = g_.nt, nx = g_.nx, ny = g_.ny;
        const std::size_t channels = U.channels();
        // Density along time: interior nodes 1..nt-1.
        if (nt > 1) {
            std::vector<double> line(nt - 1);
            for (std::size_t c = 0; c < channels; ++c)
                for (std::size_t cell = 0; cell < g_.cells(); ++cell) {
                    auto rho = U.rho.line(c, cell);
                    auto r = V.r.line(c, cell);
                    for (std::size_t j = 1; j < nt; ++j) {
                        double left = r[j - 1], right = r[j];
                        if (j - 1 == 0) left -= 0.5 * rho[0];
                        if (j == nt - 1) right -= 0.5 * rho[nt];
                        line[j - 1] = rho[j] + 0.5 * (left + right);
                    }
                    time_.solve(line.data(), nt - 1, 1, 1);
                    for (std::size_t j = 1; j < nt; ++j) rho[j] = line[j - 1];
                }
        }
        // x-momentum along x on interior faces 1..nx-1, batched over time.
        if (nx > 1) {
            std::vector<double> buf((nx - 1) * nt);
            for (std::size_t c = 0; c < channels; ++c)
                for (std::size_t j = 0; j < ny; ++j) {
                    for (std::size_t f = 1; f < nx; ++f) {
                        const double* p = &U.p.x[U.p.x_index(c, f, j, 0)];
                        const double* ml = &V.mx.values[V.mx.index(c, g_.cell(f - 1, j), 0)];
                        const double* mr = &V.mx.values[V.mx.index(c, g_.cell(f, j), 0)];
                        double* dst = &buf[(f - 1) * nt];
                        for (std::size_t k = 0; k < nt; ++k) dst[k] = p[k] + 0.5 * (ml[k] + mr[k]);
                    }
                    x_.solve(buf.data(), nx - 1, nt, nt);
                    for (std::size_t f = 1; f < nx; ++f)
                        std::copy_n(&buf[(f - 1) * nt], nt, &U.p.x[U.p.x_index(c, f, j, 0)]);
                }
        }
        if (ny > 1) {
            const std::size_t row = nx * nt;
            std::vector<double> buf((ny - 1) * row);
            for (std::size_t c = 0; c < channels; ++c) {
                for (std::size_t f = 1; f < ny; ++f) {
                    const double* p = &U.p.y[U.p.y_index(c, 0, f, 0)];
                    const double* md = &V.my.values[V.my.index(c, g_.cell(0, f - 1), 0)];
                    const double* mu = &V.my.values[V.my.index(c, g_.cell(0, f), 0)];
                    double* dst = &buf[(f - 1) * row];
                    for (std::size_t t = 0; t < row; ++t) dst[t] = p[t] + 0.5 * (md[t] + mu[t]);
                }
                y_.solve(buf.data(), ny - 1, row, row);
                for (std::size_t f = 1; f < ny; ++f)
                    std::copy_n(&buf[(f - 1) * row], row, &U.p.y[U.p.y_index(c, 0, f, 0)]);
            }
        }
        // Edge flux: each copy is the identity image of its edge.
        for (std::size_t e = 0; e < U.edges(); ++e) {
            const auto& mine = layout_.copies_of_edge[e];
            const double inv = 1.0 / (1.0 + static_cast<double>(mine.size()));
            for (std::size_t cell = 0; cell < g_.cells(); ++cell) {
                auto u = U.u.line(e, cell);
                for (std::size_t k = 0; k < nt; ++k) {
                    double s = u[k];
                    for (auto q : mine) s += V.q(q, cell, k);
                    u[k] = s * inv;
                }
            }
        }
        V = apply(U);
    }

private:
    GridSpec g_;
    CouplingLayout layout_;
    detail::ConstantTridiagonal time_;
    detail::ConstantTridiagonal x_;
    detail::ConstantTridiagonal y_;
};

/// Linear-in-time density, zero momentum and flux, projected onto the constraint.
inline StateFields initial_state(const Problem& problem, const ConstraintSystem& system) {
    const GridSpec& g = problem.grid;
    StateFields s(g, problem.graph.n_channels(), problem.graph.n_edges());
    for (std::size_t c = 0; c < s.channels(); ++c)
        for (std::size_t cell = 0; cell < g.cells(); ++cell) {
            const double a = problem.rho0(c, cell, 0), b = problem.rho1(c, cell, 0);
            for (std::size_t k = 0; k <= g.nt; ++k) {
                const double t = g.node_time(k);
                s.rho(c, cell, k) = (1.0 - t) * a + t * b;
            }
        }
    system.impose_endpoints(s);
    return system.project(s, problem.options.cg_tol, problem.options.cg_maxiter, problem.options.preconditioner);
}

inline StateFields initial_state(const Problem& problem) {
    problem.validate();
    const ConstraintSystem system(problem.grid, problem.graph, problem.rho0, problem.rho1);
    return initial_state(problem, system);
}

namespace detail {

inline double max_difference(const CenteredFields& a, const CenteredFields& b) {
    double m = 0.0;
    auto x = arrays(a);
    auto y = arrays(b);
    for (std::size_t k = 0; k < x.size(); ++k)
        for (std::size_t n = 0; n < x[k]->size(); ++n) m = std::max(m, std::abs((*x[k])[n] - (*y[k])[n]));
    return m;
}

template <class Fields>
void reflect(const Fields& x, const Fields& z, Fields& out) {
    // out = 2 x - z
    out = x;
    auto o = arrays(out);
    auto zz = arrays(z);
    for (std::size_t k = 0; k < o.size(); ++k)
        for (std::size_t n = 0; n < o[k]->size(); ++n) (*o[k])[n] = 2.0 * (*o[k])[n] - (*zz[k])[n];
}

template <class Fields>
void relax(Fields& z, const Fields& y, const Fields& x, double alpha) {
    // z += alpha (y - x)
    auto zz = arrays(z);
    auto yy = arrays(y);
    auto xx = arrays(x);
    for (std::size_t k = 0; k < zz.size(); ++k)
        for (std::size_t n = 0; n < zz[k]->size(); ++n) (*zz[k])[n] += alpha * ((*yy[k])[n] - (*xx[k])[n]);
}

} // namespace detail

inline Solution solve(const Problem& problem) {
    const auto t0 = std::chrono::steady_clock::now();
    problem.validate();
    const SolverOptions& opt = problem.options;
    const GridSpec& g = problem.grid;
    const unsigned threads = opt.deterministic ? 1u : std::max(1u, opt.threads);

    const ConstraintSystem system(g, problem.graph, problem.rho0, problem.rho1);
    const CouplingLayout layout(problem.graph, problem.modes);
    const InterpolationCoupling coupling(g, layout);

    // Energies below this are treated as zero by the stopping test: a millionth of
    // moving all the mass across the domain diagonal.
    const double energy_floor = 1e-6 * total_mass(problem.rho0, 0) * (g.Lx * g.Lx + g.Ly * g.Ly);

    StateFields zU = initial_state(problem, system);
    CenteredFields zV = coupling.apply(zU);

    StateFields xU, wU, yU;
    CenteredFields xV, wV, yV;
    Solution sol;
    sol.grid = g;
    sol.graph = problem.graph;
    sol.augmentation = problem.augmentation;

    for (int it = 1; it <= opt.max_iters; ++it) {
        xU = zU;
        xV = zV;
        coupling.project(xU, xV);
        detail::reflect(xU, zU, wU);
        detail::reflect(xV, zV, wV);
        yU = system.project(wU, opt.cg_tol, opt.cg_maxiter, opt.preconditioner);
        yV = apply_prox(wV, layout, problem.graph, g, opt.step, threads);
        detail::relax(zU, yU, xU, opt.relaxation);
        detail::relax(zV, yV, xV, opt.relaxation);

        const EnergyBreakdown e = centered_energy(yV, layout, problem.graph, g);
        IterationRecord rec;
        rec.iteration = it;
        rec.energy = e.total;
        rec.spatial = e.spatial_total();
        rec.edge = e.edge_total(problem.graph, EdgeKind::original);
        rec.source = e.edge_total(problem.graph, EdgeKind::augmentation);
        rec.residual = system.residual(yU).max_norm;
        rec.gap = detail::max_difference(coupling.apply(yU), yV);
        if (!std::isfinite(rec.energy) || !std::isfinite(rec.residual))
            throw ConvergenceError("solver: iteration " + std::to_string(it) + " produced a non-finite energy", rec.energy);
        sol.history.push_back(rec);
        sol.iterations = it;

        const int w = opt.window;
        if (it > w) {
            const double prev = sol.history[static_cast<std::size_t>(it - 1 - w)].energy;
            const double scale = std::max({std::abs(rec.energy), std::abs(prev), energy_floor});
            const bool energy_ok = std::abs(rec.energy - prev) <= opt.energy_rtol * scale;
            if (energy_ok && rec.residual <= opt.residual_tol) {
                sol.converged = true;
                break;
            }
        }
    }

    sol.state = yU;
    sol.energy = centered_energy(yV, layout, problem.graph, g);
    sol.residual = sol.history.empty() ? 0.0 : sol.history.back().residual;
    sol.gap = sol.history.empty() ? 0.0 : sol.history.back().gap;
    if (problem.graph.is_augmented()) sol.source = recover_source(sol.state.u, problem.graph);
    sol.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
}

/// Clipping threshold for negative densities: 1e-12, or ten times the final
/// splitting gap when that is larger. The returned state satisfies the
/// continuity equation exactly but only agrees with the (nonnegative) prox
/// point up to the gap.
inline double negative_tolerance(const Solution& sol) { return std::max(1e-12, 10.0 * sol.gap); }

/// nt+1 density slices (all channels, including a source layer if present).
/// Negatives down to -tolerance are clipped to zero; anything below is an
/// internal error. A negative tolerance selects negative_tolerance(sol).
inline std::vector<CellField> interpolation_frames(const Solution& sol, double tolerance = -1.0) {
    const GridSpec& g = sol.grid;
    const double negative_tolerance = tolerance < 0.0 ? uomt::negative_tolerance(sol) : tolerance;
    std::vector<CellField> frames;
    frames.reserve(g.nodes());
    for (std::size_t k = 0; k <= g.nt; ++k) {
        CellField f(1, g.cells(), sol.state.channels());
        for (std::size_t c = 0; c < f.sites; ++c)
            for (std::size_t cell = 0; cell < g.cells(); ++cell) {
                double v = sol.state.rho(c, cell, k);
                if (v < 0.0) {
                    if (v < -negative_tolerance)
                        throw Error("interpolation_frames: density " + std::to_string(v) + " at node " + std::to_string(k) +
                                    " is below the clipping tolerance");
                    v = 0.0;
                }
                f(c, cell, 0) = v;
            }
        frames.push_back(std::move(f));
    }
    return frames;
}

/// Source-layer mass at every time node; empty for non-augmented problems.
inline std::vector<double> source_layer_mass(const Solution& sol) {
    std::vector<double> out;
    if (!sol.graph.is_augmented()) return out;
    const std::size_t sl = *sol.graph.source_layer();
    for (std::size_t k = 0; k <= sol.grid.nt; ++k) out.push_back(channel_total(sol.state.rho, sl, k));
    return out;
}

/// Mass of the source layer at t = 1/2 (average of the two bracketing nodes when nt is odd).
inline double source_layer_mid_mass(const Solution& sol) {
    const auto m = source_layer_mass(sol);
    if (m.empty()) return 0.0;
    const std::size_t nt = sol.grid.nt;
    return nt % 2 == 0 ? m[nt / 2] : 0.5 * (m[nt / 2] + m[nt / 2 + 1]);
}

/// Time integral of the recovered source over all cells and channels.
inline double source_integral(const Solution& sol) {
    if (!sol.source) return 0.0;
    return sol.grid.ht() * sum(sol.source->values);
}

} // namespace uomt
