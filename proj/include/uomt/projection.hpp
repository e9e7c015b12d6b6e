#pragma once

// Affine continuity constraint
//
//     A(rho, p, u) = d_t rho + div_x p - div_F u = 0,  rho(0) = rho0, rho(1) = rho1
//
// and the Euclidean projection onto it through the normal equations
// A A^T y = A(x), solved matrix-free by preconditioned conjugate gradients.
// Endpoint densities are eliminated: they are constants, not unknowns.
//
// A A^T is a Kronecker sum of four one-dimensional Laplacians (time, x, y,
// channel graph), so its pseudo-inverse is available exactly from the
// eigenvectors of each factor. That is the default preconditioner; Jacobi is
// kept for comparison.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "uomt/error.hpp"
#include "uomt/graph.hpp"
#include "uomt/grid.hpp"

namespace uomt {

enum class Preconditioner { spectral, jacobi, none };

struct ProjectionStats {
    int cg_iterations = 0;
    double cg_relative_residual = 0.0;
    double residual_max = 0.0;
};

struct ResidualReport {
    CellField values;
    double max_norm = 0.0;
};

class ConstraintSystem {
public:
    ConstraintSystem(GridSpec g, ChannelGraph graph, CellField rho0, CellField rho1)
        : g_(g), graph_(std::move(graph)), rho0_(std::move(rho0)), rho1_(std::move(rho1)) {
        g_.validate();
        if (rho0_.times != 1 || rho1_.times != 1 || rho0_.cells != g_.cells() || rho1_.cells != g_.cells() ||
            rho0_.sites != graph_.n_channels() || rho1_.sites != graph_.n_channels())
            throw DimensionError("continuity: endpoints do not match grid and graph");
        build_factors();
    }

    const GridSpec& grid() const { return g_; }
    const ChannelGraph& graph() const { return graph_; }
    const CellField& rho0() const { return rho0_; }
    const CellField& rho1() const { return rho1_; }

    /// Copies the endpoint slices into the first and last time node.
    void impose_endpoints(StateFields& s) const {
        for (std::size_t c = 0; c < graph_.n_channels(); ++c)
            for (std::size_t cell = 0; cell < g_.cells(); ++cell) {
                s.rho(c, cell, 0) = rho0_(c, cell, 0);
                s.rho(c, cell, g_.nt) = rho1_(c, cell, 0);
            }
    }

    /// A applied to a full state, endpoints as stored in the state.
    CellField apply(const StateFields& s) const {
        check(s);
        CellField out = time_difference(s.rho, g_);
        const CellField div = spatial_divergence(s.p, g_);
        const CellField gdiv = graph_divergence(s.u, graph_);
        for (std::size_t n = 0; n < out.values.size(); ++n) out.values[n] += div.values[n] - gdiv.values[n];
        return out;
    }

    /// A^T restricted to the unknowns: endpoint density entries are zero.
    StateFields apply_adjoint(const CellField& y) const {
        StateFields s;
        s.rho = time_difference_adjoint(y, g_);
        for (std::size_t c = 0; c < s.rho.sites; ++c)
            for (std::size_t cell = 0; cell < g_.cells(); ++cell) {
                s.rho(c, cell, 0) = 0.0;
                s.rho(c, cell, g_.nt) = 0.0;
            }
        s.p = spatial_divergence_adjoint(y, g_);
        EdgeFluxField gu = graph_divergence_adjoint(y, graph_);
        for (double& v : gu.values) v = -v;
        s.u = std::move(gu);
        return s;
    }

    /// A A^T y with endpoints eliminated.
    CellField apply_normal(const CellField& y) const {
        StateFields s = apply_adjoint(y);
        return apply(s);
    }

    ResidualReport residual(const StateFields& state) const {
        StateFields s = state;
        impose_endpoints(s);
        ResidualReport r{apply(s), 0.0};
        r.max_norm = max_abs(r.values.values);
        return r;
    }

    /// Exact pseudo-inverse of A A^T on the range.
    CellField spectral_solve(const CellField& b) const {
        CellField x = b;
        transform(x.values, /*forward=*/true);
        for (std::size_t n = 0; n < x.values.size(); ++n) x.values[n] *= inverse_eigen_[n];
        transform(x.values, /*forward=*/false);
        return x;
    }

    /// Removes the component of b in the null space of A A^T (constants over
    /// each connected channel component).
    void remove_null_space(CellField& b) const {
        const auto label = graph_.components();
        const std::size_t ncomp = *std::max_element(label.begin(), label.end()) + 1;
        std::vector<double> mean(ncomp, 0.0), count(ncomp, 0.0);
        const std::size_t per_channel = b.cells * b.times;
        for (std::size_t c = 0; c < b.sites; ++c) {
            double s = 0.0;
            for (std::size_t n = 0; n < per_channel; ++n) s += b.values[c * per_channel + n];
            mean[label[c]] += s;
            count[label[c]] += static_cast<double>(per_channel);
        }
        for (std::size_t k = 0; k < ncomp; ++k) mean[k] /= count[k];
        for (std::size_t c = 0; c < b.sites; ++c)
            for (std::size_t n = 0; n < per_channel; ++n) b.values[c * per_channel + n] -= mean[label[c]];
    }

    /// Solves A A^T y = b by preconditioned CG to relative tolerance tol.
    CellField solve_normal(CellField b, double tol, int maxiter, Preconditioner pc, ProjectionStats* stats) const {
        remove_null_space(b);
        CellField y(b.times, b.cells, b.sites);
        const double bnorm = std::sqrt(dot(b.values, b.values));
        if (stats) *stats = {};
        if (bnorm == 0.0) return y;
        CellField r = b;
        CellField z = precondition(r, pc);
        CellField d = z;
        double rz = dot(r.values, z.values);
        double rel = 1.0;
        int it = 0;
        for (; it < maxiter; ++it) {
            const CellField Ad = apply_normal(d);
            const double dAd = dot(d.values, Ad.values);
            if (!(dAd > 0.0)) break;
            const double alpha = rz / dAd;
            for (std::size_t n = 0; n < y.values.size(); ++n) {
                y.values[n] += alpha * d.values[n];
                r.values[n] -= alpha * Ad.values[n];
            }
            rel = std::sqrt(dot(r.values, r.values)) / bnorm;
            if (rel <= tol) {
                ++it;
                break;
            }
            z = precondition(r, pc);
            const double rz_new = dot(r.values, z.values);
            const double beta = rz_new / rz;
            rz = rz_new;
            for (std::size_t n = 0; n < d.values.size(); ++n) d.values[n] = z.values[n] + beta * d.values[n];
        }
        if (stats) {
            stats->cg_iterations = it;
            stats->cg_relative_residual = rel;
        }
        if (!(rel <= tol))
            throw ConvergenceError("continuity projection: conjugate gradients did not converge in " +
                                       std::to_string(maxiter) + " iterations",
                                   rel);
        return y;
    }

    /// Euclidean projection of state_bar onto the continuity constraint with
    /// the endpoint densities fixed.
    StateFields project(const StateFields& state_bar, double cg_tol = 1e-10, int cg_maxiter = 500,
                        Preconditioner pc = Preconditioner::spectral, ProjectionStats* stats = nullptr) const {
        check(state_bar);
        StateFields x = state_bar;
        impose_endpoints(x);
        const CellField b = apply(x);
        ProjectionStats local;
        const CellField y = solve_normal(b, cg_tol, cg_maxiter, pc, &local);
        const StateFields aty = apply_adjoint(y);
        auto dst = arrays(x);
        auto src = arrays(aty);
        for (std::size_t a = 0; a < dst.size(); ++a)
            for (std::size_t n = 0; n < dst[a]->size(); ++n) (*dst[a])[n] -= (*src[a])[n];
        if (stats) {
            *stats = local;
            stats->residual_max = max_abs(apply(x).values);
        }
        return x;
    }

    /// Sum of A(state) over cells and channels per slab, divided out by ht:
    /// equals the total-mass change across the slab.
    double endpoint_imbalance() const {
        double m0 = 0.0, m1 = 0.0;
        for (double v : rho0_.values) m0 += v;
        for (double v : rho1_.values) m1 += v;
        return m1 - m0;
    }

private:
    void check(const StateFields& s) const {
        detail::check_nodes(s.rho, g_, "continuity");
        if (s.channels() != graph_.n_channels() || s.edges() != graph_.n_edges() || !s.p.conforms(g_, s.channels()))
            throw DimensionError("continuity: state does not match grid and graph");
    }

    CellField precondition(const CellField& r, Preconditioner pc) const {
        switch (pc) {
        case Preconditioner::spectral: {
            CellField z = spectral_solve(r);
            return z;
        }
        case Preconditioner::jacobi: {
            CellField z = r;
            for (std::size_t n = 0; n < z.values.size(); ++n) z.values[n] *= inverse_diagonal_[n];
            return z;
        }
        case Preconditioner::none: return r;
        }
        return r;
    }

    struct Axis {
        std::size_t len = 0;
        std::size_t stride = 0;
        Eigen::MatrixXd vectors; // columns are eigenvectors
        Eigen::VectorXd values;
        Eigen::VectorXd diagonal;
        std::vector<double> forward;  // V^T as coefficients [s * len + r] = V(s, r)
        std::vector<double> backward; // V as coefficients   [s * len + r] = V(r, s)
    };

    static Axis decompose(const Eigen::MatrixXd& D, std::size_t stride) {
        // D maps the unknowns along this axis to the residual index; the
        // factor of A A^T along the axis is D D^T.
        Axis a;
        a.len = static_cast<std::size_t>(D.rows());
        a.stride = stride;
        const Eigen::MatrixXd L = D * D.transpose();
        a.diagonal = L.diagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
        a.vectors = es.eigenvectors();
        a.values = es.eigenvalues();
        a.forward.resize(a.len * a.len);
        a.backward.resize(a.len * a.len);
        for (std::size_t s = 0; s < a.len; ++s)
            for (std::size_t r = 0; r < a.len; ++r) {
                const auto is = static_cast<Eigen::Index>(s), ir = static_cast<Eigen::Index>(r);
                a.forward[s * a.len + r] = a.vectors(is, ir);
                a.backward[s * a.len + r] = a.vectors(ir, is);
            }
        return a;
    }

    void build_factors() {
        const std::size_t nt = g_.nt, nx = g_.nx, ny = g_.ny, nch = graph_.n_channels();
        // Time: slab k touches nodes k (minus) and k+1 (plus); only nodes 1..nt-1 are unknown.
        Eigen::MatrixXd Dt = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nt > 1 ? nt - 1 : 0));
        for (std::size_t k = 0; k < nt; ++k) {
            if (k + 1 <= nt - 1) Dt(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) += 1.0 / g_.ht();
            if (k >= 1) Dt(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) -= 1.0 / g_.ht();
        }
        auto spatial = [](std::size_t n, double h) {
            // cell i: +1/h on face i+1, -1/h on face i; interior faces 1..n-1.
            Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n > 1 ? n - 1 : 0));
            for (std::size_t i = 0; i < n; ++i) {
                if (i + 1 <= n - 1) D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += 1.0 / h;
                if (i >= 1) D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) -= 1.0 / h;
            }
            return D;
        };
        Eigen::MatrixXd F = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nch), static_cast<Eigen::Index>(graph_.n_edges()));
        const auto inc = graph_.incidence();
        for (std::size_t c = 0; c < nch; ++c)
            for (std::size_t e = 0; e < graph_.n_edges(); ++e)
                F(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(e)) = inc[c * graph_.n_edges() + e];

        axes_ = {decompose(Dt, 1), decompose(spatial(nx, g_.hx()), nt), decompose(spatial(ny, g_.hy()), nt * nx),
                 decompose(F, nt * nx * ny)};

        const std::size_t N = nt * nx * ny * nch;
        inverse_eigen_.assign(N, 0.0);
        inverse_diagonal_.assign(N, 1.0);
        double largest = 0.0;
        for (const auto& a : axes_)
            if (a.len > 0) largest += std::max(0.0, a.values.maxCoeff());
        const double cutoff = 1e-12 * std::max(largest, 1.0);
        for (std::size_t c = 0; c < nch; ++c)
            for (std::size_t j = 0; j < ny; ++j)
                for (std::size_t i = 0; i < nx; ++i)
                    for (std::size_t k = 0; k < nt; ++k) {
                        const std::size_t n = ((c * ny + j) * nx + i) * nt + k;
                        const auto ix = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
                        const double lam = axes_[0].values(ix(k)) + axes_[1].values(ix(i)) + axes_[2].values(ix(j)) +
                                           axes_[3].values(ix(c));
                        inverse_eigen_[n] = lam > cutoff ? 1.0 / lam : 0.0;
                        const double diag = axes_[0].diagonal(ix(k)) + axes_[1].diagonal(ix(i)) +
                                            axes_[2].diagonal(ix(j)) + axes_[3].diagonal(ix(c));
                        inverse_diagonal_[n] = diag > 0.0 ? 1.0 / diag : 1.0;
                    }
    }

    /// Applies V^T (forward) or V along every axis.
    void transform(std::vector<double>& x, bool forward) const {
        std::vector<double>& tmp = scratch_;
        tmp.resize(x.size());
        for (const auto& a : axes_) {
            if (a.len <= 1) {
                // A 1x1 eigenvector is +-1.
                if (a.len == 1 && a.vectors(0, 0) < 0.0)
                    for (double& v : x) v = -v;
                continue;
            }
            // coef[s * len + r] multiplies input index s into output index r.
            const std::vector<double>& coef = forward ? a.forward : a.backward;
            const std::size_t len = a.len, stride = a.stride;
            const std::size_t block = len * stride;
            const std::size_t outer = x.size() / block;
            std::fill(tmp.begin(), tmp.end(), 0.0);
            for (std::size_t o = 0; o < outer; ++o) {
                const double* src = x.data() + o * block;
                double* dst = tmp.data() + o * block;
                if (stride == 1) {
                    for (std::size_t s = 0; s < len; ++s) {
                        const double v = src[s];
                        const double* row = coef.data() + s * len;
                        for (std::size_t r = 0; r < len; ++r) dst[r] += v * row[r];
                    }
                } else {
                    for (std::size_t s = 0; s < len; ++s) {
                        const double* in = src + s * stride;
                        for (std::size_t r = 0; r < len; ++r) {
                            const double c = coef[s * len + r];
                            double* out = dst + r * stride;
                            for (std::size_t t = 0; t < stride; ++t) out[t] += c * in[t];
                        }
                    }
                }
            }
            x.swap(tmp);
        }
    }

    GridSpec g_;
    ChannelGraph graph_;
    CellField rho0_;
    CellField rho1_;
    std::vector<Axis> axes_;
    std::vector<double> inverse_eigen_;
    std::vector<double> inverse_diagonal_;
    mutable std::vector<double> scratch_;
};

/// Residual of the continuity constraint with endpoints substituted.
inline ResidualReport residual(const StateFields& state, const ConstraintSystem& system) {
    return system.residual(state);
}

inline StateFields project(const StateFields& state_bar, const ConstraintSystem& system, double cg_tol = 1e-10,
                           int cg_maxiter = 500) {
    return system.project(state_bar, cg_tol, cg_maxiter);
}

} // namespace uomt
