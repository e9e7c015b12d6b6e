#pragma once

// Brute-force references for validating the solver at tiny scale. Nothing
// here is fast; everything here is simple enough to check by hand.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "uomt/error.hpp"
#include "uomt/grid.hpp"

namespace uomt::oracles {

/// Transport plan between two cell-mass vectors, row-major (source cell, target cell).
struct DiscreteCoupling {
    std::size_t rows = 0, cols = 0;
    std::vector<double> plan;
    double cost = 0.0;

    double operator()(std::size_t i, std::size_t j) const { return plan[i * cols + j]; }
    std::vector<double> row_sums() const {
        std::vector<double> r(rows, 0.0);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) r[i] += plan[i * cols + j];
        return r;
    }
    std::vector<double> col_sums() const {
        std::vector<double> c(cols, 0.0);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) c[j] += plan[i * cols + j];
        return c;
    }
};

struct W2Result {
    double w2 = 0.0; // squared distance
    DiscreteCoupling coupling;
};

inline constexpr std::size_t lp_max_cells = 64;

/// Exact Kantorovich problem with squared Euclidean cost between cell
/// centres, solved as a min-cost flow by successive shortest paths
/// (Bellman-Ford on the residual graph).
inline W2Result lp_w2(std::span<const double> mu, std::span<const double> nu, const GridSpec& g) {
    g.validate();
    const std::size_t n = g.cells();
    if (mu.size() != n || nu.size() != n) throw DimensionError("lp_w2: marginals must have one entry per cell");
    if (n > lp_max_cells) throw InputError("lp_w2: instance has " + std::to_string(n) + " cells, limit is 64");
    double tm = 0.0, tn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(mu[i] >= 0.0) || !(nu[i] >= 0.0)) throw InputError("lp_w2: marginals must be nonnegative");
        tm += mu[i];
        tn += nu[i];
    }
    if (std::abs(tm - tn) > 1e-10 * std::max({1.0, tm, tn})) throw InfeasibleError("lp_w2: marginals have different totals");

    std::vector<double> cost(n * n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            const double dx = g.cell_x(a % g.nx) - g.cell_x(b % g.nx);
            const double dy = g.cell_y(a / g.nx) - g.cell_y(b / g.nx);
            cost[a * n + b] = dx * dx + dy * dy;
        }

    const double tiny = 1e-15 * std::max(1.0, tm);
    std::vector<double> supply(mu.begin(), mu.end()), demand(nu.begin(), nu.end());
    std::vector<double> flow(n * n, 0.0);

    // Nodes 0..n-1 are supplies, n..2n-1 demands. Forward arcs i -> n+j have
    // unbounded capacity; backward arcs n+j -> i exist while flow(i,j) > 0.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(2 * n);
    std::vector<long> pred(2 * n);
    for (std::size_t round = 0; round < 100 * n * n; ++round) {
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(pred.begin(), pred.end(), -1);
        bool any = false;
        for (std::size_t i = 0; i < n; ++i)
            if (supply[i] > tiny) {
                dist[i] = 0.0;
                any = true;
            }
        if (!any) break;
        for (std::size_t pass = 0; pass < 2 * n; ++pass) {
            bool changed = false;
            for (std::size_t i = 0; i < n; ++i) {
                if (dist[i] == inf) continue;
                for (std::size_t j = 0; j < n; ++j) {
                    const double d = dist[i] + cost[i * n + j];
                    if (d < dist[n + j] - 1e-14) {
                        dist[n + j] = d;
                        pred[n + j] = static_cast<long>(i);
                        changed = true;
                    }
                }
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (dist[n + j] == inf) continue;
                for (std::size_t i = 0; i < n; ++i) {
                    if (flow[i * n + j] <= tiny) continue;
                    const double d = dist[n + j] - cost[i * n + j];
                    if (d < dist[i] - 1e-14) {
                        dist[i] = d;
                        pred[i] = static_cast<long>(n + j);
                        changed = true;
                    }
                }
            }
            if (!changed) break;
        }
        std::size_t best = 2 * n;
        for (std::size_t j = 0; j < n; ++j)
            if (demand[j] > tiny && dist[n + j] < inf && (best == 2 * n || dist[n + j] < dist[best])) best = n + j;
        if (best == 2 * n) break;

        double amount = demand[best - n];
        std::size_t v = best;
        while (pred[v] >= 0) {
            const std::size_t u = static_cast<std::size_t>(pred[v]);
            if (u >= n) amount = std::min(amount, flow[v * n + (u - n)]);
            v = u;
        }
        amount = std::min(amount, supply[v]);

        demand[best - n] -= amount;
        supply[v] -= amount;
        v = best;
        while (pred[v] >= 0) {
            const std::size_t u = static_cast<std::size_t>(pred[v]);
            if (u < n)
                flow[u * n + (v - n)] += amount;
            else
                flow[v * n + (u - n)] -= amount;
            v = u;
        }
    }

    W2Result out;
    out.coupling.rows = out.coupling.cols = n;
    out.coupling.plan = std::move(flow);
    for (auto& f : out.coupling.plan) f = std::max(f, 0.0);
    for (std::size_t k = 0; k < n * n; ++k) out.coupling.cost += cost[k] * out.coupling.plan[k];
    out.w2 = out.coupling.cost;
    return out;
}

// ---------------------------------------------------------------------------

struct ReactionEnergy {
    double closed_form = 0.0;
    double discrete = 0.0; // minimum over piecewise-linear paths
    std::size_t points = 0;
};

namespace detail {

// sum_k gamma (r_{k+1} - r_k)^2 / (dt * (r_k + r_{k+1})/2)
inline double reaction_action(const std::vector<double>& r, double gamma, double dt) {
    double e = 0.0;
    for (std::size_t k = 0; k + 1 < r.size(); ++k) {
        const double d = r[k + 1] - r[k], s = r[k] + r[k + 1];
        if (s > 0.0) e += 2.0 * gamma * d * d / (dt * s);
    }
    return e;
}

} // namespace detail

/// Pure-reaction (Fisher-Rao) cost of turning mass m0 into m1 with weight
/// gamma, as closed form and as a fine-grid minimisation.
inline ReactionEnergy reaction_energy(double m0, double m1, double gamma, std::size_t points = 4000) {
    if (!(m0 >= 0.0) || !(m1 >= 0.0)) throw InputError("reaction_energy: masses must be nonnegative");
    if (m0 == 0.0 && m1 == 0.0) throw InputError("reaction_energy: both masses are zero");
    if (!(gamma > 0.0)) throw InputError("reaction_energy: gamma must be positive");
    if (points < 1000) throw InputError("reaction_energy: at least 1000 time points");

    ReactionEnergy out;
    out.points = points;
    const double dq = std::sqrt(m1) - std::sqrt(m0);
    out.closed_form = 4.0 * gamma * dq * dq;
    if (m0 == m1) return out;

    // Newton on the interior values. Each segment term is c (b-a)^2/(a+b)
    // whose Hessian is (8c/s^3) [b^2, -ab; -ab, a^2], so the total Hessian is
    // tridiagonal.
    const std::size_t N = points - 1;
    const double dt = 1.0 / static_cast<double>(N), c = 2.0 * gamma / dt, floor = 1e-12;
    std::vector<double> r(points);
    for (std::size_t k = 0; k <= N; ++k) r[k] = std::max(floor, m0 + (m1 - m0) * static_cast<double>(k) * dt);
    r[0] = m0;
    r[N] = m1;

    const std::size_t m = N - 1;
    std::vector<double> grad(m), diag(m), off(m), step(m), trial(points);
    double e = detail::reaction_action(r, gamma, dt);
    for (int it = 0; it < 200; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        std::fill(diag.begin(), diag.end(), 1e-300);
        std::fill(off.begin(), off.end(), 0.0);
        for (std::size_t k = 0; k < N; ++k) {
            const double a = r[k], b = r[k + 1], s = a + b;
            if (s <= 0.0) continue;
            const double d = b - a, h = 8.0 * c / (s * s * s);
            if (k >= 1) {
                grad[k - 1] += -c * d * (a + 3.0 * b) / (s * s);
                diag[k - 1] += h * b * b;
            }
            if (k + 1 <= m) {
                grad[k] += c * d * (3.0 * a + b) / (s * s);
                diag[k] += h * a * a;
                if (k >= 1) off[k - 1] += -h * a * b;
            }
        }
        double gnorm = 0.0;
        for (double v : grad) gnorm = std::max(gnorm, std::abs(v));
        if (gnorm * std::max(m0, m1) <= 1e-13 * std::max(e, 1e-300)) break;

        // Thomas algorithm; off[k] couples k and k+1.
        std::vector<double> cp(m), dp(m);
        for (std::size_t k = 0; k < m; ++k) {
            double den = diag[k] * (1.0 + 1e-12) - (k ? off[k - 1] * cp[k - 1] : 0.0);
            cp[k] = off[k] / den;
            dp[k] = (-grad[k] - (k ? off[k - 1] * dp[k - 1] : 0.0)) / den;
        }
        for (std::size_t k = m; k-- > 0;) step[k] = dp[k] - (k + 1 < m ? cp[k] * step[k + 1] : 0.0);

        double t = 1.0;
        bool accepted = false;
        double slope = 0.0;
        for (std::size_t k = 0; k < m; ++k) slope += grad[k] * step[k];
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            trial = r;
            bool ok = true;
            for (std::size_t k = 0; k < m; ++k) {
                trial[k + 1] = r[k + 1] + t * step[k];
                if (trial[k + 1] < floor) ok = false;
            }
            if (!ok) continue;
            const double et = detail::reaction_action(trial, gamma, dt);
            if (et <= e + 1e-4 * t * slope) {
                r.swap(trial);
                accepted = e - et > 1e-16 * e;
                e = et;
                break;
            }
        }
        if (!accepted) break;
    }
    out.discrete = e;
    return out;
}

// ---------------------------------------------------------------------------

struct ProxPoint {
    double rho = 0.0;
    std::vector<double> momenta;
    double objective = 0.0;
};

namespace detail {

// Prox objective with the momenta eliminated in closed form.
inline double reduced_prox_objective(double rho, double rho_bar, std::span<const double> m,
                                     std::span<const double> w, double lambda) {
    double f = (rho - rho_bar) * (rho - rho_bar) / (2.0 * lambda);
    for (std::size_t j = 0; j < m.size(); ++j) f += w[j] * m[j] * m[j] / (rho + 2.0 * lambda * w[j]);
    return f;
}

} // namespace detail

/// Grid search over rho at 1e-4 spacing, then golden-section refinement in
/// the best grid interval. Momenta follow from rho in closed form.
inline ProxPoint prox_bruteforce(double rho_bar, std::span<const double> momenta, std::span<const double> weights,
                                 double lambda) {
    if (momenta.size() != weights.size()) throw DimensionError("prox_bruteforce: one weight per momentum");
    if (momenta.size() > 3) throw InputError("prox_bruteforce: at most 3 momentum components");
    double s = 0.0;
    for (std::size_t j = 0; j < momenta.size(); ++j) s += weights[j] * momenta[j] * momenta[j];
    const double top = std::max(rho_bar, 0.0) + 10.0 * lambda * s + 10.0;
    const double h = 1e-4;
    const auto f = [&](double r) { return detail::reduced_prox_objective(r, rho_bar, momenta, weights, lambda); };

    const auto steps = static_cast<std::size_t>(std::ceil(top / h));
    std::size_t best = 0;
    double fbest = f(0.0);
    for (std::size_t k = 1; k <= steps; ++k) {
        const double v = f(static_cast<double>(k) * h);
        if (v < fbest) {
            fbest = v;
            best = k;
        }
    }
    double a = best == 0 ? 0.0 : (static_cast<double>(best) - 1.0) * h;
    double b = (static_cast<double>(best) + 1.0) * h;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + b); ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    ProxPoint out;
    out.rho = 0.5 * (a + b);
    if (best == 0 && f(0.0) <= f(out.rho)) out.rho = 0.0;
    out.objective = f(out.rho);
    for (std::size_t j = 0; j < momenta.size(); ++j)
        out.momenta.push_back(out.rho * momenta[j] / (out.rho + 2.0 * lambda * weights[j]));
    return out;
}

// ---------------------------------------------------------------------------

using LinearMap = std::function<std::vector<double>(const std::vector<double>&)>;

/// Largest normalised defect |<Ax,y> - <x,A^T y>| / (|x||y|) over random pairs.
inline double finite_check(std::size_t n_in, std::size_t n_out, const LinearMap& apply, const LinearMap& adjoint,
                           std::size_t pairs = 100, unsigned seed = 12345) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    std::vector<double> x(n_in), y(n_out);
    for (std::size_t p = 0; p < pairs; ++p) {
        for (auto& v : x) v = normal(rng);
        for (auto& v : y) v = normal(rng);
        const auto ax = apply(x);
        const auto aty = adjoint(y);
        if (ax.size() != n_out || aty.size() != n_in) throw DimensionError("finite_check: operator returned the wrong size");
        double lhs = 0.0, rhs = 0.0, nx = 0.0, ny = 0.0;
        for (std::size_t i = 0; i < n_out; ++i) {
            lhs += ax[i] * y[i];
            ny += y[i] * y[i];
        }
        for (std::size_t i = 0; i < n_in; ++i) {
            rhs += x[i] * aty[i];
            nx += x[i] * x[i];
        }
        const double scale = std::sqrt(nx * ny);
        if (scale > 0.0) worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
    return worst;
}

} // namespace uomt::oracles
