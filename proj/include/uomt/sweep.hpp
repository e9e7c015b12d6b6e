#pragma once

// Parameter sweeps over gamma, eta, epsilon and nt.

#include <cstddef>
#include <exception>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "uomt/graph.hpp"
#include "uomt/parallel.hpp"
#include "uomt/solver.hpp"

namespace uomt {

/// Everything needed to instantiate a Problem except the swept parameters.
struct ProblemTemplate {
    GridSpec grid;    // nt is the default when the grid does not sweep it
    CellField rho0;   // original channels, one time slice
    CellField rho1;
    ChannelGraph base; // over the original channels
    bool augment = true;
    Placement placement;
    double gamma = 1.0;
    std::optional<double> eta; // source-layer edges; follows gamma when unset
    double epsilon = 1e-3;
    EdgeDensityModes modes;
    SolverOptions options;

    double eta_value() const { return eta.value_or(gamma); }

    Problem build() const {
        Problem p;
        p.grid = grid;
        p.modes = modes;
        p.options = options;
        if (augment) {
            auto ap = augment_vector(rho0, rho1, base, placement, epsilon, gamma, eta_value());
            p.graph = std::move(ap.graph);
            p.rho0 = std::move(ap.rho0);
            p.rho1 = std::move(ap.rho1);
            p.augmentation = ap.report;
        } else {
            p.graph = base;
            std::vector<double> w2(base.n_edges(), gamma);
            if (!w2.empty()) p.graph.set_edge_weights(w2);
            p.rho0 = rho0;
            p.rho1 = rho1;
        }
        p.validate();
        return p;
    }
};

/// Empty lists keep the template's value.
struct ParameterGrid {
    std::vector<double> gamma;
    std::vector<double> eta;
    std::vector<double> epsilon;
    std::vector<std::size_t> nt;
};

/// Scalar summary of one solve.
struct SolutionSummary {
    double energy = 0.0;
    double spatial = 0.0;
    double edge = 0.0;
    double source = 0.0;
    double source_layer_spatial = 0.0; // already weighted by epsilon
    double corrected_energy = 0.0;     // energy minus the source-layer spatial term
    double source_layer_max = 0.0;     // max over time nodes of the source-layer mass
    double source_layer_mid = 0.0;     // source-layer mass at t = 1/2
    double source_integral = 0.0;
    double total_mass = 0.0; // extended total at t = 0
    int iterations = 0;
    bool converged = false;
    double residual = 0.0;
    double wall_time = 0.0;
};

inline SolutionSummary summarize(const Solution& sol) {
    SolutionSummary s;
    s.energy = sol.energy.total;
    s.spatial = sol.energy.spatial_total();
    s.edge = sol.energy.edge_total(sol.graph, EdgeKind::original);
    s.source = sol.energy.edge_total(sol.graph, EdgeKind::augmentation);
    if (const auto sl = sol.graph.source_layer()) s.source_layer_spatial = sol.energy.spatial_by_channel[*sl];
    s.corrected_energy = s.energy - s.source_layer_spatial;
    const auto masses = source_layer_mass(sol);
    for (double m : masses) s.source_layer_max = std::max(s.source_layer_max, m);
    s.source_layer_mid = source_layer_mid_mass(sol);
    s.source_integral = source_integral(sol);
    s.total_mass = total_mass(sol.state.rho, 0);
    s.iterations = sol.iterations;
    s.converged = sol.converged;
    s.residual = sol.residual;
    s.wall_time = sol.wall_time;
    return s;
}

struct SweepRow {
    double gamma = 0.0;
    double eta = 0.0;
    double epsilon = 0.0;
    std::size_t nt = 0;
    bool ok = false;
    std::string error;
    SolutionSummary summary;
};

/// Points in order gamma (outermost), eta, epsilon, nt (innermost). Without an
/// eta list, eta is the template's, or each point's gamma if the template has none.
inline std::vector<SweepRow> sweep_points(const ProblemTemplate& tmpl, const ParameterGrid& grid) {
    const auto or_default = [](const auto& v, auto d) { return v.empty() ? std::vector<decltype(d)>{d} : v; };
    std::vector<SweepRow> rows;
    for (double g : or_default(grid.gamma, tmpl.gamma))
        for (double e : or_default(grid.eta, tmpl.eta.value_or(g)))
            for (double eps : or_default(grid.epsilon, tmpl.epsilon))
                for (std::size_t nt : or_default(grid.nt, tmpl.grid.nt)) {
                    SweepRow r;
                    r.gamma = g;
                    r.eta = e;
                    r.epsilon = eps;
                    r.nt = nt;
                    rows.push_back(r);
                }
    return rows;
}

inline ProblemTemplate instantiate(const ProblemTemplate& tmpl, const SweepRow& row) {
    ProblemTemplate t = tmpl;
    t.gamma = row.gamma;
    t.eta = row.eta;
    t.epsilon = row.epsilon;
    t.grid.nt = row.nt;
    return t;
}

/// One summary row per grid point; failures are recorded in the row and the
/// sweep continues. Independent solves run on up to `concurrent` threads,
/// each writing only its own row. If on_solution is given it is called with
/// every successful solution (from the worker thread that produced it).
template <class OnSolution = std::nullptr_t>
std::vector<SweepRow> sweep(const ProblemTemplate& tmpl, const ParameterGrid& grid, unsigned concurrent = 1,
                            OnSolution&& on_solution = nullptr) {
    auto rows = sweep_points(tmpl, grid);
    parallel_for(rows.size(), concurrent, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            SweepRow& row = rows[i];
            try {
                const Problem p = instantiate(tmpl, row).build();
                const Solution sol = solve(p);
                row.summary = summarize(sol);
                row.ok = true;
                if constexpr (!std::is_same_v<std::decay_t<OnSolution>, std::nullptr_t>) on_solution(i, sol);
            } catch (const std::exception& e) {
                row.ok = false;
                row.error = e.what();
            }
        }
    });
    return rows;
}

} // namespace uomt
