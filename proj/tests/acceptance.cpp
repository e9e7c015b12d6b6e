// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance            run every criterion
//   acceptance 2 10       run a subset (criterion 6 then checks only what ran)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "uomt/oracles.hpp"
#include "uomt/pipeline.hpp"
#include "uomt/projection.hpp"
#include "uomt/solver.hpp"
#include "uomt/sweep.hpp"

using namespace uomt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Every solution produced along the way, for the conservation check.
std::vector<std::pair<std::string, Solution>> produced;

const Solution& keep(const std::string& label, Solution sol) {
    produced.emplace_back(label, std::move(sol));
    return produced.back().second;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double relative_gap(double a, double b) { return std::abs(a - b) / std::abs(b); }

fs::path work_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "uomt_acceptance" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

void write_pgm_bytes(const fs::path& p, std::size_t w, std::size_t h, const std::vector<unsigned char>& data,
                     const char* magic = "P5") {
    std::ofstream out(p, std::ios::binary);
    out << magic << '\n' << w << ' ' << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<double> single_plane(const CellField& f, std::size_t c) { return fixtures::plane(f, c); }

// ---------------------------------------------------------------------------
// Shared problems

GridSpec square(std::size_t n, std::size_t nt) { return GridSpec{n, n, nt}; }

CellField two_gaussians(const GridSpec& g) {
    return fixtures::add(fixtures::gaussian(g, 0.3, 0.35, 0.09), fixtures::gaussian(g, 0.7, 0.6, 0.07));
}

// Criterion 2 input: a translated Gaussian as a 32x1 8-bit image pair.
std::vector<unsigned char> line_image(double centre) {
    std::vector<unsigned char> v(32);
    for (std::size_t i = 0; i < 32; ++i) {
        const double x = (i + 0.5) / 32 - centre;
        v[i] = static_cast<unsigned char>(std::lround(250.0 * std::exp(-x * x / (2 * 0.06 * 0.06))));
    }
    return v;
}

RunConfig line_config(const fs::path& dir) {
    write_pgm_bytes(dir / "a.pgm", 32, 1, line_image(0.3));
    write_pgm_bytes(dir / "b.pgm", 32, 1, line_image(0.65));
    RunConfig c;
    c.source = dir / "a.pgm";
    c.target = dir / "b.pgm";
    c.gamma = 1e3;
    c.nt = 32;
    c.out = dir / "out";
    return c;
}

// ---------------------------------------------------------------------------

Outcome identity() {
    const auto t0 = std::chrono::steady_clock::now();
    ProblemTemplate t;
    t.grid = square(32, 16);
    t.rho0 = t.rho1 = two_gaussians(t.grid);
    t.base = ChannelGraph::isolated({"density"});
    const Solution& sol = keep("identity", solve(t.build()));
    const double secs = seconds_since(t0);
    const double mass = total_mass(t.rho0, 0);
    const double momenta = std::max({max_abs(sol.state.p.x), max_abs(sol.state.p.y), max_abs(sol.state.u.values)});
    const bool ok = sol.energy.total <= 1e-6 * mass && momenta <= 1e-4 && secs < 30.0;
    return {ok, "energy " + num(sol.energy.total) + " (bound " + num(1e-6 * mass) + "), momenta " + num(momenta) +
                    ", " + num(secs) + " s"};
}

Outcome balanced_lp() {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig cfg = line_config(work_dir("c2"));
    const RunInputs in = load_inputs(cfg);
    const ProblemTemplate t = make_template(cfg, in);
    const Solution& sol = keep("balanced 1-D", solve(t.build()));
    const double secs = seconds_since(t0);
    const double lp = oracles::lp_w2(in.source.field.values, in.target.field.values, t.grid).w2;
    const auto s = summarize(sol);
    const double frac = s.source_layer_max / s.total_mass;
    const bool ok = relative_gap(sol.energy.total, lp) <= 0.03 && frac <= 0.01 && secs < 120.0;
    return {ok, "energy " + num(sol.energy.total) + " vs LP " + num(lp) + " (" +
                    num(100 * relative_gap(sol.energy.total, lp)) + "%), source layer max " + num(100 * frac) +
                    "% of mass, " + num(secs) + " s"};
}

Outcome pure_reaction() {
    const auto t0 = std::chrono::steady_clock::now();
    ProblemTemplate t;
    t.grid = square(16, 16);
    t.rho0 = fixtures::gaussian(t.grid, 0.5, 0.45, 0.12);
    t.rho1 = t.rho0;
    for (auto& v : t.rho1.values) v *= 4.0;
    t.base = ChannelGraph::isolated({"density"});
    t.gamma = 1.0;
    t.eta = 1.0;
    const Solution& sol = keep("pure reaction", solve(t.build()));
    const double secs = seconds_since(t0);
    const double m0 = total_mass(t.rho0, 0);
    const auto oracle = oracles::reaction_energy(m0, 4 * m0, 1.0);
    const double err = relative_gap(sol.energy.total, oracle.closed_form);
    const bool ok = err <= 0.05 && secs < 60.0;
    return {ok, "energy " + num(sol.energy.total) + " vs " + num(oracle.closed_form) + " (path oracle " +
                    num(oracle.discrete) + ", " + num(100 * err) + "%), " + num(secs) + " s"};
}

Outcome epsilon_limit() {
    ProblemTemplate t;
    t.grid = square(16, 16);
    t.rho0 = fixtures::normalized(fixtures::gaussian(t.grid, 0.35, 0.4, 0.1), 4.0);
    t.rho1 = fixtures::normalized(fixtures::gaussian(t.grid, 0.62, 0.6, 0.1), 1.0);
    t.base = ChannelGraph::isolated({"density"});
    std::map<double, SolutionSummary> by_eps;
    std::string failed;
    const auto rows = sweep(t, ParameterGrid{{}, {}, {1e-2, 1e-3, 1e-4}, {}}, 1, [&](std::size_t i, const Solution& s) {
        keep("epsilon sweep #" + std::to_string(i), s);
    });
    for (const auto& r : rows) {
        if (!r.ok) failed += " eps=" + num(r.epsilon) + ": " + r.error;
        by_eps[r.epsilon] = r.summary;
    }
    if (!failed.empty()) return {false, "solve failed:" + failed};
    const double a = by_eps[1e-3].corrected_energy, b = by_eps[1e-4].corrected_energy;
    const double change = relative_gap(b, a);
    return {change <= 0.01, "corrected energy " + num(by_eps[1e-2].corrected_energy) + " / " + num(a) + " / " +
                                num(b) + " for eps 1e-2 / 1e-3 / 1e-4; change " + num(100 * change) + "%"};
}

Outcome gamma_monotone() {
    ProblemTemplate t;
    t.grid = square(16, 16);
    t.rho0 = fixtures::gaussian(t.grid, 0.3, 0.3, 0.08);
    t.rho1 = fixtures::gaussian(t.grid, 0.7, 0.7, 0.08);
    t.base = ChannelGraph::isolated({"density"});
    const std::vector<double> gammas{1e-4, 1e-2, 1.0, 1e2};
    const auto rows = sweep(t, ParameterGrid{gammas, {}, {}, {}}, 1, [&](std::size_t i, const Solution& s) {
        keep("gamma sweep #" + std::to_string(i), s);
    });
    std::vector<double> mid;
    std::string text;
    for (const auto& r : rows) {
        if (!r.ok) return {false, "gamma=" + num(r.gamma) + " failed: " + r.error};
        mid.push_back(r.summary.source_layer_mid);
        text += (text.empty() ? "" : ", ") + num(r.summary.source_layer_mid) + (r.summary.converged ? "" : "*");
    }
    bool monotone = true;
    for (std::size_t i = 1; i < mid.size(); ++i) monotone = monotone && mid[i] <= 1.02 * mid[i - 1];
    const double ratio = mid.back() > 0.0 ? mid.front() / mid.back() : INFINITY;
    return {monotone && ratio >= 10.0, "mid-time source-layer mass " + text + " for gamma 1e-4..1e2 (* = hit max_iters); "
                                       "ratio " + num(ratio)};
}

Outcome conservation() {
    if (produced.empty()) balanced_lp();
    double worst_res = 0.0, worst_mass = 0.0;
    std::string worst;
    for (const auto& [label, sol] : produced) {
        const ConstraintSystem sys(sol.grid, sol.graph, [&] {
            CellField f(1, sol.grid.cells(), sol.graph.n_channels());
            for (std::size_t c = 0; c < f.sites; ++c)
                for (std::size_t cell = 0; cell < f.cells; ++cell) f(c, cell, 0) = sol.state.rho(c, cell, 0);
            return f;
        }(), [&] {
            CellField f(1, sol.grid.cells(), sol.graph.n_channels());
            for (std::size_t c = 0; c < f.sites; ++c)
                for (std::size_t cell = 0; cell < f.cells; ++cell) f(c, cell, 0) = sol.state.rho(c, cell, sol.grid.nt);
            return f;
        }());
        const double res = sys.residual(sol.state).max_norm;
        const double m0 = total_mass(sol.state.rho, 0);
        double drift = 0.0;
        for (std::size_t k = 1; k <= sol.grid.nt; ++k)
            drift = std::max(drift, std::abs(total_mass(sol.state.rho, k) - m0) / m0);
        if (res > worst_res) worst = label;
        worst_res = std::max(worst_res, res);
        worst_mass = std::max(worst_mass, drift);
    }
    return {worst_res <= 1e-7 && worst_mass <= 1e-8, std::to_string(produced.size()) + " solutions; max residual " +
                                                         num(worst_res) + " (" + worst + "), max relative mass drift " +
                                                         num(worst_mass)};
}

Outcome vector_decoupling() {
    ProblemTemplate t;
    t.grid = GridSpec{32, 1, 32};
    const std::vector<std::pair<double, double>> shifts{{0.3, 0.6}, {0.7, 0.45}, {0.4, 0.55}};
    t.rho0 = CellField(1, 32, 3);
    t.rho1 = CellField(1, 32, 3);
    for (std::size_t c = 0; c < 3; ++c) {
        const auto a = fixtures::normalized(fixtures::gaussian(t.grid, shifts[c].first, 0.5, 0.06), 1.0 + c);
        const auto b = fixtures::normalized(fixtures::gaussian(t.grid, shifts[c].second, 0.5, 0.06), 1.0 + c);
        std::copy(a.values.begin(), a.values.end(), t.rho0.values.begin() + static_cast<long>(32 * c));
        std::copy(b.values.begin(), b.values.end(), t.rho1.values.begin() + static_cast<long>(32 * c));
    }
    t.base = ChannelGraph::complete({"R", "G", "B"});
    t.gamma = 1e6;
    t.eta = 1e6;
    const Solution& sol = keep("vector decoupling", solve(t.build()));
    bool ok = true;
    std::string text;
    for (std::size_t c = 0; c < 3; ++c) {
        const double lp = oracles::lp_w2(single_plane(t.rho0, c), single_plane(t.rho1, c), t.grid).w2;
        const double e = sol.energy.spatial_by_channel[c];
        ok = ok && relative_gap(e, lp) <= 0.03;
        text += (c ? "; " : "") + t.base.names()[c] + " " + num(e) + " vs " + num(lp) + " (" +
                num(100 * relative_gap(e, lp)) + "%)";
    }
    return {ok, text + "; edge energy " + num(summarize(sol).edge + summarize(sol).source)};
}

Outcome unit_correctness() {
    std::mt19937_64 rng(2024);
    const auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };

    double prox_err = 0.0;
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
        prox_err = std::max(prox_err, std::abs(fast.rho - slow.rho));
        for (std::size_t j = 0; j < n; ++j) prox_err = std::max(prox_err, std::abs(fast.momenta[j] - slow.momenta[j]));
    }

    // Adjoints of every operator, on a non-square grid with a source layer.
    const GridSpec g{5, 4, 6, 1.0, 0.8};
    const auto graph = augment_scalar(CellField(1, g.cells(), 1, 1.0), CellField(1, g.cells(), 1, 2.0),
                                      Placement::uniform(), 1e-3, 1.0)
                           .graph;
    const std::size_t ch = graph.n_channels(), ne = graph.n_edges();
    using oracles::LinearMap;
    double adj = 0.0;
    {
        const FaceField shape(g, ch);
        const LinearMap div = [&](const std::vector<double>& x) {
            FaceField p(g, ch);
            std::copy(x.begin(), x.begin() + static_cast<long>(p.x.size()), p.x.begin());
            std::copy(x.begin() + static_cast<long>(p.x.size()), x.end(), p.y.begin());
            return spatial_divergence(p, g).values;
        };
        const LinearMap div_t = [&](const std::vector<double>& y) {
            CellField q(g.slabs(), g.cells(), ch);
            q.values = y;
            const FaceField p = spatial_divergence_adjoint(q, g);
            std::vector<double> out(p.x);
            out.insert(out.end(), p.y.begin(), p.y.end());
            return out;
        };
        adj = std::max(adj, oracles::finite_check(shape.x.size() + shape.y.size(), g.slabs() * g.cells() * ch, div, div_t));
    }
    {
        const std::size_t nodes = g.nodes() * g.cells() * ch, slabs = g.slabs() * g.cells() * ch;
        const auto node_field = [&](const std::vector<double>& x) {
            CellField r(g.nodes(), g.cells(), ch);
            r.values = x;
            return r;
        };
        const auto slab_field = [&](const std::vector<double>& y) {
            CellField q(g.slabs(), g.cells(), ch);
            q.values = y;
            return q;
        };
        adj = std::max(adj, oracles::finite_check(
                                nodes, slabs, [&](const auto& x) { return time_difference(node_field(x), g).values; },
                                [&](const auto& y) { return time_difference_adjoint(slab_field(y), g).values; }));
        adj = std::max(adj, oracles::finite_check(
                                nodes, slabs, [&](const auto& x) { return time_average(node_field(x)).values; },
                                [&](const auto& y) { return time_average_adjoint(slab_field(y)).values; }));
        adj = std::max(adj, oracles::finite_check(
                                g.slabs() * g.cells() * ne, slabs,
                                [&](const auto& x) {
                                    EdgeFluxField u(g.slabs(), g.cells(), ne);
                                    u.values = x;
                                    return graph_divergence(u, graph).values;
                                },
                                [&](const auto& y) { return graph_divergence_adjoint(slab_field(y), graph).values; }));
    }
    {
        const CellField zero(1, g.cells(), ch);
        const ConstraintSystem sys(g, graph, zero, zero);
        const StateFields shape(g, ch, ne);
        const auto sizes = arrays(shape);
        std::size_t total = 0;
        for (const auto* a : sizes) total += a->size();
        const auto unpack = [&](const std::vector<double>& x) {
            StateFields s(g, ch, ne);
            std::size_t at = 0;
            for (auto* a : arrays(s)) {
                std::copy(x.begin() + static_cast<long>(at), x.begin() + static_cast<long>(at + a->size()), a->begin());
                at += a->size();
            }
            // Endpoint densities are fixed data, not unknowns of the constraint.
            for (std::size_t c = 0; c < ch; ++c)
                for (std::size_t cell = 0; cell < g.cells(); ++cell) s.rho(c, cell, 0) = s.rho(c, cell, g.nt) = 0.0;
            return s;
        };
        const auto pack = [](const StateFields& s) {
            std::vector<double> out;
            for (const auto* a : arrays(s)) out.insert(out.end(), a->begin(), a->end());
            return out;
        };
        adj = std::max(adj, oracles::finite_check(
                                total, g.slabs() * g.cells() * ch,
                                [&](const auto& x) { return sys.apply(unpack(x)).values; },
                                [&](const auto& y) {
                                    CellField q(g.slabs(), g.cells(), ch);
                                    q.values = y;
                                    auto s = sys.apply_adjoint(q);
                                    for (std::size_t c = 0; c < ch; ++c)
                                        for (std::size_t cell = 0; cell < g.cells(); ++cell)
                                            s.rho(c, cell, 0) = s.rho(c, cell, g.nt) = 0.0;
                                    return pack(s);
                                }));
    }

    // Projection idempotence on a random state of an unbalanced augmented problem.
    double idem = 0.0;
    {
        CellField a(1, g.cells(), 1), b(1, g.cells(), 1);
        for (auto& v : a.values) v = uniform(0.1, 1.0);
        for (auto& v : b.values) v = uniform(0.5, 2.0);
        const auto ap = augment_scalar(a, b, Placement::uniform(), 1e-3, 1.0);
        const ConstraintSystem sys(g, ap.graph, ap.rho0, ap.rho1);
        StateFields s(g, ap.graph.n_channels(), ap.graph.n_edges());
        for (auto* arr : arrays(s))
            for (auto& v : *arr) v = uniform(-1.0, 1.0);
        const auto once = project(s, sys), twice = project(once, sys);
        const auto x = arrays(once), y = arrays(twice);
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t i = 0; i < x[k]->size(); ++i) idem = std::max(idem, std::abs((*x[k])[i] - (*y[k])[i]));
    }
    const bool ok = prox_err <= 1e-6 && adj <= 1e-10 && idem <= 1e-8;
    return {ok, "prox error " + num(prox_err) + ", adjoint defect " + num(adj) + ", idempotence " + num(idem)};
}

Outcome colour_end_to_end() {
    const fs::path dir = work_dir("c9");
    std::vector<unsigned char> a(24 * 24 * 3), b(24 * 24 * 3);
    const auto bump = [](double x, double y, double cx, double cy, double s) {
        return std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2 * s * s));
    };
    for (std::size_t j = 0; j < 24; ++j)
        for (std::size_t i = 0; i < 24; ++i) {
            const double x = (i + 0.5) / 24, y = (j + 0.5) / 24;
            const std::size_t at = 3 * (j * 24 + i);
            a[at + 0] = static_cast<unsigned char>(std::lround(220 * bump(x, y, 0.3, 0.3, 0.1)));
            a[at + 1] = static_cast<unsigned char>(std::lround(120 * bump(x, y, 0.6, 0.4, 0.12)));
            a[at + 2] = static_cast<unsigned char>(std::lround(60 * bump(x, y, 0.5, 0.7, 0.1)));
            b[at + 0] = static_cast<unsigned char>(std::lround(150 * bump(x, y, 0.65, 0.6, 0.1)));
            b[at + 1] = static_cast<unsigned char>(std::lround(240 * bump(x, y, 0.45, 0.5, 0.12)));
            b[at + 2] = static_cast<unsigned char>(std::lround(200 * bump(x, y, 0.3, 0.65, 0.11)));
        }
    write_pgm_bytes(dir / "a.ppm", 24, 24, a, "P6");
    write_pgm_bytes(dir / "b.ppm", 24, 24, b, "P6");
    RunConfig cfg;
    cfg.source = dir / "a.ppm";
    cfg.target = dir / "b.ppm";
    cfg.out = dir / "out";
    cfg.nt = 8;

    const RunInputs in = load_inputs(cfg);
    const Solution& sol = keep("colour", solve(make_template(cfg, in).build()));
    write_run(sol, in, cfg, cfg.out);

    const double deficit = in.target.total() - in.source.total();
    const double integral = source_integral(sol);
    const double err = relative_gap(integral, deficit);

    std::size_t gray = 0, files = 0;
    for (const auto& e : fs::recursive_directory_iterator(cfg.out)) {
        const std::string rel = fs::relative(e.path(), cfg.out).generic_string();
        if (!e.is_regular_file() || (rel.rfind("source/", 0) != 0 && rel.rfind("source_layer/", 0) != 0)) continue;
        ++files;
        gray += slurp(e.path()).substr(0, 2) == "P5" ? 1 : 0;
    }
    const bool ok = sol.converged && files > 0 && gray == files && err <= 0.01;
    return {ok, std::string(sol.converged ? "converged" : "not converged") + " in " + std::to_string(sol.iterations) +
                    " iterations; " + std::to_string(gray) + "/" + std::to_string(files) +
                    " source frames grayscale; source integral " + num(integral) + " vs deficit " + num(deficit) +
                    " (" + num(100 * err) + "%)"};
}

Outcome determinism() {
    const fs::path dir = work_dir("c10");
    RunConfig cfg = line_config(dir);
    cfg.options.deterministic = true;
    std::ostringstream log;
    cfg.out = dir / "first";
    const int c1 = run(cfg, log);
    cfg.out = dir / "second";
    const int c2 = run(cfg, log);
    if (c1 == exit_input_error || c2 == exit_input_error) return {false, "run failed: " + log.str()};

    std::size_t compared = 0, differing = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir / "first")) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), dir / "first");
        if (rel == "summary.txt") continue; // carries wall-clock time
        ++compared;
        if (!fs::exists(dir / "second" / rel) || slurp(e.path()) != slurp(dir / "second" / rel)) ++differing;
    }
    const bool has_csv = fs::exists(dir / "first" / "metrics.csv");
    return {has_csv && compared > 1 && differing == 0,
            std::to_string(compared) + " files compared (frames and metrics.csv), " + std::to_string(differing) +
                " differ"};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"identity transport", identity},
        {"balanced W2 vs LP", balanced_lp},
        {"pure reaction vs closed form", pure_reaction},
        {"epsilon reformulation limit", epsilon_limit},
        {"gamma monotonicity", gamma_monotone},
        {"continuity and conservation", conservation},
        {"vector decoupling", vector_decoupling},
        {"prox, adjoints, projection", unit_correctness},
        {"colour unbalanced end to end", colour_end_to_end},
        {"determinism", determinism},
    };
    std::vector<bool> selected(criteria.size(), argc == 1);
    for (int i = 1; i < argc; ++i) {
        const int k = std::atoi(argv[i]);
        if (k < 1 || k > static_cast<int>(criteria.size())) {
            std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
            return 2;
        }
        selected[static_cast<std::size_t>(k - 1)] = true;
    }
    // Conservation inspects the solutions of the other criteria, so it runs after them.
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < criteria.size(); ++i)
        if (i != 5) order.push_back(i);
    order.push_back(5);

    std::map<std::size_t, std::string> lines;
    bool all = true;
    for (std::size_t i : order) {
        if (!selected[i]) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        all = all && o.pass;
        lines[i] = "criterion " + std::to_string(i + 1) + " [" + criteria[i].first + "]: " + (o.pass ? "PASS" : "FAIL") +
                   " - " + o.detail;
        std::fprintf(stderr, "%s\n", lines[i].c_str());
    }
    std::printf("\n");
    for (const auto& [i, line] : lines) std::printf("%s\n", line.c_str());
    return all ? 0 : 1;
}
