#pragma once

// read -> augment -> solve -> write, for the command-line tool.
//
// Output layout under the run directory:
//   density/<channel>/frame_000.pgm ... frame_<nt>.pgm   original channels
//   density/composite/frame_XXX.ppm                      colour composite (vector mode)
//   source_layer/frame_XXX.pgm                           source-layer density, always grayscale
//   source/<channel>/frame_XXX.pgm                       recovered source per slab (nt frames);
//                                                        128 is zero, brighter is creation
//   metrics.csv                                          one row per iteration
//   summary.txt                                          key=value results

#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "uomt/config.hpp"
#include "uomt/netpbm.hpp"
#include "uomt/parallel.hpp"
#include "uomt/solver.hpp"
#include "uomt/sweep.hpp"

namespace uomt {

inline constexpr int exit_converged = 0;
inline constexpr int exit_input_error = 1;
inline constexpr int exit_not_converged = 2;

inline const char* metrics_columns_help() {
    return "metrics.csv columns:\n"
           "  iteration        splitting iteration (1-based)\n"
           "  total_energy     energy of the prox iterate\n"
           "  spatial_energy   weighted transport part, source layer included\n"
           "  edge_energy      flux on original inter-channel edges\n"
           "  source_energy    flux on source-layer edges\n"
           "  residual         max-norm of the continuity residual of the projected iterate\n"
           "  gap              max difference between the two halves of the splitting\n"
           "  source_layer_mass  final row only: ';'-separated source-layer mass at every time node\n";
}

/// Shortest round-trip decimal form; identical bits give identical text.
inline std::string format_number(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

struct RunInputs {
    netpbm::DensityImage source;
    netpbm::DensityImage target;
    std::optional<netpbm::DensityImage> mask;
    std::vector<std::string> channel_names;
    bool vector_mode = false;
};

inline RunInputs load_inputs(const RunConfig& cfg) {
    cfg.validate();
    RunInputs in;
    in.source = netpbm::read_density_image(cfg.source);
    in.target = netpbm::read_density_image(cfg.target);
    if (in.source.width != in.target.width || in.source.height != in.target.height)
        throw InputError("read: source is " + std::to_string(in.source.width) + "x" + std::to_string(in.source.height) +
                         " but target is " + std::to_string(in.target.width) + "x" +
                         std::to_string(in.target.height) + "; images must have equal dimensions");
    if (in.source.channels() != in.target.channels())
        throw InputError("read: source and target must both be grayscale or both colour");
    if (cfg.mask) {
        in.mask = netpbm::read_density_image(*cfg.mask);
        if (in.mask->width != in.source.width || in.mask->height != in.source.height || in.mask->channels() != 1)
            throw InputError("read: mask must be a grayscale image of the same size as the inputs");
    }
    if (in.source.total() == 0.0)
        throw InputError("read: source image has zero total mass; a zero-total image is accepted only as the target, "
                         "where the source layer absorbs the whole difference");

    const std::size_t planes = in.source.channels();
    in.vector_mode = cfg.mode == RunMode::vector || (cfg.mode == RunMode::automatic && planes > 1);
    if (!in.vector_mode && planes != 1)
        throw InputError("read: mode = scalar needs grayscale images, got " + std::to_string(planes) + " planes");
    if (in.vector_mode) {
        in.channel_names = cfg.channels;
        if (in.channel_names.empty())
            in.channel_names = planes == 3 ? std::vector<std::string>{"R", "G", "B"} : std::vector<std::string>{"gray"};
        if (in.channel_names.size() != planes)
            throw InputError("read: " + std::to_string(in.channel_names.size()) + " channel names for " +
                             std::to_string(planes) + " image planes");
    } else {
        in.channel_names = {"density"};
    }
    return in;
}

inline ChannelGraph make_base_graph(const RunConfig& cfg, const std::vector<std::string>& names) {
    if (cfg.graph.empty()) return ChannelGraph::complete(names);
    std::vector<Edge> edges;
    const auto lookup = [&](const std::string& n) {
        const auto it = std::find(names.begin(), names.end(), n);
        if (it == names.end()) throw InputError("config: graph names unknown channel '" + n + "'");
        return static_cast<std::size_t>(it - names.begin());
    };
    for (const auto& [a, b] : cfg.graph) edges.push_back({lookup(a), lookup(b)});
    return ChannelGraph(names, std::move(edges));
}

inline ProblemTemplate make_template(const RunConfig& cfg, const RunInputs& in) {
    ProblemTemplate t;
    const double longest = static_cast<double>(std::max(in.source.width, in.source.height));
    t.grid = GridSpec{in.source.width, in.source.height, cfg.nt, static_cast<double>(in.source.width) / longest,
                      static_cast<double>(in.source.height) / longest};
    t.rho0 = in.source.field;
    t.rho1 = in.target.field;
    t.base = make_base_graph(cfg, in.channel_names);
    t.placement = in.mask ? Placement::masked(in.mask->field.values) : Placement::uniform();
    t.gamma = cfg.gamma;
    t.eta = cfg.eta;
    t.epsilon = cfg.epsilon;
    t.modes = cfg.modes;
    t.options = cfg.options;
    t.options.threads = threads_from_environment();
    return t;
}

// ---------------------------------------------------------------------------

inline std::string metrics_csv(const Solution& sol) {
    std::ostringstream out;
    out << "iteration,total_energy,spatial_energy,edge_energy,source_energy,residual,gap,source_layer_mass\n";
    const auto masses = source_layer_mass(sol);
    for (std::size_t i = 0; i < sol.history.size(); ++i) {
        const auto& r = sol.history[i];
        out << r.iteration << ',' << format_number(r.energy) << ',' << format_number(r.spatial) << ','
            << format_number(r.edge) << ',' << format_number(r.source) << ',' << format_number(r.residual) << ','
            << format_number(r.gap) << ',';
        if (i + 1 == sol.history.size())
            for (std::size_t k = 0; k < masses.size(); ++k) out << (k ? ";" : "") << format_number(masses[k]);
        out << '\n';
    }
    return out.str();
}

struct FrameScales {
    double density = 0.0;
    double source_layer = 0.0;
    double source = 0.0;
};

inline std::string frame_name(std::size_t k, const char* ext) {
    std::ostringstream s;
    s << "frame_" << std::setw(3) << std::setfill('0') << k << ext;
    return s.str();
}

/// Writes all frames; returns the fixed scales used (zero under per_frame).
inline FrameScales write_frames(const Solution& sol, const RunInputs& in, netpbm::Normalization norm,
                                const std::filesystem::path& dir) {
    using netpbm::Normalization;
    const GridSpec& g = sol.grid;
    const std::size_t w = in.source.width, h = in.source.height;
    const std::size_t n = sol.graph.n_original_channels();
    const auto frames = interpolation_frames(sol);
    const bool fixed = norm == Normalization::fixed_scale;

    FrameScales scales;
    if (fixed) {
        scales.density = netpbm::max_over(frames, 0, n);
        if (sol.graph.is_augmented()) scales.source_layer = netpbm::max_over(frames, *sol.graph.source_layer(), 1);
        if (sol.source)
            for (double v : sol.source->values) scales.source = std::max(scales.source, std::abs(v));
    }

    for (std::size_t k = 0; k < frames.size(); ++k) {
        const auto& f = frames[k];
        const double dscale = fixed ? scales.density : netpbm::max_over({f}, 0, n);
        for (std::size_t c = 0; c < n; ++c)
            netpbm::write_frame(f, c, w, h, dir / "density" / in.channel_names[c] / frame_name(k, ".pgm"), dscale);
        if (in.vector_mode) {
            std::vector<std::span<const double>> planes;
            for (std::size_t c = 0; c < std::min<std::size_t>(n, 3); ++c)
                planes.push_back(std::span<const double>(f.values).subspan(c * f.cells, f.cells));
            netpbm::write_ppm(dir / "density" / "composite" / frame_name(k, ".ppm"), planes, w, h, dscale);
        }
        if (sol.graph.is_augmented()) {
            const std::size_t sl = *sol.graph.source_layer();
            const double sscale = fixed ? scales.source_layer : netpbm::max_over({f}, sl, 1);
            netpbm::write_frame(f, sl, w, h, dir / "source_layer" / frame_name(k, ".pgm"), sscale);
        }
    }

    if (sol.source) {
        const CellField& s = *sol.source;
        std::vector<double> plane(g.cells());
        for (std::size_t k = 0; k < g.nt; ++k) {
            double scale = scales.source;
            if (!fixed) {
                scale = 0.0;
                for (std::size_t c = 0; c < n; ++c)
                    for (std::size_t cell = 0; cell < g.cells(); ++cell) scale = std::max(scale, std::abs(s(c, cell, k)));
            }
            for (std::size_t c = 0; c < n; ++c) {
                // Signed values map to [0, 1] with zero at one half.
                for (std::size_t cell = 0; cell < g.cells(); ++cell)
                    plane[cell] = scale > 0.0 ? 0.5 + 0.5 * s(c, cell, k) / scale : 0.5;
                netpbm::write_pgm(dir / "source" / in.channel_names[c] / frame_name(k, ".pgm"), plane, w, h, 1.0);
            }
        }
    }
    return scales;
}

inline std::string summary_text(const Solution& sol, const RunInputs& in, const RunConfig& cfg,
                                 const FrameScales& scales) {
    const auto s = summarize(sol);
    std::ostringstream out;
    const auto kv = [&](const char* k, const std::string& v) { out << k << '=' << v << '\n'; };
    const auto num = [&](const char* k, double v) { kv(k, format_number(v)); };
    kv("mode", in.vector_mode ? "vector" : "scalar");
    kv("width", std::to_string(in.source.width));
    kv("height", std::to_string(in.source.height));
    kv("nt", std::to_string(sol.grid.nt));
    kv("channels", std::to_string(sol.graph.n_original_channels()));
    num("gamma", cfg.gamma);
    num("eta", cfg.eta_value());
    num("epsilon", cfg.epsilon);
    num("total_energy", s.energy);
    num("spatial_energy", s.spatial);
    num("edge_energy", s.edge);
    num("source_energy", s.source);
    num("source_layer_spatial_energy", s.source_layer_spatial);
    num("corrected_energy", s.corrected_energy);
    num("source_mass", in.source.total());
    num("target_mass", in.target.total());
    num("mass_deficit", sol.augmentation ? sol.augmentation->mass_deficit : 0.0);
    num("source_integral", s.source_integral);
    num("extended_total_mass", s.total_mass);
    num("source_layer_max_mass", s.source_layer_max);
    num("source_layer_mid_mass", s.source_layer_mid);
    num("source_layer_max_fraction", s.total_mass > 0.0 ? s.source_layer_max / s.total_mass : 0.0);
    kv("iterations", std::to_string(s.iterations));
    kv("converged", s.converged ? "true" : "false");
    num("residual", s.residual);
    num("gap", sol.gap);
    kv("normalization", netpbm::to_string(cfg.normalization));
    num("density_scale", scales.density);
    num("source_layer_scale", scales.source_layer);
    num("source_scale", scales.source);
    num("wall_time", s.wall_time);
    return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out;
    netpbm::open_for_writing(out, path);
    out << text;
    if (!out) throw Error("write: failed writing " + path.string());
}

inline void write_run(const Solution& sol, const RunInputs& in, const RunConfig& cfg, const std::filesystem::path& dir) {
    const auto scales = write_frames(sol, in, cfg.normalization, dir);
    write_text(dir / "metrics.csv", metrics_csv(sol));
    write_text(dir / "summary.txt", summary_text(sol, in, cfg, scales));
}

namespace pipeline_detail {

// Prefixes the stage name unless the message already carries one.
inline std::string staged(const char* stage, const std::exception& e) {
    const std::string what = e.what();
    for (const char* s : {"read:", "config:", "netpbm:", "augment:", "write:", "solve:", "problem:"})
        if (what.rfind(s, 0) == 0) return what;
    return std::string(stage) + ": " + what;
}

} // namespace pipeline_detail

/// Full run. Exit codes: 0 converged, 2 stopped at max_iters, 1 on error.
inline int run(const RunConfig& cfg, std::ostream& log) {
    const char* stage = "config";
    try {
        stage = "read";
        const RunInputs in = load_inputs(cfg);
        stage = "augment";
        const Problem problem = make_template(cfg, in).build();
        stage = "solve";
        const Solution sol = solve(problem);
        stage = "write";
        write_run(sol, in, cfg, cfg.out);
        log << "energy " << format_number(sol.energy.total) << " after " << sol.iterations << " iterations"
            << (sol.converged ? "" : " (not converged)") << "; output in " << cfg.out.string() << '\n';
        return sol.converged ? exit_converged : exit_not_converged;
    } catch (const std::exception& e) {
        log << "error: " << pipeline_detail::staged(stage, e) << '\n';
        return exit_input_error;
    }
}

inline std::string quote_csv(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "gamma,eta,epsilon,nt,ok,total_energy,corrected_energy,spatial_energy,edge_energy,source_energy,"
           "source_layer_spatial_energy,source_layer_max_mass,source_layer_mid_mass,source_integral,iterations,"
           "converged,residual,error\n";
    for (const auto& r : rows) {
        const auto& s = r.summary;
        out << format_number(r.gamma) << ',' << format_number(r.eta) << ',' << format_number(r.epsilon) << ',' << r.nt
            << ',' << (r.ok ? "true" : "false") << ',';
        if (r.ok)
            out << format_number(s.energy) << ',' << format_number(s.corrected_energy) << ',' << format_number(s.spatial)
                << ',' << format_number(s.edge) << ',' << format_number(s.source) << ','
                << format_number(s.source_layer_spatial) << ',' << format_number(s.source_layer_max) << ','
                << format_number(s.source_layer_mid) << ',' << format_number(s.source_integral) << ','
                << s.iterations << ',' << (s.converged ? "true" : "false") << ',' << format_number(s.residual) << ',';
        else
            out << ",,,,,,,,,,,,";
        out << (r.ok ? "" : quote_csv(r.error)) << '\n';
    }
    return out.str();
}

/// Sweep over the config's sweep_* lists; writes sweep.csv (and per-point
/// frames under point_XXX/ when sweep_frames is set). Fails only if every
/// point fails.
inline int run_sweep(const RunConfig& cfg, std::ostream& log) {
    const char* stage = "config";
    try {
        stage = "read";
        const RunInputs in = load_inputs(cfg);
        stage = "sweep";
        ProblemTemplate tmpl = make_template(cfg, in);
        const unsigned workers = tmpl.options.deterministic ? 1u : tmpl.options.threads;
        tmpl.options.threads = 1;
        const ParameterGrid grid{cfg.sweep_gamma, cfg.sweep_eta, cfg.sweep_epsilon, cfg.sweep_nt};
        const auto points = sweep_points(tmpl, grid);
        const auto rows = sweep(tmpl, grid, workers, [&](std::size_t i, const Solution& sol) {
            if (!cfg.sweep_frames) return;
            std::ostringstream name;
            name << "point_" << std::setw(3) << std::setfill('0') << i;
            RunConfig point = cfg;
            point.gamma = points[i].gamma;
            point.eta = points[i].eta;
            point.epsilon = points[i].epsilon;
            write_run(sol, in, point, cfg.out / name.str());
        });
        stage = "write";
        write_text(cfg.out / "sweep.csv", sweep_csv(rows));
        std::size_t ok = 0;
        for (const auto& r : rows) ok += r.ok ? 1 : 0;
        log << ok << " of " << rows.size() << " sweep points solved; table in " << (cfg.out / "sweep.csv").string()
            << '\n';
        for (const auto& r : rows)
            if (!r.ok) log << "  gamma=" << format_number(r.gamma) << " eta=" << format_number(r.eta)
                           << " epsilon=" << format_number(r.epsilon) << " nt=" << r.nt << ": " << r.error << '\n';
        return ok == 0 ? exit_input_error : exit_converged;
    } catch (const std::exception& e) {
        log << "error: " << pipeline_detail::staged(stage, e) << '\n';
        return exit_input_error;
    }
}

/// Dimensions, totals and per-channel statistics of an image.
inline std::string describe_image(const std::filesystem::path& path) {
    const auto img = netpbm::read_density_image(path);
    std::ostringstream out;
    out << path.string() << ": " << img.width << "x" << img.height << ", " << img.channels()
        << (img.channels() == 1 ? " channel" : " channels") << ", maxval " << img.maxval << '\n';
    out << "total " << format_number(img.total()) << '\n';
    const char* rgb[] = {"R", "G", "B"};
    for (std::size_t c = 0; c < img.channels(); ++c) {
        double lo = INFINITY, hi = 0.0, nz = 0.0;
        for (std::size_t cell = 0; cell < img.field.cells; ++cell) {
            const double v = img.field(c, cell, 0);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            nz += v > 0.0 ? 1.0 : 0.0;
        }
        out << (img.channels() == 3 ? rgb[c] : "gray") << ": total " << format_number(img.total(c)) << ", min "
            << format_number(lo) << ", max " << format_number(hi) << ", mean "
            << format_number(img.total(c) / static_cast<double>(img.field.cells)) << ", nonzero cells "
            << static_cast<std::size_t>(nz) << '\n';
    }
    return out.str();
}

} // namespace uomt
