#pragma once

// Run configuration: a flat UTF-8 file of key = value lines. Blank lines and
// lines starting with '#' are ignored. Unknown keys are errors.
//
//   source, target      input images (binary PGM or PPM), relative to the config file
//   mask                placement mask image (grayscale), required iff placement = mask
//   mode                scalar | vector | auto (default auto: vector when the images are colour)
//   channels            comma-separated channel names for vector mode (default R,G,B)
//   graph               comma-separated edges "a-b" over channel names (default: complete graph)
//   gamma, eta          weights on original edges / source-layer edges (eta defaults to gamma)
//   epsilon             spatial weight of the source layer (default 1e-3)
//   edge_density        two_point | primary_endpoint for original edges (default two_point)
//   source_edge_density density mode for source-layer edges (default primary_endpoint)
//   nt                  time slabs (default 16, at least 2)
//   lambda, alpha       splitting step and relaxation (defaults 1, 1.8)
//   max_iters, energy_rtol, residual_tol, cg_tol
//   out                 output directory (default "out")
//   placement           uniform | mask
//   normalization       fixed_scale | per_frame (frame brightness)
//   deterministic       true | false
//   sweep_gamma, sweep_eta, sweep_epsilon, sweep_nt   comma-separated lists for `sweep`
//   sweep_frames        true | false: also write frames for every sweep point

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "uomt/energy.hpp"
#include "uomt/error.hpp"
#include "uomt/netpbm.hpp"
#include "uomt/solver.hpp"

namespace uomt {

enum class RunMode { automatic, scalar, vector };

struct RunConfig {
    std::filesystem::path source;
    std::filesystem::path target;
    std::optional<std::filesystem::path> mask;
    RunMode mode = RunMode::automatic;
    std::vector<std::string> channels;
    std::vector<std::pair<std::string, std::string>> graph; // empty: complete graph
    double gamma = 1.0;
    std::optional<double> eta;
    double epsilon = 1e-3;
    EdgeDensityModes modes;
    std::size_t nt = 16;
    SolverOptions options;
    std::filesystem::path out = "out";
    PlacementKind placement = PlacementKind::uniform;
    netpbm::Normalization normalization = netpbm::Normalization::fixed_scale;
    std::vector<double> sweep_gamma, sweep_eta, sweep_epsilon;
    std::vector<std::size_t> sweep_nt;
    bool sweep_frames = false;

    double eta_value() const { return eta.value_or(gamma); }

    void validate() const {
        if (source.empty() || target.empty()) throw InputError("config: source and target images are required");
        for (const auto& p : {source, target})
            if (!std::filesystem::exists(p)) throw InputError("config: file not found: " + p.string());
        if (mask && !std::filesystem::exists(*mask)) throw InputError("config: file not found: " + mask->string());
        if (!(gamma > 0.0) || !(eta_value() > 0.0) || !(epsilon > 0.0))
            throw InputError("config: gamma, eta and epsilon must be positive");
        if (nt < 2) throw InputError("config: nt must be at least 2");
        if (placement == PlacementKind::mask && !mask) throw InputError("config: placement = mask needs a mask image");
        if (placement != PlacementKind::mask && mask) throw InputError("config: a mask is given but placement is not mask");
        for (double v : sweep_gamma)
            if (!(v > 0.0)) throw InputError("config: sweep_gamma values must be positive");
        for (double v : sweep_eta)
            if (!(v > 0.0)) throw InputError("config: sweep_eta values must be positive");
        for (double v : sweep_epsilon)
            if (!(v > 0.0)) throw InputError("config: sweep_epsilon values must be positive");
        for (std::size_t v : sweep_nt)
            if (v < 2) throw InputError("config: sweep_nt values must be at least 2");
        options.validate();
    }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

inline double to_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    const char* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || ptr != end) throw InputError("config: " + key + " expects a number, got '" + v + "'");
    return x;
}

inline long to_integer(const std::string& key, const std::string& v) {
    long x = 0;
    const char* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || ptr != end) throw InputError("config: " + key + " expects an integer, got '" + v + "'");
    return x;
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
    const long x = to_integer(key, v);
    if (x < 0) throw InputError("config: " + key + " must not be negative");
    return static_cast<std::size_t>(x);
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw InputError("config: " + key + " expects true or false, got '" + v + "'");
}

} // namespace config_detail

/// Keys accepted in a config file and as command-line overrides.
inline const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys{
        "source",    "target",       "mask",          "mode",          "channels",    "graph",
        "gamma",     "eta",          "epsilon",       "edge_density",  "source_edge_density",
        "nt",        "lambda",       "alpha",         "max_iters",     "energy_rtol", "residual_tol",
        "cg_tol",    "out",          "placement",     "normalization", "deterministic",
        "sweep_gamma", "sweep_eta",  "sweep_epsilon", "sweep_nt",      "sweep_frames"};
    return keys;
}

using ConfigEntries = std::map<std::string, std::string>;

/// Parses key = value lines. Duplicate and unknown keys are errors.
inline ConfigEntries parse_config_entries(std::istream& in, const std::string& name = "<config>") {
    using namespace config_detail;
    ConfigEntries entries;
    std::string line;
    std::size_t lineno = 0;
    const auto& keys = config_keys();
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        const std::string where = name + ":" + std::to_string(lineno);
        if (eq == std::string::npos) throw InputError("config: " + where + ": expected key = value");
        const std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw InputError("config: " + where + ": unknown key '" + key + "'");
        if (!entries.emplace(key, value).second) throw InputError("config: " + where + ": duplicate key '" + key + "'");
    }
    return entries;
}

/// Builds a typed config. Relative paths are resolved against base_dir.
inline RunConfig make_config(const ConfigEntries& entries, const std::filesystem::path& base_dir = {}) {
    using namespace config_detail;
    RunConfig c;
    const auto path = [&](const std::string& v) {
        std::filesystem::path p(v);
        return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    };
    const auto numbers = [](const std::string& key, const std::string& v) {
        std::vector<double> out;
        for (const auto& s : split(v, ',')) out.push_back(to_double(key, s));
        return out;
    };
    for (const auto& [key, v] : entries) {
        if (key == "source") c.source = path(v);
        else if (key == "target") c.target = path(v);
        else if (key == "mask") { if (!v.empty()) c.mask = path(v); }
        else if (key == "mode") {
            if (v == "scalar") c.mode = RunMode::scalar;
            else if (v == "vector") c.mode = RunMode::vector;
            else if (v == "auto") c.mode = RunMode::automatic;
            else throw InputError("config: mode must be scalar, vector or auto, got '" + v + "'");
        }
        else if (key == "channels") c.channels = split(v, ',');
        else if (key == "graph") {
            for (const auto& e : split(v, ',')) {
                const auto dash = e.find('-');
                if (dash == std::string::npos) throw InputError("config: graph edge '" + e + "' is not of the form a-b");
                c.graph.emplace_back(trim(e.substr(0, dash)), trim(e.substr(dash + 1)));
            }
        }
        else if (key == "gamma") c.gamma = to_double(key, v);
        else if (key == "eta") c.eta = to_double(key, v);
        else if (key == "epsilon") c.epsilon = to_double(key, v);
        else if (key == "edge_density") c.modes.original = parse_edge_density_mode(v);
        else if (key == "source_edge_density") c.modes.augmentation = parse_edge_density_mode(v);
        else if (key == "nt") c.nt = to_count(key, v);
        else if (key == "lambda") c.options.step = to_double(key, v);
        else if (key == "alpha") c.options.relaxation = to_double(key, v);
        else if (key == "max_iters") c.options.max_iters = static_cast<int>(to_integer(key, v));
        else if (key == "energy_rtol") c.options.energy_rtol = to_double(key, v);
        else if (key == "residual_tol") c.options.residual_tol = to_double(key, v);
        else if (key == "cg_tol") c.options.cg_tol = to_double(key, v);
        else if (key == "out") c.out = path(v);
        else if (key == "placement") {
            if (v == "uniform") c.placement = PlacementKind::uniform;
            else if (v == "mask") c.placement = PlacementKind::mask;
            else throw InputError("config: placement must be uniform or mask, got '" + v + "'");
        }
        else if (key == "normalization") c.normalization = netpbm::parse_normalization(v);
        else if (key == "deterministic") c.options.deterministic = to_bool(key, v);
        else if (key == "sweep_gamma") c.sweep_gamma = numbers(key, v);
        else if (key == "sweep_eta") c.sweep_eta = numbers(key, v);
        else if (key == "sweep_epsilon") c.sweep_epsilon = numbers(key, v);
        else if (key == "sweep_nt") {
            for (const auto& s : split(v, ',')) c.sweep_nt.push_back(to_count(key, s));
        }
        else if (key == "sweep_frames") c.sweep_frames = to_bool(key, v);
        else throw InputError("config: unknown key '" + key + "'");
    }
    return c;
}

/// Reads a config file; `overrides` replace file entries one for one.
inline RunConfig load_config(const std::filesystem::path& file, const ConfigEntries& overrides = {}) {
    std::ifstream in(file);
    if (!in) throw InputError("config: cannot open " + file.string());
    ConfigEntries entries = parse_config_entries(in, file.string());
    const auto& keys = config_keys();
    for (const auto& [k, v] : overrides) {
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw InputError("config: unknown key '" + k + "'");
        // Paths typed on the command line are relative to the working directory.
        const bool is_path = k == "source" || k == "target" || k == "mask" || k == "out";
        entries[k] = is_path && !v.empty() ? std::filesystem::absolute(v).string() : v;
    }
    return make_config(entries, file.parent_path());
}

} // namespace uomt
