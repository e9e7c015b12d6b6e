// uomt: dynamic optimal transport between images, balanced or not.
//
//   uomt solve run.cfg [--gamma 10 --nt 24 ...]
//   uomt sweep run.cfg
//   uomt info image.ppm

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "uomt/pipeline.hpp"

namespace {

struct Overrides {
    std::optional<std::string> gamma, eta, epsilon, nt, max_iters, out, edge_density, placement, mask;
    bool deterministic = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--gamma", gamma, "Weight on original inter-channel edges");
        cmd->add_option("--eta", eta, "Weight on source-layer edges (default: gamma)");
        cmd->add_option("--epsilon", epsilon, "Spatial weight of the source layer");
        cmd->add_option("--nt", nt, "Number of time slabs");
        cmd->add_option("--max-iters", max_iters, "Iteration cap");
        cmd->add_option("--out", out, "Output directory");
        cmd->add_option("--edge-density", edge_density, "two_point or primary_endpoint for original edges");
        cmd->add_option("--placement", placement, "uniform or mask");
        cmd->add_option("--mask", mask, "Mask image for placement = mask");
        cmd->add_flag("--deterministic", deterministic, "Single-threaded, fixed reduction order");
    }

    uomt::ConfigEntries entries() const {
        uomt::ConfigEntries e;
        const auto put = [&](const char* key, const std::optional<std::string>& v) {
            if (v) e[key] = *v;
        };
        put("gamma", gamma);
        put("eta", eta);
        put("epsilon", epsilon);
        put("nt", nt);
        put("max_iters", max_iters);
        put("out", out);
        put("edge_density", edge_density);
        put("placement", placement);
        put("mask", mask);
        if (deterministic) e["deterministic"] = "true";
        return e;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic optimal transport between images, with source-layer augmentation for unbalanced mass"};
    app.require_subcommand(1);
    app.footer(std::string("Thread count: UOMT_THREADS (default 1).\n\n") + uomt::metrics_columns_help() +
               "\nExit status: 0 converged, 2 stopped at max_iters, 1 on input or internal error.");

    std::string config_path, image_path;
    Overrides solve_over, sweep_over;

    auto* solve = app.add_subcommand("solve", "Solve one problem and write frames, metrics.csv and summary.txt");
    solve->add_option("config", config_path, "Config file (key = value)")->required();
    solve_over.attach(solve);

    auto* sweep = app.add_subcommand("sweep", "Solve over the sweep_* parameter lists and write sweep.csv");
    sweep->add_option("config", config_path, "Config file (key = value)")->required();
    sweep_over.attach(sweep);

    auto* info = app.add_subcommand("info", "Print dimensions, totals and channel statistics of an image");
    info->add_option("image", image_path, "PGM or PPM image")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (info->parsed()) {
            std::cout << uomt::describe_image(image_path);
            return 0;
        }
        const bool is_solve = solve->parsed();
        const auto cfg = uomt::load_config(config_path, (is_solve ? solve_over : sweep_over).entries());
        return is_solve ? uomt::run(cfg, std::cerr) : uomt::run_sweep(cfg, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return uomt::exit_input_error;
    }
}
