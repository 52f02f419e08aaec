// boundedgeo <task> --config <path> [--out <dir>] [--seed <int>]
// Exit status: 0 all findings PASS, 2 some FAIL, 1 error.

#include <iostream>

#include <CLI11.hpp>

#include "boundedgeo/tasks.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Geometry audits and mixed boundary solves on slab domains"};
    std::string task, config_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::string tasks_help;
    for (const auto& t : boundedgeo::task_names()) tasks_help += (tasks_help.empty() ? "" : ", ") + t;
    app.add_option("task", task, "one of: " + tasks_help)->required();
    app.add_option("--config", config_path, "run configuration (JSON)")->required();
    app.add_option("--out", out_dir, "output directory (default: output.dir from the config, else .)");
    app.add_option("--seed", seed, "overrides numeric.seed");
    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = boundedgeo::load_config(config_path);
        if (seed) cfg.numeric.seed = *seed;
        const auto rep = boundedgeo::run(cfg, task, out_dir.empty() ? cfg.out_dir : out_dir);
        for (const auto& f : rep.findings) {
            std::cout << (f.pass ? "PASS " : "FAIL ") << f.name << ": " << boundedgeo::fmt17(f.value) << ' '
                      << f.relation << ' ' << boundedgeo::fmt17(f.bound);
            if (f.relation != "holds")
                std::cout << " [tol " << boundedgeo::fmt17(f.tolerance) << (f.relative ? " rel]" : " abs]");
            std::cout << (f.note.empty() ? "" : " (" + f.note + ")") << '\n';
        }
        return rep.all_pass() ? 0 : 2;
    } catch (const boundedgeo::ParseError& e) {
        std::cerr << "boundedgeo: " << e.what() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "boundedgeo: " << e.what() << '\n';
    }
    return 1;
}
