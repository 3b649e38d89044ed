#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "pucci/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Extremal-operator solver suite: runs one configured "
                 "experiment and writes a CSV plus a JSON manifest"};

    std::string config_path;
    std::string out_dir;
    bool exploratory = false;
    std::uint64_t seed = 0;
    bool seed_given = false;

    app.add_option("--config", config_path, "experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory (default: cwd)");
    app.add_flag("--exploratory", exploratory,
                 "proceed past admissibility gates, recording a warning");
    app.add_option("--seed", seed, "override the config seed")
        ->each([&seed_given](const std::string&) { seed_given = true; });

    CLI11_PARSE(app, argc, argv);

    pucci::harness::RunConfig cfg;
    try {
        cfg = pucci::harness::load_config_file(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed_given) cfg.seed = seed;
    cfg.exploratory = exploratory;

    const pucci::harness::RunResult res = pucci::harness::run(cfg, std::cerr);
    if (res.exit_code != 0)
        std::cerr << "run failed (" << res.error_class << "), manifest at "
                  << res.manifest_path << "\n";
    return res.exit_code;
}
