// bitmc command-line harness: single-shot recovery plus the synthetic sweep
// and collaborative-filtering experiments, all driven by a JSON config.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bitmc/bitmc.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitDatasetSkipped = 3;
constexpr int kExitNotConverged = 4;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    bool paper_scale = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON experiment config")->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
    cmd->add_flag("--paper-scale", args.paper_scale,
                  "use full-size defaults for dimensions and replicates");
}

bitmc::ExperimentConfig load(const CommonArgs& args, bitmc::ExperimentKind expected) {
    auto cfg = bitmc::load_config_file(args.config_path, args.paper_scale);
    if (cfg.kind != expected)
        throw bitmc::ExperimentError("config: kind does not match the subcommand");
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"1-bit matrix completion: constrained maximum-likelihood recovery"};
    app.require_subcommand(1);

    CommonArgs recover_args, sigma_args, n_args, recsys_args;
    auto* recover = app.add_subcommand("recover", "solve one instance and write the estimate");
    add_common(recover, recover_args);
    auto* sweep_sigma = app.add_subcommand("sweep-sigma", "error versus noise level");
    add_common(sweep_sigma, sigma_args);
    auto* sweep_n = app.add_subcommand("sweep-n", "error versus number of observations");
    add_common(sweep_n, n_args);
    auto* recsys = app.add_subcommand("recsys-eval", "binarized ratings sign-prediction study");
    add_common(recsys, recsys_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (recover->parsed()) {
            const auto cfg = load(recover_args, bitmc::ExperimentKind::recover);
            const auto res = bitmc::run_recover(cfg);
            std::cout << "wrote " << res.x_hat_path << " and " << res.result_path << "\n";
            if (!res.solution.converged) {
                std::cerr << "solver did not converge (residual " << res.solution.residual
                          << ")\n";
                return kExitNotConverged;
            }
            return kExitOk;
        }
        if (sweep_sigma->parsed()) {
            const auto cfg = load(sigma_args, bitmc::ExperimentKind::sweep_sigma);
            const auto res = bitmc::run_sweep_sigma(cfg);
            std::cout << "wrote " << res.csv_path << " (" << res.rows.size() << " rows)\n";
            return kExitOk;
        }
        if (sweep_n->parsed()) {
            const auto cfg = load(n_args, bitmc::ExperimentKind::sweep_n);
            const auto res = bitmc::run_sweep_n(cfg);
            std::cout << "wrote " << res.csv_path << " (" << res.rows.size() << " rows)\n";
            return kExitOk;
        }
        const auto cfg = load(recsys_args, bitmc::ExperimentKind::recsys_eval);
        const auto res = bitmc::run_recsys_eval(cfg);
        if (res.skipped) {
            std::cout << res.skip_reason << "\n";
            return kExitDatasetSkipped;
        }
        std::cout << "wrote " << res.csv_path << " (overall accuracy " << res.report.overall
                  << ")\n";
        return kExitOk;
    } catch (const bitmc::ExperimentError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
