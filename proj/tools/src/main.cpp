#include "commands.hpp"
#include "config.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace viscal::cli;

    CLI::App app{"viscal: calibrated visibility forecasts from ensemble predictions"};
    app.require_subcommand(1);

    std::string config_path;
    std::string data;
    std::string model;
    std::string mode;
    int window = 0;
    int clusters = 0;
    std::uint64_t seed = 0;
    std::string out;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run configuration")->required();
        cmd->add_option("--data", data, "override the data path");
        cmd->add_option("--model", model, "mixture or bma");
        cmd->add_option("--mode", mode, "regional, local or semilocal");
        cmd->add_option("--window", window, "training window in days");
        cmd->add_option("--clusters", clusters, "number of clusters for semilocal training");
        cmd->add_option("--seed", seed, "random seed");
        cmd->add_option("--out", out, "output directory");
    };
    auto* fit = app.add_subcommand("fit", "fit models for every lead time and verification day");
    auto* predict = app.add_subcommand("predict", "write predictive summaries from fitted parameters");
    auto* verify = app.add_subcommand("verify", "score model, raw ensemble and climatology");
    auto* cluster = app.add_subcommand("cluster", "write daily station cluster assignments");
    for (auto* c : {fit, predict, verify, cluster}) add_common(c);

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = load_config(config_path);
        if (!data.empty()) cfg.data = data;
        if (!model.empty()) cfg.model = parse_model(model);
        if (!mode.empty()) cfg.plan.mode = viscal::parse_spatial_mode(mode);
        if (window > 0) {
            cfg.plan.window_days = window;
            cfg.window_set = true;
        }
        if (clusters > 0) cfg.plan.clusters = clusters;
        if (seed != 0) cfg.seed = seed;
        if (!out.empty()) cfg.out = out;

        if (fit->parsed()) return cmd_fit(cfg);
        if (predict->parsed()) return cmd_predict(cfg);
        if (verify->parsed()) return cmd_verify(cfg);
        return cmd_cluster(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
