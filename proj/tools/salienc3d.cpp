#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "s3d/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"salienc3d: spatiotemporal video saliency via 3D conv/deconv networks"};
    app.require_subcommand(1);

    std::string config_path;
    std::string checkpoint_path;
    std::string manifest_path;
    std::string out_dir;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run config");
        sub->add_option("--checkpoint", checkpoint_path, "checkpoint file");
        sub->add_option("--manifest", manifest_path, "JSONL manifest (overrides config)");
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed, "RNG seed (overrides config)");
        return sub;
    };

    CLI::App* train = add_common(app.add_subcommand("train", "train on a manifest"));
    CLI::App* predict =
        add_common(app.add_subcommand("predict", "write saliency maps for a manifest"));
    CLI::App* eval_cmd =
        add_common(app.add_subcommand("eval", "score saliency maps against ground truth"));
    CLI::App* gradcheck =
        add_common(app.add_subcommand("gradcheck", "finite-difference gradient suite"));
    CLI::App* synth = add_common(app.add_subcommand("synth", "generate a synthetic dataset"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : s3d::kExitConfig;
    }

    s3d::RunConfig cfg;
    if (!config_path.empty()) {
        try {
            cfg = s3d::load_config(config_path);
        } catch (const s3d::ConfigError& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return s3d::kExitConfig;
        }
    }
    if (!manifest_path.empty()) cfg.manifest = manifest_path;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    const bool seed_given = app.get_subcommands()[0]->count("--seed") > 0;
    if (seed_given) cfg.seed = seed;

    if (train->parsed()) return s3d::cmd_train(cfg);
    if (predict->parsed()) {
        if (checkpoint_path.empty()) {
            std::cerr << "config error: predict requires --checkpoint\n";
            return s3d::kExitConfig;
        }
        return s3d::cmd_predict(cfg, checkpoint_path, cfg.manifest, cfg.output_dir);
    }
    if (eval_cmd->parsed())
        return s3d::cmd_eval(cfg.output_dir, cfg.manifest, cfg.output_dir + "/report.csv",
                             cfg.output_dir + "/roc.csv");
    if (gradcheck->parsed()) return s3d::cmd_gradcheck(seed_given ? seed : cfg.seed);
    if (synth->parsed()) return s3d::cmd_synth(cfg, cfg.output_dir);
    return s3d::kExitConfig;
}
