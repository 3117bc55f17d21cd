// lusk: synthetic data, feature fusion, training, inference and evaluation
// for unsupervised ultrasound keypoints.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
// failure, 1 anything else.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lusk/cli/commands.hpp"

namespace {

struct ConfigOptions {
    std::string config;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App* cmd, bool required)
    {
        auto* opt = cmd->add_option("--config", config, "key=value configuration file");
        if (required) opt->required();
        cmd->add_option("--set", overrides, "key=value override applied after the file (repeatable)");
        cmd->add_option("--seed", seed, "seed for the scene and for training");
    }

    lusk::RunConfig load() const
    {
        lusk::RunConfig c;
        if (!config.empty()) {
            lusk::apply_table(c, lusk::parse_kv(lusk::read_config_file(config), config), config);
        }
        lusk::apply_overrides(c, overrides);
        if (seed) {
            c.train.seed = *seed;
            c.scene.seed = *seed;
        }
        lusk::validate_run_config(c, config.empty() ? "<defaults>" : config);
        return c;
    }
};

std::string pick(const std::string& flag, const std::string& from_config, const char* name)
{
    if (!flag.empty()) return flag;
    if (!from_config.empty()) return from_config;
    throw lusk::ConfigError(std::string("missing ") + name);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Unsupervised keypoint tracking for lung-ultrasound-like video"};
    app.require_subcommand(1);

    ConfigOptions synth_opts, pretrain_opts, train_opts;
    std::string out, data, init, in, ckpt, pred, truth, mode = "fused";
    std::optional<double> tga, delta;

    auto* synth = app.add_subcommand("synth", "generate a synthetic video with ground truth");
    synth_opts.attach(synth, false);
    synth->add_option("--out", out, "output directory");

    auto* fuse = app.add_subcommand("fuse", "write the ten input channels of one frame as PGM images");
    fuse->add_option("--in", in, "input PGM frame")->required();
    fuse->add_option("--out", out, "output directory")->required();
    fuse->add_option("--tga", tga, "apply depth attenuation with this coefficient");
    fuse->add_option("--mode", mode, "fused or norm")->check(CLI::IsMember({"fused", "norm"}));

    auto* pretrain = app.add_subcommand("pretrain", "pretrain the feature encoder as an autoencoder");
    pretrain_opts.attach(pretrain, false);
    pretrain->add_option("--data", data, "frame directory or directory of videos");
    pretrain->add_option("--out", out, "checkpoint path");

    auto* train = app.add_subcommand("train", "train the transporter network");
    train_opts.attach(train, false);
    train->add_option("--data", data, "frame directory or directory of videos");
    train->add_option("--init", init, "initial checkpoint (from pretrain or train)");
    train->add_option("--out", out, "checkpoint path");

    auto* infer = app.add_subcommand("infer", "per-frame keypoints and overlays");
    infer->add_option("--ckpt", ckpt, "model checkpoint")->required();
    infer->add_option("--data", data, "frame directory")->required();
    infer->add_option("--out", out, "output directory")->required();

    auto* eval = app.add_subcommand("eval", "score keypoints against ground truth");
    eval->add_option("--pred", pred, "directory holding keypoints.csv")->required();
    eval->add_option("--truth", truth, "dataset directory holding truth.txt")->required();
    eval->add_option("--delta", delta, "pleura tolerance in pixels (default 5 at 64x64, scaled)");
    eval->add_option("--out", out, "report path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "lusk: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*synth) {
            const auto cfg = synth_opts.load();
            lusk::cmd_synth(cfg, pick(out, cfg.out_path, "--out"));
        } else if (*fuse) {
            const auto n = lusk::cmd_fuse(in, out, tga, lusk::parse_input_mode(mode));
            std::cerr << "wrote " << n << " channels to " << out << "\n";
        } else if (*pretrain) {
            const auto cfg = pretrain_opts.load();
            lusk::cmd_pretrain(cfg, pick(data, cfg.data_dir, "--data"), pick(out, cfg.out_path, "--out"),
                               &std::cerr);
        } else if (*train) {
            const auto cfg = train_opts.load();
            lusk::cmd_train(cfg, pick(data, cfg.data_dir, "--data"), init.empty() ? cfg.init_path : init,
                            pick(out, cfg.out_path, "--out"), &std::cerr);
        } else if (*infer) {
            lusk::cmd_infer(ckpt, data, out);
        } else if (*eval) {
            const auto r = lusk::cmd_eval(pred, truth, delta, out);
            std::cerr << "pleura accuracy " << lusk::format_double(r.pleura_accuracy) << " ("
                      << r.frames_pleura_correct << "/" << r.frames_total << ")\n";
        }
    } catch (const lusk::ConfigError& e) {
        std::cerr << "lusk: configuration error: " << e.what() << "\n";
        return 2;
    } catch (const lusk::DataError& e) {
        std::cerr << "lusk: data error: " << e.what() << "\n";
        return 3;
    } catch (const lusk::ShapeError& e) {
        std::cerr << "lusk: data error: " << e.what() << "\n";
        return 3;
    } catch (const lusk::NumericError& e) {
        std::cerr << "lusk: numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "lusk: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
