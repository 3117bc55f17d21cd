#pragma once

// Subcommand bodies of the lusk command-line tool. Each one reads and
// writes files only through its arguments and throws ConfigError,
// DataError or NumericError on failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lusk/cli/run_config.hpp"
#include "lusk/eval/eval.hpp"
#include "lusk/model/model.hpp"
#include "lusk/synth/synth.hpp"
#include "lusk/train/train.hpp"

namespace lusk {

namespace fs = std::filesystem;

// `path` with its extension replaced by `suffix` (model.lusk -> model.loss.csv).
inline std::string sibling_path(const std::string& path, const std::string& suffix)
{
    fs::path p(path);
    p.replace_extension(suffix);
    return p.string();
}

inline void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir);
}

// A frame directory is one video; otherwise every subdirectory holding
// frames is a video, in name order.
inline VideoFrames load_videos(const std::string& dir)
{
    if (!fs::is_directory(dir)) throw DataError(dir + ": not a directory");
    if (fs::exists(fs::path(dir) / frame_filename(0))) return {load_frames(dir)};
    std::vector<fs::path> subdirs;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory() && fs::exists(e.path() / frame_filename(0))) subdirs.push_back(e.path());
    std::sort(subdirs.begin(), subdirs.end());
    if (subdirs.empty()) throw DataError(dir + ": no frames (" + frame_filename(0) + ") found");
    VideoFrames out;
    for (const auto& d : subdirs) out.push_back(load_frames(d.string()));
    return out;
}

inline void cmd_synth(const RunConfig& cfg, const std::string& out_dir)
{
    save_dataset(generate(cfg.scene), out_dir);
}

inline std::string channel_filename(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "channel_%02zu.pgm", i);
    return buf;
}

// Writes each channel of the frame's feature stack as a PGM image and
// returns the number written. TGA is applied only when `attenuation` is set.
inline std::size_t cmd_fuse(const std::string& in, const std::string& out_dir, std::optional<double> attenuation,
                            InputMode mode, FusionConfig fusion = {})
{
    const Frame frame = read_pgm(in);
    if (frame.rows != frame.cols) {
        throw DataError(in + ": frame is " + shape_string(frame) + ", expected a square frame");
    }
    PreprocessConfig pre;
    pre.input_size = frame.rows;
    pre.use_tga = attenuation.has_value();
    if (attenuation) fusion.attenuation_a = *attenuation;
    pre.mode = mode;
    pre.fusion = fusion;
    pre.fusion.validate();
    const FeatureStack stack = preprocess(frame, pre);
    ensure_dir(out_dir);
    for (std::size_t i = 0; i < stack.size(); ++i) {
        write_pgm((fs::path(out_dir) / channel_filename(i)).string(), stack.channels[i]);
    }
    return stack.size();
}

inline void log_epoch(std::ostream* log, const char* what, const EpochLoss& e)
{
    if (log) *log << what << " epoch " << e.epoch << " loss " << format_double(e.mean_loss) << " lr "
                  << format_double(e.lr) << "\n";
}

inline std::vector<FeatureStack> preprocess_all(const VideoFrames& videos, const PreprocessConfig& pre)
{
    std::vector<FeatureStack> out;
    for (const auto& v : videos)
        for (const auto& f : v) out.push_back(preprocess(f, pre));
    return out;
}

// Pretrains the encoder and saves a full model checkpoint whose remaining
// parameters are the seeded initialization used by `train`.
inline void cmd_pretrain(const RunConfig& cfg, const std::string& data, const std::string& out,
                         std::ostream* log = nullptr)
{
    const auto videos = load_videos(data);
    auto model = make_model<float>(cfg.model_config(), cfg.preprocess_config(), cfg.train.seed);
    const auto res = pretrain_encoder<float>(preprocess_all(videos, model.preprocess), model.config, cfg.train,
                                             [&](const EpochLoss& e) { log_epoch(log, "pretrain", e); });
    copy_params(model.params, res.encoder);
    save_model(out, model);
    write_loss_csv(sibling_path(out, ".pretrain.csv"), res.losses);
}

inline std::string trace_text(const std::vector<std::string>& trace)
{
    std::string s;
    for (const auto& t : trace) s += t + "\n";
    return s;
}

// Trains from `init` (a pretrain or train checkpoint) or a fresh seeded
// model. Writes the checkpoint, <out>.loss.csv and <out>.trace.txt.
inline TrainResult cmd_train(const RunConfig& cfg, const std::string& data, const std::string& init,
                             const std::string& out, std::ostream* log = nullptr)
{
    const auto videos = load_videos(data);
    const ModelConfig mc = cfg.model_config();
    Model<float> model = init.empty() ? make_model<float>(mc, cfg.preprocess_config(), cfg.train.seed)
                                      : load_model<float>(init, &mc);
    if (!init.empty()) {
        KvTable a, b;
        write_kv(model.preprocess, a);
        write_kv(cfg.preprocess_config(), b);
        if (format_kv(a) != format_kv(b)) {
            throw ConfigError(init + ": preprocessing settings differ from the configuration");
        }
    }
    TrainHooks<float> hooks;
    hooks.on_epoch = [&](const EpochLoss& e) { log_epoch(log, "train", e); };
    hooks.checkpoint = [&](std::size_t, const Model<float>& m) { save_model(out, m); };
    auto res = train(model, videos, cfg.train, hooks);
    write_loss_csv(sibling_path(out, ".loss.csv"), res.losses);
    write_text_file(sibling_path(out, ".trace.txt"), trace_text(res.trace));
    return res;
}

inline constexpr const char* kKeypointsFile = "keypoints.csv";

inline std::string overlay_filename(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "overlay_%05zu.pgm", i);
    return buf;
}

// 3x3 maximum-intensity marker centred on each keypoint, clipped to the frame.
inline Frame draw_markers(Frame f, const std::vector<Keypoint>& kps)
{
    for (const auto& k : kps) {
        const long r0 = std::lround(k.row), c0 = std::lround(k.col);
        for (long r = r0 - 1; r <= r0 + 1; ++r)
            for (long c = c0 - 1; c <= c0 + 1; ++c)
                if (r >= 0 && c >= 0 && r < long(f.rows) && c < long(f.cols)) f(std::size_t(r), std::size_t(c)) = 1.0;
    }
    return f;
}

inline FrameKeypoints cmd_infer(const std::string& ckpt, const std::string& data, const std::string& out_dir)
{
    const auto model = load_model<float>(ckpt);
    const auto frames = load_frames(data);
    FrameKeypoints kps;
    for (const auto& f : frames) kps.push_back(infer_keypoints(f, model));
    ensure_dir(out_dir);
    write_text_file((fs::path(out_dir) / kKeypointsFile).string(), keypoints_csv(kps));
    for (std::size_t i = 0; i < frames.size(); ++i) {
        write_pgm((fs::path(out_dir) / overlay_filename(i)).string(), draw_markers(frames[i], kps[i]));
    }
    return kps;
}

// Writes the report to `out` and the per-frame detail to <out>.frames.csv.
inline EvalReport cmd_eval(const std::string& pred, const std::string& truth_dir, std::optional<double> delta,
                           const std::string& out)
{
    const auto kp_path = (fs::path(pred) / kKeypointsFile).string();
    const auto kps = keypoints_from_csv(read_text_file(kp_path), kp_path);
    const auto truth = load_truth((fs::path(truth_dir) / kTruthFile).string());
    const double d = delta ? *delta : default_delta(read_pgm((fs::path(truth_dir) / frame_filename(0)).string()).rows);
    const auto report = evaluate(kps, truth, d);
    write_text_file(out, report_text(report));
    write_text_file(sibling_path(out, ".frames.csv"), per_frame_csv(kps, truth, d));
    return report;
}

} // namespace lusk
