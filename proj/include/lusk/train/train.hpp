#pragma once

// SSIM-gated pair sampling, encoder pretraining as an autoencoder and the
// transporter training loop (Adam with step-decayed learning rate).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "lusk/error.hpp"
#include "lusk/fusion/pipeline.hpp"
#include "lusk/fusion/ssim.hpp"
#include "lusk/kv.hpp"
#include "lusk/model/model.hpp"
#include "lusk/tensor/adam.hpp"

namespace lusk {

struct TrainConfig {
    std::size_t epochs = 60;
    std::size_t batch_size = 32;
    double lr0 = 0.001;
    double lr_decay = 0.95;
    std::size_t lr_interval = 6;
    double ssim_threshold = 0.85;
    std::size_t max_pair_gap = 10;
    std::size_t pairs = 200;
    std::size_t pretrain_epochs = 10;
    std::size_t checkpoint_every = 10;
    std::uint64_t seed = 1;
    bool use_tga = true;
    bool use_ssim_gate = true;
    bool use_cbam = false;
    InputMode input_mode = InputMode::fused;

    void validate() const
    {
        if (!(ssim_threshold > 0.0 && ssim_threshold <= 1.0)) {
            throw ConfigError("ssim_threshold must be in (0, 1], got " + format_double(ssim_threshold));
        }
        if (!(lr0 > 0.0)) throw ConfigError("lr0 must be > 0, got " + format_double(lr0));
        if (!(lr_decay > 0.0 && lr_decay <= 1.0)) {
            throw ConfigError("lr_decay must be in (0, 1], got " + format_double(lr_decay));
        }
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (lr_interval < 1) throw ConfigError("lr_interval must be >= 1");
        if (max_pair_gap < 1) throw ConfigError("max_pair_gap must be >= 1");
        if (pairs < 1) throw ConfigError("pairs must be >= 1");
    }

    bool operator==(const TrainConfig&) const = default;
};

inline double lr_at(std::size_t epoch, const TrainConfig& cfg)
{
    return cfg.lr0 * std::pow(cfg.lr_decay, double(epoch / cfg.lr_interval));
}

// Pushes the ablation switches into the model and preprocessing configuration.
inline void apply_switches(const TrainConfig& cfg, ModelConfig& model, PreprocessConfig& pre)
{
    model.cbam_enabled = cfg.use_cbam;
    pre.use_tga = cfg.use_tga;
    pre.mode = cfg.input_mode;
    pre.input_size = model.input_size;
}

inline void write_kv(const TrainConfig& c, KvTable& t)
{
    t.set("epochs", std::to_string(c.epochs));
    t.set("batch_size", std::to_string(c.batch_size));
    t.set("lr0", format_double(c.lr0));
    t.set("lr_decay", format_double(c.lr_decay));
    t.set("lr_interval", std::to_string(c.lr_interval));
    t.set("ssim_threshold", format_double(c.ssim_threshold));
    t.set("max_pair_gap", std::to_string(c.max_pair_gap));
    t.set("pairs", std::to_string(c.pairs));
    t.set("pretrain_epochs", std::to_string(c.pretrain_epochs));
    t.set("checkpoint_every", std::to_string(c.checkpoint_every));
    t.set("seed", std::to_string(c.seed));
    t.set("use_tga", format_bool(c.use_tga));
    t.set("use_ssim_gate", format_bool(c.use_ssim_gate));
    t.set("use_cbam", format_bool(c.use_cbam));
    t.set("input_mode", to_string(c.input_mode));
}

// Returns false when the key does not belong to TrainConfig.
inline bool apply_entry(TrainConfig& c, const KvEntry& e, const std::string& source)
{
    if (e.key == "epochs") c.epochs = parse_count(e, source);
    else if (e.key == "batch_size") c.batch_size = parse_count(e, source);
    else if (e.key == "lr0") c.lr0 = parse_double(e, source);
    else if (e.key == "lr_decay") c.lr_decay = parse_double(e, source);
    else if (e.key == "lr_interval") c.lr_interval = parse_count(e, source);
    else if (e.key == "ssim_threshold") c.ssim_threshold = parse_double(e, source);
    else if (e.key == "max_pair_gap") c.max_pair_gap = parse_count(e, source);
    else if (e.key == "pairs") c.pairs = parse_count(e, source);
    else if (e.key == "pretrain_epochs") c.pretrain_epochs = parse_count(e, source);
    else if (e.key == "checkpoint_every") c.checkpoint_every = parse_count(e, source);
    else if (e.key == "seed") c.seed = std::uint64_t(parse_count(e, source));
    else if (e.key == "use_tga") c.use_tga = parse_bool(e, source);
    else if (e.key == "use_ssim_gate") c.use_ssim_gate = parse_bool(e, source);
    else if (e.key == "use_cbam") c.use_cbam = parse_bool(e, source);
    else if (e.key == "input_mode") {
        try {
            c.input_mode = parse_input_mode(e.value);
        } catch (const ConfigError& err) {
            throw ConfigError(where(e, source) + ": " + err.what());
        }
    } else return false;
    return true;
}

// ---------------------------------------------------------------------------
// Pair sampling

struct PairSample {
    std::size_t video = 0;
    std::size_t source = 0;
    std::size_t target = 0;
    double ssim = 1.0;

    bool operator==(const PairSample&) const = default;
};

using VideoFrames = std::vector<std::vector<Frame>>;

// Draws `count` pairs uniformly (with replacement) from all same-video
// (i, j), i != j, |i - j| <= max_pair_gap. With gating on, pairs below the
// SSIM threshold are redrawn, up to 50 draws per requested pair.
inline std::vector<PairSample> sample_pairs(const VideoFrames& videos, const TrainConfig& cfg, std::size_t count,
                                            std::mt19937_64& rng)
{
    if (videos.empty()) throw DataError("sample_pairs: no videos");
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> candidates;
    for (std::size_t v = 0; v < videos.size(); ++v) {
        const std::size_t n = videos[v].size();
        if (n < 2) {
            throw DataError("sample_pairs: video " + std::to_string(v) + " has " + std::to_string(n) +
                            " frame(s), need at least 2");
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i > cfg.max_pair_gap ? i - cfg.max_pair_gap : 0;
                 j <= std::min(n - 1, i + cfg.max_pair_gap); ++j)
                if (i != j) candidates.emplace_back(v, i, j);
    }

    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, double> cache;
    auto similarity = [&](std::size_t v, std::size_t i, std::size_t j) {
        const auto key = std::make_tuple(v, std::min(i, j), std::max(i, j));
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        const double s = ssim(videos[v][i], videos[v][j]);
        cache.emplace(key, s);
        return s;
    };

    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    std::vector<PairSample> out;
    const std::size_t budget = 50 * count;
    std::size_t draws = 0;
    while (out.size() < count) {
        if (draws == budget) {
            throw DataError("sample_pairs: only " + std::to_string(out.size()) + " of " + std::to_string(count) +
                            " pairs reached ssim >= " + format_double(cfg.ssim_threshold) + " in " +
                            std::to_string(draws) + " draws (acceptance rate " +
                            format_double(double(out.size()) / double(draws)) + ")");
        }
        ++draws;
        const auto [v, i, j] = candidates[pick(rng)];
        const double s = similarity(v, i, j);
        if (cfg.use_ssim_gate && s < cfg.ssim_threshold) continue;
        out.push_back({v, i, j, s});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shared optimisation helpers

struct EpochLoss {
    std::size_t epoch = 0;
    double mean_loss = 0;
    double lr = 0;
};

template <typename T>
void zero_grads(std::vector<Tensor<T>>& params)
{
    for (auto& p : params) p.zero_grad();
}

// Copies every parameter of `src` into the same-named parameter of `dst`.
template <typename T>
void copy_params(ParamSet<T>& dst, const ParamSet<T>& src)
{
    for (const auto& s : src.tensors()) {
        if (!dst.has(s.name())) throw ConfigError("copy_params: no parameter '" + s.name() + "' in target");
        auto& d = dst.at(s.name());
        if (d.shape() != s.shape()) {
            throw ConfigError("copy_params: parameter '" + s.name() + "' has shape " + to_string(s.shape()) +
                              " but target has " + to_string(d.shape()));
        }
        std::copy(s.values().begin(), s.values().end(), d.values_mut().begin());
    }
}

inline void require_finite_loss(const char* op, double loss, std::size_t epoch, std::size_t batch)
{
    if (!std::isfinite(loss)) {
        throw NumericError(std::string(op) + ": non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch));
    }
}

// ---------------------------------------------------------------------------
// Encoder pretraining

template <typename T>
struct PretrainResult {
    ParamSet<T> encoder;
    std::vector<EpochLoss> losses;
};

// Encoder plus a throwaway "decoder.*" mirror.
template <typename T>
ParamSet<T> autoencoder_params(const ModelConfig& c, std::uint64_t seed)
{
    c.validate();
    std::mt19937_64 rng(seed);
    ParamSet<T> p;
    add_encoder_params(p, rng, c);
    add_decoder_params(p, rng, "decoder", c);
    return p;
}

template <typename T>
Tensor<T> autoencoder_loss(const ParamSet<T>& p, const ModelConfig& c, const Tensor<T>& batch)
{
    return mse(decode(p, "decoder", c, encode(p, c, batch)), batch);
}

// Mean reconstruction loss over all stacks, one stack at a time.
template <typename T>
double autoencoder_loss(const ParamSet<T>& p, const ModelConfig& c, const std::vector<FeatureStack>& stacks)
{
    double total = 0;
    for (const auto& s : stacks) total += double(autoencoder_loss(p, c, stack_to_tensor<T>(s)).item());
    return total / double(stacks.size());
}

inline std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size, std::mt19937_64& rng)
{
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t b = 0; b < n; b += batch_size) {
        out.emplace_back(order.begin() + std::ptrdiff_t(b), order.begin() + std::ptrdiff_t(std::min(n, b + batch_size)));
    }
    return out;
}

// Trains encoder + mirror decoder to reconstruct the stacks and returns
// only the encoder parameters.
template <typename T>
PretrainResult<T> pretrain_encoder(const std::vector<FeatureStack>& stacks, const ModelConfig& c,
                                   const TrainConfig& cfg,
                                   const std::function<void(const EpochLoss&)>& on_epoch = {})
{
    if (stacks.empty()) throw DataError("pretrain_encoder: no feature stacks");
    cfg.validate();
    auto p = autoencoder_params<T>(c, cfg.seed);
    auto& params = p.tensors();
    AdamState<T> adam;
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    PretrainResult<T> out;
    for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        const double lr = lr_at(epoch, cfg);
        double total = 0;
        std::size_t b = 0;
        for (const auto& idx : shuffled_batches(stacks.size(), cfg.batch_size, rng)) {
            std::vector<const FeatureStack*> batch;
            for (auto i : idx) batch.push_back(&stacks[i]);
            const auto loss = autoencoder_loss(p, c, stacks_to_tensor<T>(batch));
            const double l = double(loss.item());
            require_finite_loss("pretrain_encoder", l, epoch, b++);
            zero_grads(params);
            backward(loss);
            adam_step(params, adam, lr);
            total += l * double(idx.size());
        }
        out.losses.push_back({epoch, total / double(stacks.size()), lr});
        if (on_epoch) on_epoch(out.losses.back());
    }
    for (const auto& t : p.with_prefix("encoder.")) {
        out.encoder.add(t.name(), t.shape(), std::vector<T>(t.values().begin(), t.values().end()));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Transporter training

template <typename T>
struct TrainHooks {
    // Called every checkpoint_every epochs and after the last epoch with
    // the number of completed epochs.
    std::function<void(std::size_t, const Model<T>&)> checkpoint;
    std::function<void(const EpochLoss&)> on_epoch;
};

struct TrainResult {
    std::vector<EpochLoss> losses;
    std::vector<std::string> trace;
    std::vector<PairSample> pairs;
};

// Stage list of one training step under the given switches.
inline std::vector<std::string> training_trace(const TrainConfig& cfg, const PreprocessConfig& pre,
                                               const Frame& probe)
{
    std::vector<std::string> trace;
    preprocess(probe, pre, &trace);
    if (cfg.use_ssim_gate) trace.emplace_back("ssim_gate");
    trace.emplace_back("encoder");
    if (cfg.use_cbam) trace.emplace_back("cbam");
    trace.emplace_back("keynet");
    trace.emplace_back("transport");
    trace.emplace_back("refine");
    return trace;
}

template <typename T>
void require_switches(const TrainConfig& cfg, const Model<T>& m)
{
    std::string diff;
    auto check = [&](bool same, const std::string& what) {
        if (!same) diff += (diff.empty() ? "" : "; ") + what;
    };
    check(m.config.cbam_enabled == cfg.use_cbam, "use_cbam=" + format_bool(cfg.use_cbam) +
                                                     " but the model has cbam_enabled=" +
                                                     format_bool(m.config.cbam_enabled));
    check(m.preprocess.use_tga == cfg.use_tga, "use_tga=" + format_bool(cfg.use_tga) + " but the model has " +
                                                   format_bool(m.preprocess.use_tga));
    check(m.preprocess.mode == cfg.input_mode, "input_mode=" + to_string(cfg.input_mode) +
                                                   " but the model has " + to_string(m.preprocess.mode));
    if (!diff.empty()) throw ConfigError("train: " + diff);
}

// Samples cfg.pairs pairs once, then runs cfg.epochs passes over them in
// shuffled batches. Every parameter (including a pretrained encoder) is
// updated.
template <typename T>
TrainResult train(Model<T>& model, const VideoFrames& videos, const TrainConfig& cfg,
                  const TrainHooks<T>& hooks = {})
{
    cfg.validate();
    require_switches(cfg, model);
    if (videos.empty() || videos[0].empty()) throw DataError("train: no frames");

    TrainResult out;
    out.trace = training_trace(cfg, model.preprocess, videos[0][0]);

    std::vector<std::vector<FeatureStack>> stacks(videos.size());
    for (std::size_t v = 0; v < videos.size(); ++v)
        for (const auto& f : videos[v]) stacks[v].push_back(preprocess(f, model.preprocess));

    std::mt19937_64 rng(cfg.seed);
    out.pairs = sample_pairs(videos, cfg, cfg.pairs, rng);

    auto& params = model.params.tensors();
    AdamState<T> adam;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(epoch, cfg);
        double total = 0;
        std::size_t b = 0;
        for (const auto& idx : shuffled_batches(out.pairs.size(), cfg.batch_size, rng)) {
            std::vector<const FeatureStack*> src, tgt;
            for (auto i : idx) {
                const auto& pr = out.pairs[i];
                src.push_back(&stacks[pr.video][pr.source]);
                tgt.push_back(&stacks[pr.video][pr.target]);
            }
            const auto fwd =
                transporter_forward(model.params, model.config, stacks_to_tensor<T>(src), stacks_to_tensor<T>(tgt));
            const double l = double(fwd.loss.item());
            require_finite_loss("train", l, epoch, b++);
            zero_grads(params);
            backward(fwd.loss);
            adam_step(params, adam, lr);
            total += l * double(idx.size());
        }
        out.losses.push_back({epoch, total / double(out.pairs.size()), lr});
        if (hooks.on_epoch) hooks.on_epoch(out.losses.back());
        const bool last = epoch + 1 == cfg.epochs;
        const bool periodic = cfg.checkpoint_every && (epoch + 1) % cfg.checkpoint_every == 0;
        if (hooks.checkpoint && (last || periodic)) hooks.checkpoint(epoch + 1, model);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loss CSV

inline std::string loss_csv(const std::vector<EpochLoss>& losses)
{
    std::string s = "epoch,mean_loss,lr\n";
    for (const auto& e : losses) {
        s += std::to_string(e.epoch) + "," + format_double(e.mean_loss) + "," + format_double(e.lr) + "\n";
    }
    return s;
}

inline void write_loss_csv(const std::string& path, const std::vector<EpochLoss>& losses)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os << loss_csv(losses);
    if (!os) throw DataError("failed writing " + path);
}

} // namespace lusk
