#pragma once

#include <string>
#include <vector>

#include "lusk/error.hpp"
#include "lusk/kv.hpp"

namespace lusk {

// Which transport branch (features and heatmap) is held constant during
// backpropagation.
enum class StopBranch { source, target };

inline std::string to_string(StopBranch b) { return b == StopBranch::source ? "source" : "target"; }

inline StopBranch parse_stop_branch(const std::string& s)
{
    if (s == "source") return StopBranch::source;
    if (s == "target") return StopBranch::target;
    throw ConfigError("stop_gradient_branch must be source or target, got '" + s + "'");
}

struct ModelConfig {
    std::size_t k = 10;
    std::size_t input_channels = 10;
    std::size_t input_size = 256;
    std::size_t feature_stride = 4;
    double heatmap_sigma = 1.5;
    bool cbam_enabled = false;
    StopBranch stop_gradient_branch = StopBranch::source;
    // Encoder and KeyNet trunk widths after the first and second stride-2 stage.
    std::size_t stage1_channels = 32;
    std::size_t stage2_channels = 64;
    std::size_t refine_channels = 32;
    std::size_t cbam_reduction = 8;

    std::size_t feature_size() const { return input_size / feature_stride; }
    std::size_t feature_channels() const { return stage2_channels; }

    void validate() const
    {
        if (k < 1) throw ConfigError("model: k must be >= 1");
        if (input_channels < 1) throw ConfigError("model: input_channels must be >= 1");
        if (feature_stride != 4) {
            throw ConfigError("model: feature_stride must be 4 (two stride-2 stages), got " +
                              std::to_string(feature_stride));
        }
        if (input_size == 0 || input_size % feature_stride != 0) {
            throw ConfigError("model: input_size " + std::to_string(input_size) +
                              " is not divisible by feature_stride " + std::to_string(feature_stride));
        }
        if (!(heatmap_sigma > 0.0)) throw ConfigError("model: heatmap_sigma must be > 0");
        if (!stage1_channels || !stage2_channels || !refine_channels) {
            throw ConfigError("model: channel counts must be >= 1");
        }
        if (cbam_reduction < 1 || cbam_reduction > stage1_channels) {
            throw ConfigError("model: cbam_reduction must lie in [1, stage1_channels]");
        }
    }

    bool operator==(const ModelConfig&) const = default;
};

inline void write_kv(const ModelConfig& c, KvTable& t)
{
    t.set("k", std::to_string(c.k));
    t.set("input_channels", std::to_string(c.input_channels));
    t.set("input_size", std::to_string(c.input_size));
    t.set("feature_stride", std::to_string(c.feature_stride));
    t.set("heatmap_sigma", format_double(c.heatmap_sigma));
    t.set("cbam_enabled", format_bool(c.cbam_enabled));
    t.set("stop_gradient_branch", to_string(c.stop_gradient_branch));
    t.set("stage1_channels", std::to_string(c.stage1_channels));
    t.set("stage2_channels", std::to_string(c.stage2_channels));
    t.set("refine_channels", std::to_string(c.refine_channels));
    t.set("cbam_reduction", std::to_string(c.cbam_reduction));
}

// Returns false when the key does not belong to ModelConfig.
inline bool apply_entry(ModelConfig& c, const KvEntry& e, const std::string& source)
{
    if (e.key == "k") c.k = parse_count(e, source);
    else if (e.key == "input_channels") c.input_channels = parse_count(e, source);
    else if (e.key == "input_size") c.input_size = parse_count(e, source);
    else if (e.key == "feature_stride") c.feature_stride = parse_count(e, source);
    else if (e.key == "heatmap_sigma") c.heatmap_sigma = parse_double(e, source);
    else if (e.key == "cbam_enabled") c.cbam_enabled = parse_bool(e, source);
    else if (e.key == "stop_gradient_branch") {
        try {
            c.stop_gradient_branch = parse_stop_branch(e.value);
        } catch (const ConfigError& err) {
            throw ConfigError(where(e, source) + ": " + err.what());
        }
    }
    else if (e.key == "stage1_channels") c.stage1_channels = parse_count(e, source);
    else if (e.key == "stage2_channels") c.stage2_channels = parse_count(e, source);
    else if (e.key == "refine_channels") c.refine_channels = parse_count(e, source);
    else if (e.key == "cbam_reduction") c.cbam_reduction = parse_count(e, source);
    else return false;
    return true;
}

} // namespace lusk
