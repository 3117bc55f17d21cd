#pragma once

#include <string>
#include <vector>

#include "lusk/fusion/fusion.hpp"
#include "lusk/fusion/image.hpp"
#include "lusk/kv.hpp"

namespace lusk {

enum class InputMode { fused, norm_stack };

inline std::string to_string(InputMode m) { return m == InputMode::fused ? "fused" : "norm"; }

// Frame -> network input. The resize target is the model input size.
struct PreprocessConfig {
    std::size_t input_size = 256;
    bool use_tga = true;
    InputMode mode = InputMode::fused;
    FusionConfig fusion;

    bool operator==(const PreprocessConfig&) const = default;
};

// Stage names are appended to `trace` when given.
inline FeatureStack preprocess(const Frame& frame, const PreprocessConfig& cfg,
                               std::vector<std::string>* trace = nullptr)
{
    auto mark = [&](const char* s) {
        if (trace) trace->emplace_back(s);
    };
    Frame f = resize_bilinear(frame, cfg.input_size, cfg.input_size);
    mark("resize");
    if (cfg.use_tga) {
        f = tga(f, cfg.fusion.attenuation_a);
        mark("tga");
    }
    if (cfg.mode == InputMode::fused) {
        mark("fuse");
        return fuse(f, cfg.fusion);
    }
    mark("norm_stack");
    return norm_stack(f);
}

// ---------------------------------------------------------------------------
// key=value form. input_size is owned by the model configuration and is not
// written here.

inline void write_kv(const FusionConfig& c, KvTable& t)
{
    t.set("sigma0", format_double(c.sigma0));
    t.set("lambdas", format_double_list(c.lambdas));
    t.set("thresh", format_double(c.thresh));
    t.set("epsilon", format_double(c.epsilon));
    t.set("attenuation_a", format_double(c.attenuation_a));
    t.set("energy_denominator", to_string(c.denominator));
    t.set("local_phase_mode", to_string(c.local_phase_mode));
}

inline bool apply_entry(FusionConfig& c, const KvEntry& e, const std::string& source)
{
    if (e.key == "sigma0") c.sigma0 = parse_double(e, source);
    else if (e.key == "lambdas") c.lambdas = parse_double_list(e, source);
    else if (e.key == "thresh") c.thresh = parse_double(e, source);
    else if (e.key == "epsilon") c.epsilon = parse_double(e, source);
    else if (e.key == "attenuation_a") c.attenuation_a = parse_double(e, source);
    else if (e.key == "energy_denominator") {
        if (e.value == "squared_energy") c.denominator = EnergyDenominator::squared_energy;
        else if (e.value == "sqrt_energy") c.denominator = EnergyDenominator::sqrt_energy;
        else throw ConfigError(where(e, source) + ": energy_denominator must be squared_energy or sqrt_energy, got '" + e.value + "'");
    } else if (e.key == "local_phase_mode") {
        if (e.value == "line") c.local_phase_mode = LocalPhaseMode::line;
        else if (e.value == "edge") c.local_phase_mode = LocalPhaseMode::edge;
        else throw ConfigError(where(e, source) + ": local_phase_mode must be line or edge, got '" + e.value + "'");
    } else return false;
    return true;
}

inline InputMode parse_input_mode(const std::string& s)
{
    if (s == "fused") return InputMode::fused;
    if (s == "norm" || s == "norm_stack") return InputMode::norm_stack;
    throw ConfigError("input_mode must be fused or norm, got '" + s + "'");
}

inline void write_kv(const PreprocessConfig& c, KvTable& t)
{
    t.set("use_tga", format_bool(c.use_tga));
    t.set("input_mode", to_string(c.mode));
    write_kv(c.fusion, t);
}

inline bool apply_entry(PreprocessConfig& c, const KvEntry& e, const std::string& source)
{
    if (e.key == "use_tga") c.use_tga = parse_bool(e, source);
    else if (e.key == "input_mode") {
        try {
            c.mode = parse_input_mode(e.value);
        } catch (const ConfigError& err) {
            throw ConfigError(where(e, source) + ": " + err.what());
        }
    } else return apply_entry(c.fusion, e, source);
    return true;
}

} // namespace lusk
