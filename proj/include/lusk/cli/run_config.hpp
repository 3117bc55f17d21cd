#pragma once

// Whole-run configuration: scene, fusion, model and training settings plus
// paths, read from one key=value file with later overrides.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lusk/error.hpp"
#include "lusk/fusion/pipeline.hpp"
#include "lusk/kv.hpp"
#include "lusk/model/config.hpp"
#include "lusk/synth/synth.hpp"
#include "lusk/train/train.hpp"

namespace lusk {

struct RunConfig {
    SceneSpec scene;
    FusionConfig fusion;
    ModelConfig model;
    TrainConfig train;
    std::string data_dir;
    std::string out_path;
    std::string init_path;

    // Model configuration with the training switches applied.
    ModelConfig model_config() const
    {
        ModelConfig m = model;
        PreprocessConfig p;
        apply_switches(train, m, p);
        return m;
    }

    PreprocessConfig preprocess_config() const
    {
        ModelConfig m = model;
        PreprocessConfig p;
        p.fusion = fusion;
        apply_switches(train, m, p);
        return p;
    }

    void validate() const
    {
        scene.validate();
        fusion.validate();
        model_config().validate();
        train.validate();
    }

    bool operator==(const RunConfig&) const = default;
};

inline void write_kv(const RunConfig& c, KvTable& t)
{
    write_kv(c.scene, t);
    write_kv(c.fusion, t);
    KvTable model;
    write_kv(c.model, model);
    for (const auto& e : model.entries())
        if (e.key != "cbam_enabled") t.set(e.key, e.value);
    write_kv(c.train, t);
    t.set("data_dir", c.data_dir);
    t.set("out_path", c.out_path);
    t.set("init_path", c.init_path);
}

// Returns false when no part of the run configuration owns the key.
inline bool apply_entry(RunConfig& c, const KvEntry& e, const std::string& source)
{
    if (e.key == "data_dir") c.data_dir = e.value;
    else if (e.key == "out_path") c.out_path = e.value;
    else if (e.key == "init_path") c.init_path = e.value;
    else if (e.key == "cbam_enabled") return false;
    else return apply_entry(c.train, e, source) || apply_entry(c.fusion, e, source) ||
                apply_entry(c.model, e, source) || apply_entry(c.scene, e, source);
    return true;
}

// Applies every entry in order; unknown keys are collected and reported
// together.
inline void apply_table(RunConfig& c, const KvTable& t, const std::string& source)
{
    std::vector<std::string> unknown;
    for (const auto& e : t.entries()) {
        if (!apply_entry(c, e, source)) unknown.push_back(where(e, source) + ": " + e.key);
    }
    if (!unknown.empty()) {
        std::string msg = "unknown configuration key" + std::string(unknown.size() > 1 ? "s" : "") + " ";
        for (std::size_t i = 0; i < unknown.size(); ++i) msg += (i ? ", " : "") + unknown[i];
        throw ConfigError(msg);
    }
}

inline void validate_run_config(const RunConfig& c, const std::string& source)
{
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    }
}

inline std::string read_config_file(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open configuration file " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline RunConfig parse_run_config(const std::string& text, const std::string& source)
{
    RunConfig c;
    apply_table(c, parse_kv(text, source), source);
    validate_run_config(c, source);
    return c;
}

inline std::string run_config_text(const RunConfig& c)
{
    KvTable t;
    write_kv(c, t);
    return format_kv(t);
}

// "key=value" overrides from the command line, applied after the file.
inline void apply_overrides(RunConfig& c, const std::vector<std::string>& overrides)
{
    std::string text;
    for (const auto& o : overrides) {
        if (o.find('=') == std::string::npos) throw ConfigError("--set: expected key=value, got '" + o + "'");
        text += o + "\n";
    }
    apply_table(c, parse_kv(text, "--set"), "--set");
}

} // namespace lusk
