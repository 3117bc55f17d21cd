#pragma once

// Model bundle (configuration, preprocessing, parameters), its checkpoint
// form and per-frame keypoint inference.
//
// A model checkpoint is a tensor record file whose first two records,
// "__config__" and "__preprocess__", hold key=value text (one byte per f32
// value); the remaining records are the named parameters.

#include <string>
#include <vector>

#include "lusk/error.hpp"
#include "lusk/fusion/pipeline.hpp"
#include "lusk/kv.hpp"
#include "lusk/model/config.hpp"
#include "lusk/model/network.hpp"
#include "lusk/tensor/checkpoint.hpp"

namespace lusk {

template <typename T>
struct Model {
    ModelConfig config;
    PreprocessConfig preprocess;
    ParamSet<T> params;
};

template <typename T>
Model<T> make_model(const ModelConfig& config, PreprocessConfig preprocess, std::uint64_t seed)
{
    preprocess.input_size = config.input_size;
    return {config, std::move(preprocess), init_params<T>(config, seed)};
}

// [N, C, H, W] batch from equally shaped stacks.
template <typename T>
Tensor<T> stacks_to_tensor(const std::vector<const FeatureStack*>& stacks)
{
    if (stacks.empty()) throw ShapeError("stacks_to_tensor: empty batch");
    const std::size_t C = stacks[0]->size(), H = stacks[0]->rows(), W = stacks[0]->cols();
    std::vector<T> v;
    v.reserve(stacks.size() * C * H * W);
    for (const auto* s : stacks) {
        if (s->size() != C || s->rows() != H || s->cols() != W) {
            throw ShapeError("stacks_to_tensor: stack " + std::to_string(s->size()) + "x" +
                             std::to_string(s->rows()) + "x" + std::to_string(s->cols()) + " differs from " +
                             std::to_string(C) + "x" + std::to_string(H) + "x" + std::to_string(W));
        }
        for (const auto& ch : s->channels)
            for (double x : ch.px) v.push_back(T(x));
    }
    return Tensor<T>({stacks.size(), C, H, W}, std::move(v));
}

template <typename T>
Tensor<T> stack_to_tensor(const FeatureStack& stack)
{
    return stacks_to_tensor<T>({&stack});
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr const char* kConfigRecord = "__config__";
inline constexpr const char* kPreprocessRecord = "__preprocess__";

inline TensorRecord text_record(const std::string& name, const std::string& text)
{
    TensorRecord r;
    r.name = name;
    r.dims = {text.size()};
    for (unsigned char ch : text) r.values.push_back(float(ch));
    return r;
}

inline std::string record_text(const TensorRecord& r, const std::string& source)
{
    std::string s;
    for (float v : r.values) {
        if (!(v >= 0 && v <= 255 && v == float(int(v)))) {
            throw DataError(source + ": record '" + r.name + "' is not a text record");
        }
        s.push_back(char(int(v)));
    }
    return s;
}

inline ModelConfig model_config_from_text(const std::string& text, const std::string& source)
{
    ModelConfig c;
    const KvTable table = parse_kv(text, source);
    for (const auto& e : table.entries()) {
        if (!apply_entry(c, e, source)) throw DataError(source + ": unknown model field '" + e.key + "'");
    }
    c.validate();
    return c;
}

inline std::string model_config_text(const ModelConfig& c)
{
    KvTable t;
    write_kv(c, t);
    return format_kv(t);
}

inline std::string preprocess_text(const PreprocessConfig& c)
{
    KvTable t;
    write_kv(c, t);
    return format_kv(t);
}

inline PreprocessConfig preprocess_from_text(const std::string& text, const std::string& source,
                                             std::size_t input_size)
{
    PreprocessConfig c;
    const KvTable table = parse_kv(text, source);
    for (const auto& e : table.entries()) {
        if (!apply_entry(c, e, source)) throw DataError(source + ": unknown preprocessing field '" + e.key + "'");
    }
    c.fusion.validate();
    c.input_size = input_size;
    return c;
}

// Every field that differs, named with both values.
inline void require_same_config(const ModelConfig& stored, const ModelConfig& expected, const std::string& source)
{
    KvTable a, b;
    write_kv(stored, a);
    write_kv(expected, b);
    std::string diff;
    for (const auto& e : a.entries()) {
        const auto& other = b.get(e.key);
        if (other != e.value) {
            diff += (diff.empty() ? "" : "; ") + e.key + " is " + e.value + " in the checkpoint but " + other +
                    " in the configuration";
        }
    }
    if (!diff.empty()) throw ConfigError(source + ": " + diff);
}

template <typename T>
std::vector<TensorRecord> model_records(const Model<T>& m)
{
    std::vector<TensorRecord> recs{text_record(kConfigRecord, model_config_text(m.config)),
                                   text_record(kPreprocessRecord, preprocess_text(m.preprocess))};
    for (const auto& t : m.params.tensors()) recs.push_back(to_record(t));
    return recs;
}

template <typename T>
void save_model(const std::string& path, const Model<T>& m)
{
    save_records(path, model_records(m));
}

// Copies every record whose name starts with `prefix` into `params`. Each
// such record must match an existing parameter's shape.
template <typename T>
std::size_t assign_params(ParamSet<T>& params, const std::vector<TensorRecord>& recs, const std::string& prefix,
                          const std::string& source)
{
    std::size_t n = 0;
    for (const auto& r : recs) {
        if (r.name.rfind("__", 0) == 0 || r.name.rfind(prefix, 0) != 0) continue;
        if (!params.has(r.name)) throw ConfigError(source + ": unexpected parameter '" + r.name + "'");
        auto& t = params.at(r.name);
        if (t.shape() != r.dims) {
            throw ConfigError(source + ": parameter '" + r.name + "' has shape " + to_string(r.dims) +
                              " in the checkpoint but " + to_string(t.shape()) + " in the model");
        }
        auto dst = t.values_mut();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = T(r.values[i]);
        ++n;
    }
    return n;
}

template <typename T>
Model<T> model_from_records(const std::vector<TensorRecord>& recs, const std::string& source,
                            const ModelConfig* expected = nullptr)
{
    if (recs.size() < 2 || recs[0].name != kConfigRecord || recs[1].name != kPreprocessRecord) {
        throw DataError(source + ": not a model checkpoint (missing configuration records)");
    }
    const ModelConfig config = model_config_from_text(record_text(recs[0], source), source);
    if (expected) require_same_config(config, *expected, source);
    Model<T> m{config, preprocess_from_text(record_text(recs[1], source), source, config.input_size),
               init_params<T>(config, 0)};
    const std::size_t n = assign_params(m.params, recs, "", source);
    if (n != m.params.size()) {
        for (const auto& t : m.params.tensors()) {
            bool found = false;
            for (const auto& r : recs) found = found || r.name == t.name();
            if (!found) throw DataError(source + ": missing parameter '" + t.name() + "'");
        }
    }
    return m;
}

template <typename T>
Model<T> load_model(const std::string& path, const ModelConfig* expected = nullptr)
{
    return model_from_records<T>(load_records(path), path, expected);
}

// ---------------------------------------------------------------------------
// Inference

struct Keypoint {
    double row = 0;
    double col = 0;
};

// Feature-grid cell -> input-image pixel, centre-of-cell convention.
inline double cell_to_pixel(double cell, std::size_t stride)
{
    return double(stride) * cell + double(stride / 2);
}

// k keypoints in the frame's own pixel coordinates.
template <typename T>
std::vector<Keypoint> infer_keypoints(const Frame& frame, const Model<T>& m)
{
    const FeatureStack stack = preprocess(frame, m.preprocess);
    const auto kp = keynet(m.params, m.config, stack_to_tensor<T>(stack));
    const double sr = double(frame.rows) / double(m.config.input_size);
    const double sc = double(frame.cols) / double(m.config.input_size);
    std::vector<Keypoint> out;
    for (std::size_t j = 0; j < kp.k(); ++j) {
        const auto [r, c] = kp.cell(0, j);
        out.push_back({cell_to_pixel(r, m.config.feature_stride) * sr,
                       cell_to_pixel(c, m.config.feature_stride) * sc});
    }
    return out;
}

} // namespace lusk
