#pragma once

// Transporter network: feature encoder (with optional CBAM after each
// stage), KeyNet keypoint regressor, Gaussian heatmap rendering, feature
// transport and the RefineNet decoder. All activations are [N, C, H, W].

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lusk/error.hpp"
#include "lusk/model/config.hpp"
#include "lusk/tensor.hpp"

namespace lusk {

// Named trainable tensors in insertion order.
template <typename T>
class ParamSet {
public:
    // Returns a handle sharing storage with the stored parameter.
    Tensor<T> add(const std::string& name, Shape shape, std::vector<T> values)
    {
        if (index_.count(name)) throw std::invalid_argument("ParamSet: duplicate parameter " + name);
        index_[name] = tensors_.size();
        tensors_.push_back(Tensor<T>::parameter(name, std::move(shape), std::move(values)));
        return tensors_.back();
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    const Tensor<T>& at(const std::string& name) const
    {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("ParamSet: no parameter " + name);
        return tensors_[it->second];
    }

    Tensor<T>& at(const std::string& name)
    {
        return const_cast<Tensor<T>&>(static_cast<const ParamSet&>(*this).at(name));
    }

    std::vector<Tensor<T>>& tensors() { return tensors_; }
    const std::vector<Tensor<T>>& tensors() const { return tensors_; }
    std::size_t size() const { return tensors_.size(); }

    // Parameters whose names start with `prefix`, sharing storage with this set.
    std::vector<Tensor<T>> with_prefix(const std::string& prefix) const
    {
        std::vector<Tensor<T>> out;
        for (const auto& t : tensors_)
            if (t.name().rfind(prefix, 0) == 0) out.push_back(t);
        return out;
    }

    // Deep copy with fresh gradient buffers.
    ParamSet clone() const
    {
        ParamSet out;
        for (const auto& t : tensors_) {
            out.add(t.name(), t.shape(), std::vector<T>(t.values().begin(), t.values().end()));
        }
        return out;
    }

private:
    std::vector<Tensor<T>> tensors_;
    std::map<std::string, std::size_t> index_;
};

namespace detail {

template <typename T>
void add_conv(ParamSet<T>& p, std::mt19937_64& rng, const std::string& name, std::size_t co,
              std::size_t ci, std::size_t kernel, double gain = 2.0)
{
    const double fan_in = double(ci * kernel * kernel);
    std::normal_distribution<double> d(0.0, std::sqrt(gain / fan_in));
    std::vector<T> w(co * ci * kernel * kernel);
    for (auto& v : w) v = T(d(rng));
    p.add(name + ".weight", {co, ci, kernel, kernel}, std::move(w));
    p.add(name + ".bias", {co}, std::vector<T>(co, T(0)));
}

template <typename T>
void add_cbam(ParamSet<T>& p, std::mt19937_64& rng, const std::string& name, std::size_t c,
              std::size_t reduction)
{
    const std::size_t hidden = std::max<std::size_t>(1, c / reduction);
    add_conv(p, rng, name + ".mlp1", hidden, c, 1);
    add_conv(p, rng, name + ".mlp2", c, hidden, 1, 1.0);
    add_conv(p, rng, name + ".spatial", 1, 2, 7, 1.0);
}

// Two stride-2 stages, each conv(s2) then conv(s1).
template <typename T>
void add_trunk(ParamSet<T>& p, std::mt19937_64& rng, const std::string& prefix, const ModelConfig& c)
{
    add_conv(p, rng, prefix + ".conv1", c.stage1_channels, c.input_channels, 3);
    add_conv(p, rng, prefix + ".conv2", c.stage1_channels, c.stage1_channels, 3);
    add_conv(p, rng, prefix + ".conv3", c.stage2_channels, c.stage1_channels, 3);
    add_conv(p, rng, prefix + ".conv4", c.stage2_channels, c.stage2_channels, 3);
}

} // namespace detail

// Decoder from feature resolution to input resolution, used for RefineNet
// ("refine") and the pretraining decoder ("decoder").
template <typename T>
void add_decoder_params(ParamSet<T>& p, std::mt19937_64& rng, const std::string& prefix,
                        const ModelConfig& c)
{
    detail::add_conv(p, rng, prefix + ".conv1", c.refine_channels, c.feature_channels(), 3);
    detail::add_conv(p, rng, prefix + ".conv2", c.refine_channels, c.refine_channels, 3);
    detail::add_conv(p, rng, prefix + ".out", c.input_channels, c.refine_channels, 3, 1.0);
}

template <typename T>
void add_encoder_params(ParamSet<T>& p, std::mt19937_64& rng, const ModelConfig& c)
{
    detail::add_trunk(p, rng, "encoder", c);
    if (c.cbam_enabled) {
        detail::add_cbam(p, rng, "encoder.cbam1", c.stage1_channels, c.cbam_reduction);
        detail::add_cbam(p, rng, "encoder.cbam2", c.stage2_channels, c.cbam_reduction);
    }
}

// Seeded initialization: He-normal convolutions, zero biases.
template <typename T>
ParamSet<T> init_params(const ModelConfig& c, std::uint64_t seed)
{
    c.validate();
    std::mt19937_64 rng(seed);
    ParamSet<T> p;
    add_encoder_params(p, rng, c);
    detail::add_trunk(p, rng, "keynet", c);
    detail::add_conv(p, rng, "keynet.head", c.k, c.stage2_channels, 1, 1.0);
    add_decoder_params(p, rng, "refine", c);
    return p;
}

// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
Tensor<T> conv(const ParamSet<T>& p, const std::string& name, const Tensor<T>& x, std::size_t stride,
               std::size_t pad)
{
    return conv2d(x, p.at(name + ".weight"), p.at(name + ".bias"), stride, pad);
}

template <typename T>
Tensor<T> conv_block(const ParamSet<T>& p, const std::string& name, const Tensor<T>& x, std::size_t stride)
{
    return relu(instance_norm(conv(p, name, x, stride, 1)));
}

template <typename T>
void require_input(const char* op, const Tensor<T>& x, const ModelConfig& c)
{
    if (x.rank() != 4 || x.dim(1) != c.input_channels || x.dim(2) != c.input_size ||
        x.dim(3) != c.input_size) {
        throw ShapeError(std::string(op) + ": input " + to_string(x.shape()) + " does not match [N, " +
                         std::to_string(c.input_channels) + ", " + std::to_string(c.input_size) + ", " +
                         std::to_string(c.input_size) + "]");
    }
}

} // namespace detail

// Channel attention then spatial attention; output shape equals input shape.
template <typename T>
Tensor<T> cbam(const ParamSet<T>& p, const std::string& name, const Tensor<T>& x)
{
    if (x.rank() != 4) throw ShapeError("cbam: expected [N, C, H, W], got " + to_string(x.shape()));
    auto mlp = [&](const Tensor<T>& d) {
        return detail::conv(p, name + ".mlp2", relu(detail::conv(p, name + ".mlp1", d, 1, 0)), 1, 0);
    };
    const auto channel_gate = sigmoid(add(mlp(mean(x, {2, 3})), mlp(max(x, {2, 3}))));
    const auto y = mul(x, channel_gate);
    const auto pooled = concat_channels<T>({mean(y, {1}), max(y, {1})});
    const auto spatial_gate = sigmoid(detail::conv(p, name + ".spatial", pooled, 1, 3));
    return mul(y, spatial_gate);
}

// Stack [N, input_channels, S, S] -> features [N, stage2_channels, S/4, S/4].
template <typename T>
Tensor<T> encode(const ParamSet<T>& p, const ModelConfig& c, const Tensor<T>& x)
{
    detail::require_input("encode", x, c);
    auto h = detail::conv_block(p, "encoder.conv1", x, 2);
    h = detail::conv_block(p, "encoder.conv2", h, 1);
    if (c.cbam_enabled) h = cbam(p, "encoder.cbam1", h);
    h = detail::conv_block(p, "encoder.conv3", h, 2);
    h = detail::conv_block(p, "encoder.conv4", h, 1);
    if (c.cbam_enabled) h = cbam(p, "encoder.cbam2", h);
    return h;
}

template <typename T>
struct KeypointSet {
    Tensor<T> rows;      // [N, k, 1, 1], feature-grid cells
    Tensor<T> cols;      // [N, k, 1, 1]
    Tensor<T> heatmaps;  // [N, k, H, W]
    Tensor<T> combined;  // [N, 1, H, W], clamp(sum_k heatmaps, 0, 1)

    std::size_t batch() const { return rows.dim(0); }
    std::size_t k() const { return rows.dim(1); }

    // (row, col) of keypoint j in sample n, in feature-grid cells.
    std::pair<double, double> cell(std::size_t n, std::size_t j) const
    {
        const std::size_t i = n * k() + j;
        return {double(rows.values()[i]), double(cols.values()[i])};
    }

    // Same, mapped to [-1, 1] across the grid.
    std::pair<double, double> normalized(std::size_t n, std::size_t j) const
    {
        const auto [r, c] = cell(n, j);
        const double h = double(heatmaps.dim(2)), w = double(heatmaps.dim(3));
        return {h > 1 ? 2 * r / (h - 1) - 1 : 0.0, w > 1 ? 2 * c / (w - 1) - 1 : 0.0};
    }
};

namespace detail {

template <typename T>
Tensor<T> grid_axis(std::size_t n, bool along_rows)
{
    std::vector<T> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = T(i);
    return along_rows ? Tensor<T>({1, 1, n, 1}, std::move(v)) : Tensor<T>({1, 1, 1, n}, std::move(v));
}

} // namespace detail

// Spatial soft-argmax of [N, k, H, W] logits -> expected (row, col) per map.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> keypoints_from_logits(const Tensor<T>& logits)
{
    if (logits.rank() != 4) {
        throw ShapeError("keypoints_from_logits: expected [N, k, H, W], got " + to_string(logits.shape()));
    }
    const auto prob = spatial_softmax(logits);
    auto rows = sum(mul(prob, detail::grid_axis<T>(logits.dim(2), true)), {2, 3});
    auto cols = sum(mul(prob, detail::grid_axis<T>(logits.dim(3), false)), {2, 3});
    return {rows, cols};
}

// exp(-((r - r_k)^2 + (c - c_k)^2) / (2 sigma^2)) on an H x W grid.
template <typename T>
Tensor<T> render_heatmaps(const Tensor<T>& rows, const Tensor<T>& cols, std::size_t height,
                          std::size_t width, double sigma)
{
    if (rows.shape() != cols.shape() || rows.rank() != 4 || rows.dim(2) != 1 || rows.dim(3) != 1) {
        throw ShapeError("render_heatmaps: coordinates " + to_string(rows.shape()) + " and " +
                         to_string(cols.shape()) + " must both be [N, k, 1, 1]");
    }
    if (!(sigma > 0)) throw std::invalid_argument("render_heatmaps: sigma must be > 0");
    const auto dr = sub(detail::grid_axis<T>(height, true), rows);
    const auto dc = sub(detail::grid_axis<T>(width, false), cols);
    const auto d2 = add(mul(dr, dr), mul(dc, dc));
    return exp(affine(d2, T(-1.0 / (2 * sigma * sigma)), T(0)));
}

template <typename T>
Tensor<T> combine_heatmaps(const Tensor<T>& heatmaps)
{
    return clamp(sum(heatmaps, {1}), T(0), T(1));
}

template <typename T>
KeypointSet<T> keypoints_from_coords(Tensor<T> rows, Tensor<T> cols, std::size_t height, std::size_t width,
                                     double sigma)
{
    KeypointSet<T> kp;
    kp.heatmaps = render_heatmaps(rows, cols, height, width, sigma);
    kp.combined = combine_heatmaps(kp.heatmaps);
    kp.rows = std::move(rows);
    kp.cols = std::move(cols);
    return kp;
}

template <typename T>
Tensor<T> keynet_logits(const ParamSet<T>& p, const ModelConfig& c, const Tensor<T>& x)
{
    detail::require_input("keynet", x, c);
    auto h = detail::conv_block(p, "keynet.conv1", x, 2);
    h = detail::conv_block(p, "keynet.conv2", h, 1);
    h = detail::conv_block(p, "keynet.conv3", h, 2);
    h = detail::conv_block(p, "keynet.conv4", h, 1);
    return detail::conv(p, "keynet.head", h, 1, 0);
}

template <typename T>
KeypointSet<T> keynet(const ParamSet<T>& p, const ModelConfig& c, const Tensor<T>& x)
{
    const auto logits = keynet_logits(p, c, x);
    auto [rows, cols] = keypoints_from_logits(logits);
    return keypoints_from_coords(std::move(rows), std::move(cols), logits.dim(2), logits.dim(3),
                                 c.heatmap_sigma);
}

// (1 - Hs)(1 - Ht) Fs + Ht Ft. The features and heatmap of the `stop`
// branch carry no gradient.
template <typename T>
Tensor<T> transport(const Tensor<T>& source_features, const Tensor<T>& target_features,
                    const Tensor<T>& source_heatmap, const Tensor<T>& target_heatmap,
                    StopBranch stop = StopBranch::source)
{
    if (source_features.shape() != target_features.shape() || source_features.rank() != 4) {
        throw ShapeError("transport: feature maps " + to_string(source_features.shape()) + " and " +
                         to_string(target_features.shape()) + " differ");
    }
    const Shape expected{source_features.dim(0), 1, source_features.dim(2), source_features.dim(3)};
    if (source_heatmap.shape() != expected || target_heatmap.shape() != expected) {
        throw ShapeError("transport: heatmaps " + to_string(source_heatmap.shape()) + " and " +
                         to_string(target_heatmap.shape()) + " must be " + to_string(expected));
    }
    const bool src = stop == StopBranch::source;
    const auto fs = src ? stop_gradient(source_features) : source_features;
    const auto hs = src ? stop_gradient(source_heatmap) : source_heatmap;
    const auto ft = src ? target_features : stop_gradient(target_features);
    const auto ht = src ? target_heatmap : stop_gradient(target_heatmap);
    const auto keep = mul(affine(hs, T(-1), T(1)), affine(ht, T(-1), T(1)));
    return add(mul(keep, fs), mul(ht, ft));
}

// Two nearest-neighbour 2x stages back to input resolution; sigmoid output.
template <typename T>
Tensor<T> decode(const ParamSet<T>& p, const std::string& prefix, const ModelConfig& c, const Tensor<T>& f)
{
    if (f.rank() != 4 || f.dim(1) != c.feature_channels() || f.dim(2) != c.feature_size() ||
        f.dim(3) != c.feature_size()) {
        throw ShapeError(prefix + ": features " + to_string(f.shape()) + " do not match [N, " +
                         std::to_string(c.feature_channels()) + ", " + std::to_string(c.feature_size()) +
                         ", " + std::to_string(c.feature_size()) + "]");
    }
    auto h = detail::conv_block(p, prefix + ".conv1", f, 1);
    h = detail::conv_block(p, prefix + ".conv2", upsample2x(h), 1);
    return sigmoid(detail::conv(p, prefix + ".out", upsample2x(h), 1, 1));
}

template <typename T>
Tensor<T> refine(const ParamSet<T>& p, const ModelConfig& c, const Tensor<T>& features)
{
    return decode(p, "refine", c, features);
}

template <typename T>
struct TransporterOutput {
    KeypointSet<T> source_keypoints;
    KeypointSet<T> target_keypoints;
    Tensor<T> transported;
    Tensor<T> reconstruction;
    Tensor<T> loss;
};

// Reconstruct the target stack from the source stack and both keypoint sets.
template <typename T>
TransporterOutput<T> transporter_forward(const ParamSet<T>& p, const ModelConfig& c, const Tensor<T>& source,
                                         const Tensor<T>& target)
{
    TransporterOutput<T> out;
    const auto fs = encode(p, c, source);
    const auto ft = encode(p, c, target);
    out.source_keypoints = keynet(p, c, source);
    out.target_keypoints = keynet(p, c, target);
    out.transported = transport(fs, ft, out.source_keypoints.combined, out.target_keypoints.combined,
                                c.stop_gradient_branch);
    out.reconstruction = refine(p, c, out.transported);
    out.loss = mse(out.reconstruction, target);
    return out;
}

} // namespace lusk
