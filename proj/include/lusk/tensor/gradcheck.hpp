#pragma once

// Central-difference gradient checking in 64-bit.
//
// The checked function may return any shape; it is reduced to a scalar by a
// fixed random projection so that every output element contributes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lusk/tensor/ops.hpp"

namespace lusk {

struct GradcheckOptions {
    double step = 1e-5;
    std::uint64_t seed = 20240607;
    double low = -1.0;
    double high = 1.0;
    // Inputs are resampled until |x| >= min_abs (keeps relu/clamp kinks away).
    double min_abs = 0.0;
    // 0 checks every entry, otherwise a seeded random subset per tensor.
    std::size_t max_entries = 0;
    // rel = |a - n| / max(|a|, |n|, scale_floor)
    double scale_floor = 1e-3;
};

struct GradcheckReport {
    bool passed = false;
    double max_rel_error = 0.0;
    std::size_t entries_checked = 0;
    std::string worst;
};

// Checks d f / d wrt. Tensors in `wrt` are perturbed in place and restored.
inline GradcheckReport gradcheck(const std::function<Tensor<double>()>& f,
                                 std::vector<Tensor<double>> wrt, double tolerance,
                                 const GradcheckOptions& opts = {})
{
    std::mt19937_64 rng(opts.seed);
    const Tensor<double> probe = f();
    std::uniform_real_distribution<double> proj_dist(0.5, 1.5);
    std::vector<double> proj(probe.numel());
    for (auto& v : proj) v = proj_dist(rng) * ((rng() & 1) ? 1.0 : -1.0);
    const Tensor<double> weights(probe.shape(), proj, false);
    auto objective = [&]() { return sum(mul(f(), weights)); };

    for (auto& t : wrt) t.zero_grad();
    const auto loss = objective();
    GradcheckReport report;
    if (loss.requires_grad()) backward(loss);

    report.passed = true;
    for (std::size_t ti = 0; ti < wrt.size(); ++ti) {
        auto& t = wrt[ti];
        std::vector<std::size_t> idx(t.numel());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        if (opts.max_entries && idx.size() > opts.max_entries) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(opts.max_entries);
            std::sort(idx.begin(), idx.end());
        }
        const std::vector<double> analytic(t.grad().begin(), t.grad().end());
        for (auto i : idx) {
            auto vals = t.values_mut();
            const double orig = vals[i];
            vals[i] = orig + opts.step;
            const double up = objective().item();
            vals[i] = orig - opts.step;
            const double down = objective().item();
            vals[i] = orig;
            const double numeric = (up - down) / (2.0 * opts.step);
            const double a = analytic.empty() ? 0.0 : analytic[i];
            const double scale = std::max({std::abs(a), std::abs(numeric), opts.scale_floor});
            double rel = std::abs(a - numeric) / scale;
            if (std::isnan(rel)) rel = std::numeric_limits<double>::infinity();
            ++report.entries_checked;
            if (rel > report.max_rel_error || report.worst.empty()) {
                report.max_rel_error = rel;
                std::ostringstream os;
                os << "input " << ti << " (" << t.name() << ") entry " << i << ": analytic " << a
                   << " numeric " << numeric;
                report.worst = os.str();
            }
        }
    }
    report.passed = report.max_rel_error < tolerance;
    return report;
}

// Builds random leaf inputs of the given shapes and checks `op` against them.
inline GradcheckReport gradcheck(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& op,
    const std::vector<Shape>& input_shapes, double tolerance, const GradcheckOptions& opts = {})
{
    std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> dist(opts.low, opts.high);
    std::vector<Tensor<double>> inputs;
    for (const auto& s : input_shapes) {
        std::vector<double> v(numel(s));
        for (auto& x : v) {
            do {
                x = dist(rng);
            } while (std::abs(x) < opts.min_abs);
        }
        inputs.emplace_back(s, std::move(v), true);
    }
    return gradcheck([&]() { return op(inputs); }, inputs, tolerance, opts);
}

} // namespace lusk
